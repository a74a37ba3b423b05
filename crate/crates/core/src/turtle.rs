//! Turtle state machine and the line-based trace protocol.
//!
//! A [`TurtleTrace`] is the interchange format between candidate programs and
//! the engine: one command per line, replayed by [`execute`] into a
//! [`PathSet`] of world-coordinate polylines.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Position, heading (degrees, 0 = east, counterclockwise positive) and pen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurtleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub pen_down: bool,
}

impl Default for TurtleState {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            pen_down: true,
        }
    }
}

impl TurtleState {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Unit direction of the current heading. Periodic in 360 degrees.
    pub fn direction(&self) -> (f64, f64) {
        let radians = self.heading.to_radians();
        (radians.cos(), radians.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TurtleCommand {
    Move(f64),
    Turn(f64),
    Goto(f64, f64),
    PenUp,
    PenDown,
    Reset,
}

impl fmt::Display for TurtleCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TurtleCommand::Move(d) => write!(f, "MOVE {}", Num(d)),
            TurtleCommand::Turn(a) => write!(f, "TURN {}", Num(a)),
            TurtleCommand::Goto(x, y) => write!(f, "GOTO {} {}", Num(x), Num(y)),
            TurtleCommand::PenUp => f.write_str("PENUP"),
            TurtleCommand::PenDown => f.write_str("PENDOWN"),
            TurtleCommand::Reset => f.write_str("RESET"),
        }
    }
}

/// Shortest round-trip decimal; exponent form outside a readable range.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        let a = v.abs();
        if a != 0.0 && !(1e-5..1e15).contains(&a) {
            write!(f, "{v:e}")
        } else {
            write!(f, "{v}")
        }
    }
}

/// An ordered list of turtle commands plus an opaque origin tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurtleTrace {
    pub commands: Vec<TurtleCommand>,
    pub source_id: String,
}

impl TurtleTrace {
    pub fn new(source_id: impl Into<String>) -> Self {
        Self {
            commands: Vec::new(),
            source_id: source_id.into(),
        }
    }

    pub fn from_commands(source_id: impl Into<String>, commands: Vec<TurtleCommand>) -> Self {
        Self {
            commands,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn push(&mut self, cmd: TurtleCommand) {
        self.commands.push(cmd);
    }
}

/// Axis-aligned bounds of a [`PathSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }
}

/// Polylines produced by executing a trace.
///
/// Every polyline has at least two vertices and `bounds` is the exact
/// componentwise min/max over all vertices (`None` when empty).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    polylines: Vec<Vec<Point>>,
    bounds: Option<Bounds>,
}

impl PathSet {
    /// Builds a path set, dropping polylines with fewer than two vertices.
    pub fn from_polylines(polylines: Vec<Vec<Point>>) -> Self {
        let polylines: Vec<Vec<Point>> = polylines.into_iter().filter(|p| p.len() >= 2).collect();
        let mut bounds: Option<Bounds> = None;
        for p in polylines.iter().flatten() {
            bounds = Some(match bounds {
                None => Bounds {
                    min_x: p.x,
                    min_y: p.y,
                    max_x: p.x,
                    max_y: p.y,
                },
                Some(b) => Bounds {
                    min_x: b.min_x.min(p.x),
                    min_y: b.min_y.min(p.y),
                    max_x: b.max_x.max(p.x),
                    max_y: b.max_y.max(p.y),
                },
            });
        }
        Self { polylines, bounds }
    }

    pub fn polylines(&self) -> &[Vec<Point>] {
        &self.polylines
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    /// False when accumulated moves overflowed to an infinite or NaN vertex.
    pub fn is_finite(&self) -> bool {
        self.vertices().all(|v| v.x.is_finite() && v.y.is_finite())
    }

    /// Number of drawn segments (polyline edges).
    pub fn segment_count(&self) -> usize {
        self.polylines.iter().map(|p| p.len() - 1).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polylines
            .iter()
            .flat_map(|p| p.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.polylines.iter().flatten().copied()
    }

    /// Appends another path set's polylines (used by composite drawings).
    pub fn extend(&mut self, other: PathSet) {
        let mut all = std::mem::take(&mut self.polylines);
        all.extend(other.polylines);
        *self = PathSet::from_polylines(all);
    }
}

/// Stateful interpreter; [`execute`] is the one-shot entry point.
#[derive(Debug, Clone)]
pub struct Turtle {
    state: TurtleState,
    paths: Vec<Vec<Point>>,
}

impl Default for Turtle {
    fn default() -> Self {
        Self::new()
    }
}

impl Turtle {
    pub fn new() -> Self {
        Self {
            state: TurtleState::default(),
            paths: vec![Vec::new()],
        }
    }

    pub fn state(&self) -> &TurtleState {
        &self.state
    }

    pub fn apply(&mut self, cmd: TurtleCommand) {
        match cmd {
            TurtleCommand::Move(distance) => self.move_by(distance),
            TurtleCommand::Turn(delta) => self.state.heading += delta,
            TurtleCommand::Goto(x, y) => {
                self.state.x = x;
                self.state.y = y;
                self.open_polyline();
            }
            TurtleCommand::PenUp => self.state.pen_down = false,
            TurtleCommand::PenDown => {
                self.state.pen_down = true;
                self.open_polyline();
            }
            TurtleCommand::Reset => *self = Turtle::new(),
        }
    }

    fn move_by(&mut self, distance: f64) {
        let (dx, dy) = self.state.direction();
        let from = self.state.position();
        let to = Point::new(from.x + distance * dx, from.y + distance * dy);
        // Zero-length moves never produce a segment.
        if self.state.pen_down && distance != 0.0 {
            let current = self.paths.last_mut().expect("paths never empty");
            if current.is_empty() {
                current.push(from);
            }
            current.push(to);
        }
        self.state.x = to.x;
        self.state.y = to.y;
    }

    fn open_polyline(&mut self) {
        if self.paths.last().is_some_and(|p| !p.is_empty()) {
            self.paths.push(Vec::new());
        }
    }

    pub fn into_paths(self) -> PathSet {
        PathSet::from_polylines(self.paths)
    }
}

/// Replays a trace from the initial state.
pub fn execute(trace: &TurtleTrace) -> PathSet {
    execute_with_state(trace).0
}

/// Like [`execute`] but also returns the final turtle state.
pub fn execute_with_state(trace: &TurtleTrace) -> (PathSet, TurtleState) {
    let mut turtle = Turtle::new();
    for &cmd in &trace.commands {
        turtle.apply(cmd);
    }
    let state = *turtle.state();
    (turtle.into_paths(), state)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseReason {
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("arity mismatch: `{keyword}` takes {expected} argument(s), found {found}")]
    Arity {
        keyword: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("non-finite number `{0}`")]
    NonFinite(String),
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub reason: ParseReason,
}

/// Parses the line-oriented trace format.
///
/// Grammar, one command per line: `MOVE <f>`, `TURN <f>`, `GOTO <f> <f>`,
/// `PENUP`, `PENDOWN`, `RESET`. Blank lines and lines whose first
/// non-blank character is `#` are skipped. LF and CRLF are both accepted.
pub fn parse_trace(text: &[u8], source_id: impl Into<String>) -> Result<TurtleTrace, ParseError> {
    let mut commands = Vec::new();
    for (idx, raw) in text.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = std::str::from_utf8(raw).map_err(|_| ParseError {
            line: line_no,
            reason: ParseReason::InvalidUtf8,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cmd = parse_line(line).map_err(|reason| ParseError {
            line: line_no,
            reason,
        })?;
        commands.push(cmd);
    }
    Ok(TurtleTrace {
        commands,
        source_id: source_id.into(),
    })
}

fn parse_line(line: &str) -> Result<TurtleCommand, ParseReason> {
    let mut tokens = line.split_ascii_whitespace();
    let keyword = tokens.next().unwrap_or_default();
    let args: Vec<&str> = tokens.collect();
    let (name, arity): (&'static str, usize) = match keyword {
        "MOVE" => ("MOVE", 1),
        "TURN" => ("TURN", 1),
        "GOTO" => ("GOTO", 2),
        "PENUP" => ("PENUP", 0),
        "PENDOWN" => ("PENDOWN", 0),
        "RESET" => ("RESET", 0),
        other => return Err(ParseReason::UnknownKeyword(other.to_string())),
    };
    if args.len() != arity {
        return Err(ParseReason::Arity {
            keyword: name,
            expected: arity,
            found: args.len(),
        });
    }
    let nums = args
        .iter()
        .map(|s| parse_number(s))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(match name {
        "MOVE" => TurtleCommand::Move(nums[0]),
        "TURN" => TurtleCommand::Turn(nums[0]),
        "GOTO" => TurtleCommand::Goto(nums[0], nums[1]),
        "PENUP" => TurtleCommand::PenUp,
        "PENDOWN" => TurtleCommand::PenDown,
        _ => TurtleCommand::Reset,
    })
}

fn parse_number(token: &str) -> Result<f64, ParseReason> {
    // f64::from_str also accepts "inf"/"nan"; only decimal digits get through.
    let decimal = token
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    if !decimal {
        return Err(ParseReason::InvalidNumber(token.to_string()));
    }
    let v: f64 = token
        .parse()
        .map_err(|_| ParseReason::InvalidNumber(token.to_string()))?;
    if !v.is_finite() {
        return Err(ParseReason::NonFinite(token.to_string()));
    }
    Ok(v)
}

/// Serializes a trace, one command per line with a trailing newline.
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`, so `parse_trace(serialize_trace(t)) == t`.
pub fn serialize_trace(trace: &TurtleTrace) -> String {
    let mut out = String::with_capacity(trace.commands.len() * 12);
    for cmd in &trace.commands {
        let _ = writeln!(out, "{cmd}");
    }
    out
}
