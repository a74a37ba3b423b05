//! The twelve IFS fractals: their contraction maps, depth limits and
//! deterministic ground-truth turtle constructors.
//!
//! Maps are stored in each fractal's unit frame (unit segment, unit square,
//! unit-side polygon). Drawings are produced at base size `s0` world units by
//! recursive turtle programs; the maps are only used to check them.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::turtle::{execute, PathSet, Point, TurtleCommand, TurtleTrace};

/// Golden ratio.
pub const PHI: f64 = 1.618_033_988_749_895;

/// Default linear size of the depth-0 building block, in pixels.
pub const BASE_SIZE: f64 = 500.0;

/// Vertical offset between stacked Cantor rows.
pub const CANTOR_Y_SPACING: f64 = 20.0;

pub const TREE_ANGLE_DEG: f64 = 60.0;
pub const TREE_RATIO: f64 = 0.65;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown fractal `{0}`")]
    UnknownFractal(String),
    #[error("depth {depth} out of range for {fractal} (max {max})")]
    DepthOutOfRange {
        fractal: &'static str,
        depth: u32,
        max: u32,
    },
    #[error("depth-cap domain error: {0}")]
    Domain(String),
}

/// `x -> scale * R(rotation) * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineMap2D {
    pub scale: f64,
    /// Radians, counterclockwise.
    pub rotation: f64,
    pub translation: Point,
}

impl AffineMap2D {
    pub const fn new(scale: f64, rotation: f64, tx: f64, ty: f64) -> Self {
        Self {
            scale,
            rotation,
            translation: Point::new(tx, ty),
        }
    }

    /// Corner contraction `x -> r (x - v) + v`.
    pub fn toward(vertex: Point, r: f64) -> Self {
        Self::new(r, 0.0, vertex.x * (1.0 - r), vertex.y * (1.0 - r))
    }

    pub fn apply(&self, p: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        Point::new(
            self.scale * (c * p.x - s * p.y) + self.translation.x,
            self.scale * (s * p.x + c * p.y) + self.translation.y,
        )
    }

    /// The same map conjugated by a uniform scaling of the frame by `factor`.
    pub fn in_frame(&self, factor: f64) -> Self {
        Self {
            translation: Point::new(self.translation.x * factor, self.translation.y * factor),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractalKind {
    CantorSet,
    CantorDust,
    KochCurve,
    KochSnowflake,
    SierpinskiGasket,
    SierpinskiCarpet,
    SierpinskiPentagon,
    HeighwayDragon,
    LevyDragon,
    McworterPentigree,
    PythagorasTree,
    SymmetricBinaryTree,
}

impl FractalKind {
    pub const ALL: [FractalKind; 12] = [
        FractalKind::CantorSet,
        FractalKind::CantorDust,
        FractalKind::KochCurve,
        FractalKind::KochSnowflake,
        FractalKind::SierpinskiGasket,
        FractalKind::SierpinskiCarpet,
        FractalKind::SierpinskiPentagon,
        FractalKind::HeighwayDragon,
        FractalKind::LevyDragon,
        FractalKind::McworterPentigree,
        FractalKind::PythagorasTree,
        FractalKind::SymmetricBinaryTree,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            FractalKind::CantorSet => "cantor_set",
            FractalKind::CantorDust => "cantor_dust",
            FractalKind::KochCurve => "koch_curve",
            FractalKind::KochSnowflake => "koch_snowflake",
            FractalKind::SierpinskiGasket => "sierpinski_gasket",
            FractalKind::SierpinskiCarpet => "sierpinski_carpet",
            FractalKind::SierpinskiPentagon => "sierpinski_pentagon",
            FractalKind::HeighwayDragon => "heighway_dragon",
            FractalKind::LevyDragon => "levy_dragon",
            FractalKind::McworterPentigree => "mcworter_pentigree",
            FractalKind::PythagorasTree => "pythagoras_tree",
            FractalKind::SymmetricBinaryTree => "symmetric_binary_tree",
        }
    }

    pub const fn display_name(self) -> &'static str {
        match self {
            FractalKind::CantorSet => "Cantor Set",
            FractalKind::CantorDust => "Cantor Dust",
            FractalKind::KochCurve => "Koch Curve",
            FractalKind::KochSnowflake => "Koch Snowflake",
            FractalKind::SierpinskiGasket => "Sierpiński Gasket",
            FractalKind::SierpinskiCarpet => "Sierpiński Carpet",
            FractalKind::SierpinskiPentagon => "Sierpiński Pentagon",
            FractalKind::HeighwayDragon => "Heighway Dragon",
            FractalKind::LevyDragon => "Lévy Dragon",
            FractalKind::McworterPentigree => "McWorter's Pentigree",
            FractalKind::PythagorasTree => "Pythagoras Tree",
            FractalKind::SymmetricBinaryTree => "Symmetric Binary Tree",
        }
    }
}

impl fmt::Display for FractalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FractalKind {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FractalKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownFractal(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractalSpec {
    pub kind: FractalKind,
    pub name: &'static str,
    pub display_name: &'static str,
    pub maps: Vec<AffineMap2D>,
    pub ratio: f64,
    pub max_depth: u32,
    /// Rendering parameters in fixed order; they appear in corpus file names.
    pub extra_params: Vec<(String, f64)>,
    pub base_size: f64,
}

impl FractalSpec {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.extra_params
            .iter()
            .find(|(k, _)| k == name)
            .map(|&(_, v)| v)
    }
}

/// Query for [`depth_cap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCapQuery {
    pub base_size: f64,
    pub min_size: f64,
    pub ratio: f64,
}

impl DepthCapQuery {
    pub fn new(base_size: f64, ratio: f64) -> Self {
        Self {
            base_size,
            min_size: 1.0,
            ratio,
        }
    }
}

/// Largest depth whose feature size `s0 * r^d` stays at or above `s_min`:
/// `floor(ln(s_min / s0) / ln r)`.
pub fn depth_cap(q: DepthCapQuery) -> Result<u32, CatalogError> {
    let DepthCapQuery {
        base_size,
        min_size,
        ratio,
    } = q;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CatalogError::Domain(format!("ratio {ratio} not in (0, 1)")));
    }
    if !(min_size > 0.0 && base_size > min_size) {
        return Err(CatalogError::Domain(format!(
            "need s0 > s_min > 0, got s0 = {base_size}, s_min = {min_size}"
        )));
    }
    let quotient = (min_size / base_size).ln() / ratio.ln();
    let mut depth = quotient.floor();
    // Exact powers (e.g. s0 = 8, r = 1/2) can land a hair below the integer.
    if base_size * ratio.powf(depth + 1.0) >= min_size * (1.0 - 1e-12) {
        depth += 1.0;
    }
    Ok(depth as u32)
}

fn regular_polygon(n: usize, side: f64) -> Vec<Point> {
    let mut p = Point::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(p);
        let a = (360.0 * k as f64 / n as f64).to_radians();
        p = Point::new(p.x + side * a.cos(), p.y + side * a.sin());
    }
    out
}

/// Vertices of the unit-side equilateral triangle used by the gasket maps.
pub fn gasket_vertices() -> Vec<Point> {
    regular_polygon(3, 1.0)
}

/// Vertices of the unit-side regular pentagon used by the pentagon maps.
pub fn pentagon_vertices() -> Vec<Point> {
    regular_polygon(5, 1.0)
}

/// Pentigree frame: regular pentagon with unit circumradius, first edge
/// starting at the origin heading east.
pub fn pentigree_vertices() -> Vec<Point> {
    regular_polygon(5, pentigree_side(1.0))
}

fn pentigree_side(circumradius: f64) -> f64 {
    2.0 * circumradius * 36f64.to_radians().sin()
}

fn build_spec(kind: FractalKind) -> FractalSpec {
    let third = 1.0 / 3.0;
    let golden = 1.0 / (1.0 + PHI);
    let (maps, ratio, max_depth, extra) = match kind {
        FractalKind::CantorSet => (
            vec![
                AffineMap2D::new(third, 0.0, 0.0, 0.0),
                AffineMap2D::new(third, 0.0, 2.0 / 3.0, 0.0),
            ],
            third,
            5,
            vec![("y_spacing".to_string(), CANTOR_Y_SPACING)],
        ),
        FractalKind::CantorDust => {
            let maps = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
                .into_iter()
                .map(|(i, j)| AffineMap2D::new(third, 0.0, 2.0 * i / 3.0, 2.0 * j / 3.0))
                .collect();
            (maps, third, 4, vec![])
        }
        FractalKind::KochCurve | FractalKind::KochSnowflake => (
            vec![
                AffineMap2D::new(third, 0.0, 0.0, 0.0),
                AffineMap2D::new(third, FRAC_PI_3, third, 0.0),
                AffineMap2D::new(third, -FRAC_PI_3, 0.5, 3f64.sqrt() / 6.0),
                AffineMap2D::new(third, 0.0, 2.0 / 3.0, 0.0),
            ],
            third,
            if kind == FractalKind::KochCurve { 4 } else { 5 },
            vec![],
        ),
        FractalKind::SierpinskiGasket => (
            gasket_vertices()
                .into_iter()
                .map(|v| AffineMap2D::toward(v, 0.5))
                .collect(),
            0.5,
            6,
            vec![],
        ),
        FractalKind::SierpinskiCarpet => {
            let mut maps = Vec::with_capacity(8);
            for j in 0..3 {
                for i in 0..3 {
                    if (i, j) != (1, 1) {
                        maps.push(AffineMap2D::new(third, 0.0, i as f64 / 3.0, j as f64 / 3.0));
                    }
                }
            }
            (maps, third, 4, vec![])
        }
        FractalKind::SierpinskiPentagon => (
            pentagon_vertices()
                .into_iter()
                .map(|v| AffineMap2D::toward(v, golden))
                .collect(),
            golden,
            6,
            vec![],
        ),
        FractalKind::McworterPentigree => (
            pentigree_vertices()
                .into_iter()
                .map(|v| AffineMap2D::toward(v, golden))
                .collect(),
            golden,
            6,
            vec![],
        ),
        // Stored as printed; the drawing uses the classical unfolding, see
        // `heighway_classical_maps`.
        FractalKind::HeighwayDragon => (
            vec![
                AffineMap2D::new(FRAC_1_SQRT_2, FRAC_PI_4, 0.0, 0.0),
                AffineMap2D::new(FRAC_1_SQRT_2, -FRAC_PI_4, 1.0, 0.0),
            ],
            FRAC_1_SQRT_2,
            10,
            vec![],
        ),
        FractalKind::LevyDragon => (
            vec![
                AffineMap2D::new(FRAC_1_SQRT_2, FRAC_PI_4, 0.0, 0.0),
                AffineMap2D::new(FRAC_1_SQRT_2, -FRAC_PI_4, 0.5, 0.5),
            ],
            FRAC_1_SQRT_2,
            12,
            vec![],
        ),
        FractalKind::PythagorasTree => (
            vec![
                AffineMap2D::new(FRAC_1_SQRT_2, FRAC_PI_4, 0.0, 1.0),
                AffineMap2D::new(FRAC_1_SQRT_2, -FRAC_PI_4, 0.5, 1.5),
            ],
            FRAC_1_SQRT_2,
            8,
            vec![],
        ),
        FractalKind::SymmetricBinaryTree => {
            let theta = TREE_ANGLE_DEG.to_radians();
            (
                vec![
                    AffineMap2D::new(TREE_RATIO, theta, 0.0, 1.0),
                    AffineMap2D::new(TREE_RATIO, -theta, 0.0, 1.0),
                ],
                TREE_RATIO,
                7,
                vec![
                    ("angle".to_string(), TREE_ANGLE_DEG),
                    ("ratio".to_string(), TREE_RATIO),
                ],
            )
        }
    };
    FractalSpec {
        kind,
        name: kind.as_str(),
        display_name: kind.display_name(),
        maps,
        ratio,
        max_depth,
        extra_params: extra,
        base_size: BASE_SIZE,
    }
}

/// Classical Heighway maps (second map rotates by 3π/4), which the unfolding
/// construction satisfies exactly.
pub fn heighway_classical_maps() -> [AffineMap2D; 2] {
    [
        AffineMap2D::new(FRAC_1_SQRT_2, FRAC_PI_4, 0.0, 0.0),
        AffineMap2D::new(FRAC_1_SQRT_2, 3.0 * FRAC_PI_4, 1.0, 0.0),
    ]
}

static CATALOG: LazyLock<Vec<FractalSpec>> =
    LazyLock::new(|| FractalKind::ALL.into_iter().map(build_spec).collect());

/// All twelve specs in canonical order.
pub fn catalog() -> &'static [FractalSpec] {
    &CATALOG
}

pub fn spec(kind: FractalKind) -> &'static FractalSpec {
    &CATALOG[kind as usize]
}

pub fn lookup(name: &str) -> Result<&'static FractalSpec, CatalogError> {
    name.parse::<FractalKind>().map(spec)
}

/// Pretty JSON listing of the catalog (name, ratio, maps, max depth, params).
pub fn manifest_json() -> String {
    serde_json::to_string_pretty(catalog()).expect("catalog serializes")
}

/// Ground-truth turtle program for `kind` at `depth`, checked against the
/// table's maximum depth.
pub fn trace(kind: FractalKind, depth: u32) -> Result<TurtleTrace, CatalogError> {
    let s = spec(kind);
    if depth > s.max_depth {
        return Err(CatalogError::DepthOutOfRange {
            fractal: s.name,
            depth,
            max: s.max_depth,
        });
    }
    Ok(trace_unchecked(kind, depth))
}

/// Ground-truth turtle program without the depth check (research override).
pub fn trace_unchecked(kind: FractalKind, depth: u32) -> TurtleTrace {
    let mut pen = Pen::default();
    let s0 = BASE_SIZE;
    match kind {
        FractalKind::CantorSet => cantor_rows(&mut pen, 0.0, 0.0, s0, depth),
        FractalKind::CantorDust => grid_squares(&mut pen, 0.0, 0.0, s0, depth, &DUST_CELLS),
        FractalKind::SierpinskiCarpet => grid_squares(&mut pen, 0.0, 0.0, s0, depth, &CARPET_CELLS),
        FractalKind::KochCurve => koch(&mut pen, s0, depth),
        FractalKind::KochSnowflake => {
            // Clockwise traversal puts every bump on the outside.
            pen.turn(60.0);
            for _ in 0..3 {
                koch(&mut pen, s0, depth);
                pen.turn(-120.0);
            }
        }
        FractalKind::SierpinskiGasket => corner_copies(&mut pen, 3, s0, 0.5, depth, &Base::Outline),
        FractalKind::SierpinskiPentagon => {
            corner_copies(&mut pen, 5, s0, 1.0 / (1.0 + PHI), depth, &Base::Outline)
        }
        FractalKind::McworterPentigree => corner_copies(
            &mut pen,
            5,
            pentigree_side(s0),
            1.0 / (1.0 + PHI),
            depth,
            &Base::Spokes,
        ),
        FractalKind::HeighwayDragon => heighway(&mut pen, s0, depth, 1.0),
        FractalKind::LevyDragon => levy(&mut pen, s0, depth),
        FractalKind::PythagorasTree => pythagoras(&mut pen, s0, depth),
        FractalKind::SymmetricBinaryTree => {
            pen.turn(90.0);
            binary_tree(&mut pen, s0, depth);
        }
    }
    TurtleTrace::from_commands(format!("{}:{}", kind.as_str(), depth), pen.cmds)
}

/// Drawn approximation of the attractor at `depth`.
pub fn generate(kind: FractalKind, depth: u32) -> Result<PathSet, CatalogError> {
    trace(kind, depth).map(|t| execute(&t))
}

pub fn generate_unchecked(kind: FractalKind, depth: u32) -> PathSet {
    execute(&trace_unchecked(kind, depth))
}

#[derive(Default)]
struct Pen {
    cmds: Vec<TurtleCommand>,
}

impl Pen {
    fn mv(&mut self, d: f64) {
        self.cmds.push(TurtleCommand::Move(d));
    }
    fn turn(&mut self, deg: f64) {
        self.cmds.push(TurtleCommand::Turn(deg));
    }
    fn goto(&mut self, x: f64, y: f64) {
        self.cmds.push(TurtleCommand::Goto(x, y));
    }
    fn up(&mut self) {
        self.cmds.push(TurtleCommand::PenUp);
    }
    fn down(&mut self) {
        self.cmds.push(TurtleCommand::PenDown);
    }
    fn polygon(&mut self, n: usize, side: f64) {
        for _ in 0..n {
            self.mv(side);
            self.turn(360.0 / n as f64);
        }
    }
}

fn cantor_rows(pen: &mut Pen, x: f64, y: f64, len: f64, depth: u32) {
    pen.goto(x, y);
    pen.mv(len);
    if depth > 0 {
        let third = len / 3.0;
        cantor_rows(pen, x, y - CANTOR_Y_SPACING, third, depth - 1);
        cantor_rows(pen, x + 2.0 * third, y - CANTOR_Y_SPACING, third, depth - 1);
    }
}

const DUST_CELLS: [(u8, u8); 4] = [(0, 0), (2, 0), (0, 2), (2, 2)];
const CARPET_CELLS: [(u8, u8); 8] = [
    (0, 0),
    (1, 0),
    (2, 0),
    (0, 1),
    (2, 1),
    (0, 2),
    (1, 2),
    (2, 2),
];

fn grid_squares(pen: &mut Pen, x: f64, y: f64, side: f64, depth: u32, cells: &[(u8, u8)]) {
    if depth == 0 {
        pen.goto(x, y);
        pen.polygon(4, side);
        return;
    }
    let s = side / 3.0;
    for &(i, j) in cells {
        grid_squares(
            pen,
            x + f64::from(i) * s,
            y + f64::from(j) * s,
            s,
            depth - 1,
            cells,
        );
    }
}

fn koch(pen: &mut Pen, len: f64, depth: u32) {
    if depth == 0 {
        pen.mv(len);
        return;
    }
    let l = len / 3.0;
    koch(pen, l, depth - 1);
    pen.turn(60.0);
    koch(pen, l, depth - 1);
    pen.turn(-120.0);
    koch(pen, l, depth - 1);
    pen.turn(60.0);
    koch(pen, l, depth - 1);
}

enum Base {
    Outline,
    Spokes,
}

/// Draws `n^depth` copies of the base figure, each contracted toward a
/// polygon corner. Starts at a vertex heading along the first edge and
/// returns there with the heading unchanged (mod 360).
fn corner_copies(pen: &mut Pen, n: usize, side: f64, r: f64, depth: u32, base: &Base) {
    let exterior = 360.0 / n as f64;
    if depth == 0 {
        match base {
            Base::Outline => pen.polygon(n, side),
            Base::Spokes => spokes(pen, n, side),
        }
        return;
    }
    for _ in 0..n {
        corner_copies(pen, n, side * r, r, depth - 1, base);
        pen.up();
        pen.mv(side);
        pen.down();
        pen.turn(exterior);
    }
}

/// Segments from the polygon's center to each vertex.
fn spokes(pen: &mut Pen, n: usize, side: f64) {
    let exterior = 360.0 / n as f64;
    let half_interior = 90.0 - exterior / 2.0;
    let radius = side / (2.0 * (180.0 / n as f64).to_radians().sin());
    pen.up();
    pen.turn(half_interior);
    pen.mv(radius);
    pen.turn(180.0);
    for _ in 0..n {
        pen.down();
        pen.mv(radius);
        pen.up();
        pen.mv(-radius);
        pen.turn(exterior);
    }
    pen.mv(radius);
    pen.turn(-(half_interior + 180.0));
    pen.down();
}

fn heighway(pen: &mut Pen, len: f64, depth: u32, sign: f64) {
    if depth == 0 {
        pen.mv(len);
        return;
    }
    let l = len * FRAC_1_SQRT_2;
    pen.turn(45.0 * sign);
    heighway(pen, l, depth - 1, 1.0);
    pen.turn(-90.0 * sign);
    heighway(pen, l, depth - 1, -1.0);
    pen.turn(45.0 * sign);
}

fn levy(pen: &mut Pen, len: f64, depth: u32) {
    if depth == 0 {
        pen.mv(len);
        return;
    }
    let l = len * FRAC_1_SQRT_2;
    pen.turn(45.0);
    levy(pen, l, depth - 1);
    pen.turn(-90.0);
    levy(pen, l, depth - 1);
    pen.turn(45.0);
}

/// Square on the current edge, then two children on its top edge. Starts
/// and ends at the bottom-left corner with the original heading.
fn pythagoras(pen: &mut Pen, side: f64, depth: u32) {
    pen.down();
    pen.polygon(4, side);
    if depth == 0 {
        return;
    }
    let child = side * FRAC_1_SQRT_2;
    pen.up();
    pen.turn(90.0);
    pen.mv(side);
    pen.turn(-90.0);
    // Top-left corner; left child leans counterclockwise.
    pen.turn(45.0);
    pythagoras(pen, child, depth - 1);
    pen.up();
    pen.mv(child);
    pen.turn(-90.0);
    // Apex; right child ends at the top-right corner.
    pythagoras(pen, child, depth - 1);
    pen.up();
    pen.mv(child);
    pen.turn(45.0);
    pen.turn(180.0);
    pen.mv(side);
    pen.turn(90.0);
    pen.mv(side);
    pen.turn(90.0);
    pen.down();
}

fn binary_tree(pen: &mut Pen, len: f64, depth: u32) {
    pen.mv(len);
    if depth > 0 {
        let child = len * TREE_RATIO;
        pen.turn(TREE_ANGLE_DEG);
        binary_tree(pen, child, depth - 1);
        pen.turn(-2.0 * TREE_ANGLE_DEG);
        binary_tree(pen, child, depth - 1);
        pen.turn(TREE_ANGLE_DEG);
    }
    pen.up();
    pen.mv(-len);
    pen.down();
}
