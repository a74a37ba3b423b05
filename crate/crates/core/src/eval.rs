//! Scoring and statistics: mask IoU, correctness threshold, Run%/Acc%/
//! Overall% aggregation, rollups, code-length metric and pairwise tests.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::raster::BinaryMask;

pub const DEFAULT_THRESHOLD: f64 = 0.95;

/// Word count above which the rayon path is worth its scheduling overhead.
#[cfg(feature = "parallel")]
const PAR_MIN_WORDS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimension(u32, u32, u32, u32),
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<(), EvalError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(EvalError::Dimension(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

pub fn intersection_count_sequential(a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| u64::from((x & y).count_ones()))
        .sum()
}

#[cfg(feature = "parallel")]
pub fn intersection_count_parallel(a: &[u64], b: &[u64]) -> u64 {
    use rayon::prelude::*;
    a.par_chunks(1024)
        .zip(b.par_chunks(1024))
        .map(|(x, y)| intersection_count_sequential(x, y))
        .sum()
}

fn intersection_count(a: &[u64], b: &[u64]) -> u64 {
    #[cfg(feature = "parallel")]
    if a.len() >= PAR_MIN_WORDS {
        return intersection_count_parallel(a, b);
    }
    intersection_count_sequential(a, b)
}

fn ratio(inter: u64, a: u64, b: u64) -> f64 {
    let union = a + b - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// `|a ∩ b| / |a ∪ b|`; two empty masks score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, EvalError> {
    check_dims(a, b)?;
    let inter = intersection_count(a.words(), b.words());
    Ok(ratio(inter, a.popcount(), b.popcount()))
}

/// [`iou`] forced onto the single-threaded word loop.
pub fn iou_sequential(a: &BinaryMask, b: &BinaryMask) -> Result<f64, EvalError> {
    check_dims(a, b)?;
    let inter = intersection_count_sequential(a.words(), b.words());
    Ok(ratio(inter, a.popcount(), b.popcount()))
}

/// Inclusive: a score exactly at the threshold counts as correct.
pub fn classify(iou: f64, threshold: f64) -> bool {
    iou >= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ok,
    SyntaxError,
    RuntimeError,
    Timeout,
    EmptyOutput,
    /// The candidate could not be obtained (transport or schema failure).
    ProviderFailure,
}

impl Status {
    pub const ALL: [Status; 6] = [
        Status::Ok,
        Status::SyntaxError,
        Status::RuntimeError,
        Status::Timeout,
        Status::EmptyOutput,
        Status::ProviderFailure,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "OK",
            Status::SyntaxError => "SYNTAX_ERROR",
            Status::RuntimeError => "RUNTIME_ERROR",
            Status::Timeout => "TIMEOUT",
            Status::EmptyOutput => "EMPTY_OUTPUT",
            Status::ProviderFailure => "PROVIDER_FAILURE",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one candidate. `iou` is present iff `status == Ok`, and
/// `correct` implies both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub color: String,
    #[serde(default)]
    pub fractal: String,
    #[serde(default)]
    pub depth: u32,
    pub status: Status,
    pub iou: Option<f64>,
    pub correct: bool,
    pub complexity_loc: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl EvalRecord {
    pub fn new(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            model: String::new(),
            prompt: String::new(),
            color: String::new(),
            fractal: String::new(),
            depth: 0,
            status: Status::EmptyOutput,
            iou: None,
            correct: false,
            complexity_loc: None,
            detail: None,
        }
    }

    pub fn scored(mut self, iou: f64, threshold: f64) -> Self {
        self.status = Status::Ok;
        self.iou = Some(iou);
        self.correct = classify(iou, threshold);
        self
    }

    pub fn failed(mut self, status: Status, detail: impl Into<String>) -> Self {
        debug_assert_ne!(status, Status::Ok);
        self.status = status;
        self.iou = None;
        self.correct = false;
        self.detail = Some(detail.into());
        self
    }

    pub fn is_consistent(&self) -> bool {
        (self.status == Status::Ok) == self.iou.is_some()
            && (!self.correct || self.status == Status::Ok)
    }
}

/// A count ratio expressed in percent, rounded half-up to one decimal in
/// exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Percent {
    pub num: u64,
    pub den: u64,
}

impl Percent {
    /// Zero denominators yield 0%.
    pub const fn of(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            100.0 * self.num as f64 / self.den as f64
        }
    }

    /// Tenths of a percent, half-up.
    pub fn tenths(&self) -> u64 {
        if self.den == 0 {
            return 0;
        }
        (self.num * 2000 + self.den) / (2 * self.den)
    }

    pub fn rounded(&self) -> f64 {
        self.tenths() as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        write!(f, "{}.{}%", t / 10, t % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Model,
    Prompt,
    Color,
    Fractal,
    Depth,
}

impl GroupKey {
    pub const fn header(self) -> &'static str {
        match self {
            GroupKey::Model => "Model",
            GroupKey::Prompt => "Prompt Type",
            GroupKey::Color => "Color",
            GroupKey::Fractal => "Fractal Type",
            GroupKey::Depth => "Depth",
        }
    }

    fn value(self, r: &EvalRecord) -> KeyValue {
        match self {
            GroupKey::Model => KeyValue::Text(r.model.clone()),
            GroupKey::Prompt => KeyValue::Text(r.prompt.clone()),
            GroupKey::Color => KeyValue::Text(r.color.clone()),
            GroupKey::Fractal => KeyValue::Text(r.fractal.clone()),
            GroupKey::Depth => KeyValue::Int(r.depth),
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(GroupKey::Model),
            "prompt" => Ok(GroupKey::Prompt),
            "color" => Ok(GroupKey::Color),
            "fractal" => Ok(GroupKey::Fractal),
            "depth" => Ok(GroupKey::Depth),
            other => Err(format!("unknown group key `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyValue {
    Int(u32),
    Text(String),
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Int(v) => write!(f, "{v}"),
            KeyValue::Text(s) => f.write_str(s),
        }
    }
}

/// Summary statistics of the IoU scores in a group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IouSummary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1); 0 for a single score.
    pub std: f64,
}

impl IouSummary {
    pub fn of(scores: &[f64]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let std = if scores.len() > 1 {
            (scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, median, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub keys: Vec<(GroupKey, KeyValue)>,
    pub total: u64,
    pub runnable: u64,
    pub correct: u64,
    pub iou: Option<IouSummary>,
}

impl AggregateRow {
    pub fn run_pct(&self) -> Percent {
        Percent::of(self.runnable, self.total)
    }

    pub fn acc_pct(&self) -> Percent {
        Percent::of(self.correct, self.runnable)
    }

    pub fn overall_pct(&self) -> Percent {
        Percent::of(self.correct, self.total)
    }

    pub fn key(&self, k: GroupKey) -> Option<&KeyValue> {
        self.keys.iter().find(|(g, _)| *g == k).map(|(_, v)| v)
    }
}

#[derive(Default)]
struct Tally {
    total: u64,
    runnable: u64,
    correct: u64,
    scores: Vec<f64>,
}

impl Tally {
    fn add(&mut self, r: &EvalRecord) {
        self.total += 1;
        if r.status == Status::Ok {
            self.runnable += 1;
            if let Some(s) = r.iou {
                self.scores.push(s);
            }
        }
        if r.correct {
            self.correct += 1;
        }
    }
}

/// Groups records by `group_by` (empty = one overall row), rows sorted by
/// key values.
pub fn aggregate(records: &[EvalRecord], group_by: &[GroupKey]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<Vec<KeyValue>, Tally> = BTreeMap::new();
    for r in records {
        let key: Vec<KeyValue> = group_by.iter().map(|g| g.value(r)).collect();
        groups.entry(key).or_default().add(r);
    }
    groups
        .into_iter()
        .map(|(key, t)| AggregateRow {
            keys: group_by.iter().copied().zip(key).collect(),
            total: t.total,
            runnable: t.runnable,
            correct: t.correct,
            iou: IouSummary::of(&t.scores),
        })
        .collect()
}

/// One line of a per-fractal / per-color / per-model breakdown over
/// runnable records: `total` counts runnable items, accuracy is
/// `correct / total`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollupRow {
    pub label: String,
    pub total: u64,
    pub correct: u64,
    pub iou: Option<IouSummary>,
}

impl RollupRow {
    pub fn accuracy(&self) -> Percent {
        Percent::of(self.correct, self.total)
    }
}

/// Rollup by one key, sorted by accuracy (descending), then label.
pub fn rollup(records: &[EvalRecord], key: GroupKey) -> Vec<RollupRow> {
    let runnable: Vec<EvalRecord> = records
        .iter()
        .filter(|r| r.status == Status::Ok)
        .cloned()
        .collect();
    let mut rows: Vec<RollupRow> = aggregate(&runnable, &[key])
        .into_iter()
        .map(|row| RollupRow {
            label: row.keys[0].1.to_string(),
            total: row.total,
            correct: row.correct,
            iou: row.iou,
        })
        .collect();
    rows.sort_by(|a, b| {
        // Compare correct_a / total_a against correct_b / total_b exactly.
        let lhs = u128::from(b.correct) * u128::from(a.total.max(1));
        let rhs = u128::from(a.correct) * u128::from(b.total.max(1));
        lhs.cmp(&rhs).then_with(|| a.label.cmp(&b.label))
    });
    rows
}

/// Non-blank lines whose first non-blank character is not `#`. Inline
/// trailing comments do not exclude a line.
pub fn complexity_loc(source: &str) -> u64 {
    source
        .lines()
        .map(str::trim_start)
        .filter(|l| !l.trim_end().is_empty() && !l.starts_with('#'))
        .count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseStats {
    /// Mann-Whitney U of the first sample.
    pub u_statistic: f64,
    pub z: f64,
    /// Two-sided p-value, normal approximation with tie and continuity
    /// correction.
    pub u_pvalue: f64,
    pub cohens_d: f64,
    /// Set when the pooled standard deviation is zero (or undefined); the
    /// effect size is then reported as 0.
    pub degenerate: bool,
}

fn check_sample(xs: &[f64]) -> Result<(), EvalError> {
    if xs.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test and Cohen's d of `xs` against `ys`.
pub fn pairwise_stats(xs: &[f64], ys: &[f64]) -> Result<PairwiseStats, EvalError> {
    check_sample(xs)?;
    check_sample(ys)?;
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let n = n1 + n2;

    let mut pooled: Vec<(f64, bool)> = xs
        .iter()
        .map(|&v| (v, true))
        .chain(ys.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        rank_sum_x += avg * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }

    let u1 = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
    let mean_u = n1 * n2 / 2.0;
    let var_u = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let (z, p) = if var_u > 0.0 && n > 1.0 {
        let u = u1.max(n1 * n2 - u1);
        let z = (u - mean_u - 0.5) / var_u.sqrt();
        let normal = Normal::standard();
        (z, (2.0 * normal.sf(z)).min(1.0))
    } else {
        (0.0, 1.0)
    };

    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let ss = |s: &[f64], m: f64| s.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let (mx, my) = (mean(xs), mean(ys));
    let dof = n - 2.0;
    let pooled_std = if dof > 0.0 {
        ((ss(xs, mx) + ss(ys, my)) / dof).sqrt()
    } else {
        0.0
    };
    let degenerate = pooled_std == 0.0;
    let cohens_d = if degenerate {
        0.0
    } else {
        (mx - my) / pooled_std
    };

    Ok(PairwiseStats {
        u_statistic: u1,
        z,
        u_pvalue: p,
        cohens_d,
        degenerate,
    })
}
