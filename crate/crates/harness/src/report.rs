//! CSV and Markdown reports over evaluation records.
//!
//! * `summary`: grouped Runnable / Run% / Correct / Acc% / Overall% with an
//!   overall total row
//! * `fractals`: per-fractal rollup (Total, Correct, Accuracy, Mean IoU, Std Dev)
//! * `colors`, `models`: rollups with Mean and Median IoU
//! * `stats`: pairwise Mann-Whitney U / Cohen's d between models

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use ifsbench_core::catalog::FractalKind;
use ifsbench_core::eval::{
    aggregate, pairwise_stats, rollup, AggregateRow, EvalRecord, GroupKey, KeyValue, RollupRow,
    Status,
};
use thiserror::Error;

use crate::prompts::PromptId;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// A rendered table: header plus string cells. `numeric` marks right-aligned
/// columns in Markdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub numeric: Vec<bool>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[(&str, bool)]) -> Self {
        Self {
            headers: headers.iter().map(|(h, _)| h.to_string()).collect(),
            numeric: headers.iter().map(|&(_, n)| n).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| {} |\n|", self.headers.join(" | "));
        for &n in &self.numeric {
            out.push_str(if n { "---:|" } else { "---|" });
        }
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&self.numeric)
                .map(|(c, &n)| if n { group_thousands(c) } else { c.clone() })
                .collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `1114` -> `1,114`; leaves non-integers alone.
fn group_thousands(cell: &str) -> String {
    if cell.is_empty() || !cell.bytes().all(|b| b.is_ascii_digit()) {
        return cell.to_string();
    }
    let mut out = String::new();
    for (i, ch) in cell.chars().enumerate() {
        if i > 0 && (cell.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn label(key: GroupKey, value: &KeyValue) -> String {
    let text = value.to_string();
    match key {
        GroupKey::Fractal => text
            .parse::<FractalKind>()
            .map_or(text, |k| k.display_name().to_string()),
        GroupKey::Color => capitalize(&text),
        _ => text,
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Display order: prompts in strategy order, fractals in catalog order,
/// everything else case-insensitively.
fn key_order(key: GroupKey, a: &KeyValue, b: &KeyValue) -> Ordering {
    let rank = |v: &KeyValue| -> Option<usize> {
        let s = v.to_string();
        match key {
            GroupKey::Prompt => s.parse::<PromptId>().ok().map(|p| p as usize),
            GroupKey::Fractal => s.parse::<FractalKind>().ok().map(|k| k as usize),
            _ => None,
        }
    };
    match (rank(a), rank(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => match (a, b) {
            (KeyValue::Text(x), KeyValue::Text(y)) => x
                .to_lowercase()
                .cmp(&y.to_lowercase())
                .then_with(|| x.cmp(y)),
            _ => a.cmp(b),
        },
    }
}

fn sort_rows(rows: &mut [AggregateRow], group_by: &[GroupKey]) {
    rows.sort_by(|a, b| {
        group_by
            .iter()
            .filter_map(|&k| Some(key_order(k, a.key(k)?, b.key(k)?)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
}

fn counts(row: &AggregateRow) -> Vec<String> {
    vec![
        row.runnable.to_string(),
        row.run_pct().to_string(),
        row.correct.to_string(),
        row.acc_pct().to_string(),
        row.overall_pct().to_string(),
    ]
}

/// Grouped overview with an overall total row.
pub fn summary_table(records: &[EvalRecord], group_by: &[GroupKey]) -> Table {
    let mut headers: Vec<(&str, bool)> = group_by.iter().map(|k| (k.header(), false)).collect();
    headers.extend([
        ("Runnable", true),
        ("Run%", true),
        ("Correct", true),
        ("Acc%", true),
        ("Overall%", true),
    ]);
    let mut table = Table::new(&headers);
    if records.is_empty() {
        return table;
    }
    if !group_by.is_empty() {
        let mut rows = aggregate(records, group_by);
        sort_rows(&mut rows, group_by);
        for row in &rows {
            let mut cells: Vec<String> = row.keys.iter().map(|(k, v)| label(*k, v)).collect();
            cells.extend(counts(row));
            table.rows.push(cells);
        }
    }
    let total = &aggregate(records, &[])[0];
    // Without grouping columns the total row needs no label.
    let mut cells: Vec<String> = if group_by.is_empty() {
        Vec::new()
    } else {
        let mut c = vec!["Overall Total".to_string()];
        c.extend(std::iter::repeat_n(String::new(), group_by.len() - 1));
        c
    };
    cells.extend(counts(total));
    table.rows.push(cells);
    table
}

fn rollup_rows(records: &[EvalRecord], key: GroupKey) -> Vec<RollupRow> {
    rollup(records, key)
}

/// Per-fractal accuracy over runnable records, most accurate first.
pub fn fractal_table(records: &[EvalRecord]) -> Table {
    let mut table = Table::new(&[
        ("Fractal Type", false),
        ("Total", true),
        ("Correct", true),
        ("Accuracy", true),
        ("Mean IoU", true),
        ("Std Dev", true),
    ]);
    for row in rollup_rows(records, GroupKey::Fractal) {
        table.rows.push(vec![
            label(GroupKey::Fractal, &KeyValue::Text(row.label.clone())),
            row.total.to_string(),
            row.correct.to_string(),
            row.accuracy().to_string(),
            fmt_score(row.iou.map(|s| s.mean)),
            fmt_score(row.iou.map(|s| s.std)),
        ]);
    }
    table
}

fn mean_median_table(records: &[EvalRecord], key: GroupKey) -> Table {
    let mut table = Table::new(&[
        (key.header(), false),
        ("Total", true),
        ("Correct", true),
        ("Accuracy", true),
        ("Mean IoU", true),
        ("Median IoU", true),
    ]);
    for row in rollup_rows(records, key) {
        table.rows.push(vec![
            label(key, &KeyValue::Text(row.label.clone())),
            row.total.to_string(),
            row.correct.to_string(),
            row.accuracy().to_string(),
            fmt_score(row.iou.map(|s| s.mean)),
            fmt_score(row.iou.map(|s| s.median)),
        ]);
    }
    table
}

pub fn color_table(records: &[EvalRecord]) -> Table {
    mean_median_table(records, GroupKey::Color)
}

pub fn model_table(records: &[EvalRecord]) -> Table {
    mean_median_table(records, GroupKey::Model)
}

/// Pairwise comparison of IoU distributions (runnable records) between
/// every pair of models.
pub fn stats_table(records: &[EvalRecord]) -> Table {
    let mut table = Table::new(&[
        ("Model A", false),
        ("Model B", false),
        ("n A", true),
        ("n B", true),
        ("Mean A", true),
        ("Mean B", true),
        ("U", true),
        ("p-value", true),
        ("Cohen's d", true),
    ]);
    let mut models: Vec<&str> = records.iter().map(|r| r.model.as_str()).collect();
    models.sort_by_key(|m| m.to_lowercase());
    models.dedup();
    let scores = |m: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.model == m && r.status == Status::Ok)
            .filter_map(|r| r.iou)
            .collect()
    };
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            let (xs, ys) = (scores(a), scores(b));
            let Ok(s) = pairwise_stats(&xs, &ys) else {
                continue;
            };
            let d = if s.degenerate {
                "n/a".to_string()
            } else {
                format!("{:.3}", s.cohens_d)
            };
            table.rows.push(vec![
                a.to_string(),
                b.to_string(),
                xs.len().to_string(),
                ys.len().to_string(),
                format!("{:.3}", mean(&xs)),
                format!("{:.3}", mean(&ys)),
                format!("{}", s.u_statistic),
                format!("{:.3e}", s.u_pvalue),
                d,
            ]);
        }
    }
    table
}

/// Writes `<name>.csv` and `<name>.md` for every report into `out_dir`.
pub fn write_reports(
    records: &[EvalRecord],
    group_by: &[GroupKey],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let tables = [
        ("summary", summary_table(records, group_by)),
        ("fractals", fractal_table(records)),
        ("colors", color_table(records)),
        ("models", model_table(records)),
        ("stats", stats_table(records)),
    ];
    let mut written = Vec::new();
    for (name, table) in tables {
        let csv_path = out_dir.join(format!("{name}.csv"));
        let csv = table.to_csv().map_err(|source| ReportError::Csv {
            path: csv_path.clone(),
            source,
        })?;
        for (path, text) in [
            (csv_path, csv),
            (out_dir.join(format!("{name}.md")), table.to_markdown()),
        ] {
            fs::write(&path, text).map_err(|source| ReportError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands_grouping() {
        assert_eq!(group_thousands("1114"), "1,114");
        assert_eq!(group_thousands("100"), "100");
        assert_eq!(group_thousands("1234567"), "1,234,567");
        assert_eq!(group_thousands("76.1%"), "76.1%");
    }

    #[test]
    fn empty_records_give_headers_only() {
        let t = summary_table(&[], &[GroupKey::Prompt, GroupKey::Model]);
        assert!(t.rows.is_empty());
        assert_eq!(
            t.to_csv().unwrap(),
            "Prompt Type,Model,Runnable,Run%,Correct,Acc%,Overall%\n"
        );
        assert_eq!(fractal_table(&[]).rows.len(), 0);
    }

    #[test]
    fn labels() {
        assert_eq!(
            label(GroupKey::Fractal, &KeyValue::Text("koch_snowflake".into())),
            "Koch Snowflake"
        );
        assert_eq!(
            label(GroupKey::Color, &KeyValue::Text("blue".into())),
            "Blue"
        );
    }
}
