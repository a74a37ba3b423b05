//! Fixtures shared by the harness integration tests and the acceptance
//! target.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use ifsbench::corpus::{build_corpus, CorpusItem, CorpusPlan};
use ifsbench_core::catalog::{trace_unchecked, FractalKind};
use ifsbench_core::eval::{EvalRecord, Status};
use ifsbench_core::raster::LineColor;
use ifsbench_core::serialize_trace;

/// Published per-condition outcome counts on the black corpus (122 images
/// per condition): prompt, model, runnable, correct, then the printed
/// Run%, Acc% and Overall% strings.
pub const TAB1: [(&str, &str, u64, u64, &str, &str, &str); 12] = [
    ("DCG", "Claude 3.7 Sonnet", 100, 9, "82.0%", "9.0%", "7.4%"),
    ("DCG", "Gemini 2.5 Flash", 29, 14, "23.8%", "48.3%", "11.5%"),
    ("DCG", "GPT-4o", 115, 11, "94.3%", "9.6%", "9.0%"),
    ("DCG", "Qwen 2.5-VL", 121, 4, "99.2%", "3.3%", "3.3%"),
    ("RTC", "Claude 3.7 Sonnet", 105, 3, "86.1%", "2.9%", "2.5%"),
    ("RTC", "Gemini 2.5 Flash", 38, 4, "31.1%", "10.5%", "3.3%"),
    ("RTC", "GPT-4o", 118, 2, "96.7%", "1.7%", "1.6%"),
    ("RTC", "Qwen 2.5-VL", 107, 6, "87.7%", "5.6%", "4.9%"),
    ("RSF", "Claude 3.7 Sonnet", 106, 4, "86.9%", "3.8%", "3.3%"),
    ("RSF", "Gemini 2.5 Flash", 35, 1, "28.7%", "2.9%", "0.8%"),
    ("RSF", "GPT-4o", 120, 3, "98.4%", "2.5%", "2.5%"),
    ("RSF", "Qwen 2.5-VL", 120, 0, "98.4%", "0.0%", "0.0%"),
];
pub const TAB1_PER_CONDITION: u64 = 122;
pub const TAB1_OVERALL: (&str, &str, &str, &str, &str) = ("1,114", "76.1%", "61", "5.5%", "4.2%");

/// Synthetic records with the given counts: `correct` scored 1.0, the rest
/// of `runnable` scored 0.0, the remainder failing at runtime.
pub fn condition_records(
    prompt: &str,
    model: &str,
    fractal: &str,
    total: u64,
    runnable: u64,
    correct: u64,
) -> Vec<EvalRecord> {
    (0..total)
        .map(|i| {
            let mut r = EvalRecord::new(format!("{prompt}/{model}/{i}"));
            r.prompt = prompt.into();
            r.model = model.into();
            r.color = "black".into();
            r.fractal = fractal.into();
            if i < correct {
                r.scored(1.0, 0.95)
            } else if i < runnable {
                r.scored(0.0, 0.95)
            } else {
                r.failed(Status::RuntimeError, "fixture")
            }
        })
        .collect()
}

pub fn tab1_records() -> Vec<EvalRecord> {
    TAB1.iter()
        .flat_map(|&(p, m, run, ok, ..)| {
            condition_records(p, m, "koch_curve", TAB1_PER_CONDITION, run, ok)
        })
        .collect()
}

pub fn build_black(root: &Path) -> Vec<CorpusItem> {
    build_corpus(root, &CorpusPlan::with_colors(&[LineColor::Black])).expect("corpus builds")
}

/// Writes `<dir>/<id>.trace` for every item: the item's own native trace,
/// or `substitute`'s at the same depth.
pub fn write_traces(dir: &Path, items: &[CorpusItem], substitute: Option<FractalKind>) {
    for item in items {
        let path = dir.join(format!("{}.trace", item.id));
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        let kind = substitute.unwrap_or(item.fractal);
        fs::write(&path, serialize_trace(&trace_unchecked(kind, item.depth))).unwrap();
    }
}
