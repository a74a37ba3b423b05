//! The benchmark loop: candidate -> trace -> render -> mask -> score.
//!
//! Every item gets an artifact directory `<output_dir>/<item id>/` holding
//! whatever stages it reached (`candidate.txt`, `trace.txt`, `render.png`,
//! `mask.json`, plus provider/executor audit files). Records are appended to
//! `<output_dir>/records.jsonl` as items finish, which is what makes runs
//! resumable.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ifsbench_core::eval::{complexity_loc, iou, EvalRecord, Status};
use ifsbench_core::raster::{
    read_png, render, to_mask, write_png, BinaryMask, Image, RenderConfig,
};
use ifsbench_core::{execute, parse_trace};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunManifest};
use crate::corpus::{load_manifest, CorpusError, CorpusItem};
use crate::executor::{self, extract_code_block, ExecOutcome, Executor};
use crate::provider::{self, Candidate, CandidateProvider, Request};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const CANDIDATE_FILE: &str = "candidate.txt";
pub const TRACE_FILE: &str = "trace.txt";
pub const RENDER_FILE: &str = "render.png";
pub const MASK_FILE: &str = "mask.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Successful scoring of one trace.
#[derive(Debug, Clone)]
pub struct Scored {
    pub iou: f64,
    pub image: Image,
    pub popcount: u64,
}

/// Parses, executes, renders and scores a trace against a ground-truth
/// mask. Failures carry the status they map to.
pub fn score_trace(
    bytes: &[u8],
    source_id: &str,
    truth: &BinaryMask,
    cfg: &RenderConfig,
) -> Result<Scored, (Status, String)> {
    let trace = parse_trace(bytes, source_id).map_err(|e| (Status::SyntaxError, e.to_string()))?;
    let paths = execute(&trace);
    if !paths.is_finite() {
        return Err((Status::RuntimeError, "coordinates overflowed".into()));
    }
    if paths.is_empty() {
        return Err((Status::EmptyOutput, "trace drew nothing".into()));
    }
    let image = render(&paths, cfg);
    let mask = to_mask(&image, cfg).map_err(|e| (Status::RuntimeError, e.to_string()))?;
    let score = iou(&mask, truth).map_err(|e| (Status::RuntimeError, e.to_string()))?;
    Ok(Scored {
        iou: score,
        image,
        popcount: mask.popcount(),
    })
}

#[derive(Serialize)]
struct MaskStats {
    candidate_popcount: u64,
    ground_truth_popcount: u64,
    iou: f64,
    threshold: f64,
}

struct Context<'a> {
    manifest: &'a RunManifest,
    provider: &'a dyn CandidateProvider,
    executor: &'a dyn Executor,
}

impl Context<'_> {
    fn base_record(&self, item: &CorpusItem) -> EvalRecord {
        let mut rec = EvalRecord::new(item.id.clone());
        rec.model = self.manifest.model.clone();
        rec.prompt = self.manifest.prompt.to_string();
        rec.color = item.color.to_string();
        rec.fractal = item.fractal.to_string();
        rec.depth = item.depth;
        rec
    }

    fn evaluate(&self, item: &CorpusItem) -> Result<EvalRecord, RunError> {
        let m = self.manifest;
        let dir = m.output_dir.join(&item.id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let write = |name: &str, bytes: &[u8]| -> Result<(), RunError> {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))
        };
        let rec = self.base_record(item);
        let image_path = item.path_in(&m.corpus_root);

        let req = Request {
            item,
            image_path: &image_path,
            prompt: m.prompt.text(),
            audit_dir: &dir,
        };
        let source = match self.provider.fetch(&req) {
            Err(e) => return Ok(rec.failed(Status::ProviderFailure, e.to_string())),
            Ok(Candidate::Refusal(why)) => {
                write(CANDIDATE_FILE, why.as_bytes())?;
                return Ok(rec.failed(Status::SyntaxError, format!("refusal: {why}")));
            }
            Ok(Candidate::Source(src)) => src,
        };
        write(CANDIDATE_FILE, source.as_bytes())?;
        let mut rec = rec;
        rec.complexity_loc = Some(complexity_loc(extract_code_block(&source)));

        let outcome = match self.executor.run(&source, &dir, m.timeout()) {
            Ok(o) => o,
            Err(e) => return Ok(rec.failed(Status::RuntimeError, format!("executor: {e}"))),
        };
        let bytes = match outcome {
            ExecOutcome::Trace(bytes) => bytes,
            ExecOutcome::Timeout => {
                return Ok(rec.failed(Status::Timeout, format!("exceeded {} s", m.timeout_s)))
            }
            ExecOutcome::SyntaxError(msg) => return Ok(rec.failed(Status::SyntaxError, msg)),
            ExecOutcome::RuntimeError(msg) => return Ok(rec.failed(Status::RuntimeError, msg)),
        };
        write(TRACE_FILE, &bytes)?;

        let cfg = RenderConfig::with_color(item.color);
        let truth = load_truth(&image_path, &cfg)?;
        match score_trace(&bytes, &item.id, &truth, &cfg) {
            Err((status, msg)) => Ok(rec.failed(status, msg)),
            Ok(scored) => {
                let png = write_png(&scored.image, cfg.dpi).map_err(|e| RunError::Io {
                    path: dir.join(RENDER_FILE),
                    message: e.to_string(),
                })?;
                write(RENDER_FILE, &png)?;
                let stats = MaskStats {
                    candidate_popcount: scored.popcount,
                    ground_truth_popcount: truth.popcount(),
                    iou: scored.iou,
                    threshold: m.threshold,
                };
                write(
                    MASK_FILE,
                    serde_json::to_string_pretty(&stats)
                        .expect("stats serialize")
                        .as_bytes(),
                )?;
                Ok(rec.scored(scored.iou, m.threshold))
            }
        }
    }
}

fn load_truth(path: &Path, cfg: &RenderConfig) -> Result<BinaryMask, RunError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let img = read_png(&bytes).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    to_mask(&img, cfg).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads previously written records, skipping a torn final line.
pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>, RunError> {
    let f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EvalRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}: skipping unreadable record: {e}", path.display()),
        }
    }
    Ok(out)
}

/// Cuts a partial last line (left by an interrupted run) so appended
/// records start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<(), RunError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(path)(e)),
    };
    if bytes.last().is_none_or(|&b| b == b'\n') {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!(
        "{}: dropping {} bytes of a torn record",
        path.display(),
        bytes.len() - keep
    );
    let f = fs::OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(io_err(path))?;
    f.set_len(keep as u64).map_err(io_err(path))
}

/// Runs the manifest's provider and executor over the corpus.
pub fn run_benchmark(manifest: &RunManifest) -> Result<Vec<EvalRecord>, RunError> {
    manifest.validate()?;
    let provider = provider::from_config(&manifest.provider);
    let executor = executor::from_config(&manifest.executor);
    let items = load_manifest(&manifest.corpus_root)?;
    run_items(manifest, &items, provider.as_ref(), executor.as_ref())
}

/// Like [`run_benchmark`] with explicit items, provider and executor.
pub fn run_items(
    manifest: &RunManifest,
    items: &[CorpusItem],
    provider: &dyn CandidateProvider,
    executor: &dyn Executor,
) -> Result<Vec<EvalRecord>, RunError> {
    manifest.validate()?;
    let items: Vec<&CorpusItem> = items
        .iter()
        .filter(|i| {
            manifest
                .colors
                .as_ref()
                .is_none_or(|c| c.contains(&i.color))
        })
        .collect();
    for item in &items {
        let p = item.path_in(&manifest.corpus_root);
        if !p.is_file() {
            return Err(RunError::Io {
                path: p,
                message: "ground-truth image missing; build the corpus first".into(),
            });
        }
    }

    let out = &manifest.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let manifest_path = out.join(RUN_MANIFEST_FILE);
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(manifest).expect("manifest serializes"),
    )
    .map_err(io_err(&manifest_path))?;

    let records_path = out.join(RECORDS_FILE);
    let mut done: HashMap<String, EvalRecord> = load_records(&records_path)?
        .into_iter()
        .map(|r| (r.image_id.clone(), r))
        .collect();
    let todo: Vec<&CorpusItem> = items
        .iter()
        .copied()
        .filter(|i| !done.contains_key(&i.id))
        .collect();
    log::info!(
        "{} items, {} already recorded, {} to run",
        items.len(),
        items.len() - todo.len(),
        todo.len()
    );

    drop_torn_tail(&records_path)?;
    let sink = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&records_path)
        .map_err(io_err(&records_path))?;
    let sink = Mutex::new(sink);
    let ctx = Context {
        manifest,
        provider,
        executor,
    };
    let job = |item: &&CorpusItem| -> Result<EvalRecord, RunError> {
        let rec = ctx.evaluate(item)?;
        let line = serde_json::to_string(&rec).expect("record serializes");
        let mut f = sink.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(f, "{line}").map_err(io_err(&records_path))?;
        log::debug!("{} -> {}", rec.image_id, rec.status.as_str());
        Ok(rec)
    };
    let fresh = run_pool(manifest.workers, &todo, job)?;

    for rec in fresh {
        done.insert(rec.image_id.clone(), rec);
    }
    let mut seen = HashSet::new();
    Ok(items
        .iter()
        .filter(|i| seen.insert(i.id.as_str()))
        .filter_map(|i| done.remove(&i.id))
        .collect())
}

#[cfg(feature = "parallel")]
fn run_pool<T, F>(workers: usize, items: &[T], job: F) -> Result<Vec<EvalRecord>, RunError>
where
    T: Sync,
    F: Fn(&T) -> Result<EvalRecord, RunError> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| items.par_iter().map(job).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_pool<T, F>(_workers: usize, items: &[T], job: F) -> Result<Vec<EvalRecord>, RunError>
where
    F: Fn(&T) -> Result<EvalRecord, RunError>,
{
    items.iter().map(job).collect()
}
