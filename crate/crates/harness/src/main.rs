use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ifsbench::config::{
    load_config, ConfigFile, ExecutorConfig, ProviderConfig, RunManifest, RunSection,
};
use ifsbench::corpus::{build_corpus, CorpusPlan};
use ifsbench::pipeline::{load_records, run_benchmark, RECORDS_FILE};
use ifsbench::report::{summary_table, write_reports};
use ifsbench::PromptId;
use ifsbench_core::catalog::{manifest_json, FractalKind};
use ifsbench_core::eval::{EvalRecord, GroupKey, Status};
use ifsbench_core::raster::LineColor;

#[derive(Parser)]
#[command(name = "ifsbench", version, about = "Fractal reconstruction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render the ground-truth corpus.
    Build(BuildArgs),
    /// Run a provider over the corpus and score every candidate.
    Run(RunArgs),
    /// Score a directory of trace files against the corpus.
    Score(ScoreArgs),
    /// Write summary tables from a records file.
    Report(ReportArgs),
    /// Print the fractal catalog as JSON.
    Catalog,
}

#[derive(clap::Args)]
struct BuildArgs {
    /// TOML config; its [corpus] section is the starting point.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    root: Option<PathBuf>,
    /// Comma-separated colors (default: all five).
    #[arg(long, value_delimiter = ',')]
    colors: Option<Vec<LineColor>>,
    /// Depth override, e.g. `levy_dragon=0..17`. Repeatable.
    #[arg(long = "depth", value_parser = parse_depth)]
    depths: Vec<(FractalKind, (u32, u32))>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Native,
    TraceDir,
    Http,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    provider: Option<ProviderKind>,
    /// Directory of `<item id>.trace` files (trace-dir provider).
    #[arg(long)]
    traces: Option<PathBuf>,
    /// URL for the http provider.
    #[arg(long)]
    endpoint: Option<String>,
    /// Serve this fractal's trace instead of the right one (native provider).
    #[arg(long)]
    substitute: Option<FractalKind>,
    #[arg(long)]
    prompt: Option<PromptId>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    colors: Option<Vec<LineColor>>,
    /// Run candidates through this shim command (`{source}`, `{trace}` placeholders).
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    shim: Option<Vec<String>>,
}

#[derive(clap::Args)]
struct ScoreArgs {
    #[arg(long, default_value = "corpus")]
    corpus: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// One or more records.jsonl files (or run directories).
    #[arg(long, required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "prompt,model")]
    group_by: Vec<GroupKey>,
}

fn parse_depth(s: &str) -> Result<(FractalKind, (u32, u32)), String> {
    let (name, range) = s
        .split_once('=')
        .ok_or_else(|| format!("expected fractal=lo..hi, got `{s}`"))?;
    let kind: FractalKind = name.parse().map_err(|e| format!("{e}"))?;
    let (lo, hi) = range
        .split_once("..")
        .ok_or_else(|| format!("expected lo..hi, got `{range}`"))?;
    let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}"));
    Ok((kind, (num(lo)?, num(hi)?)))
}

fn load(config: &Option<PathBuf>) -> Result<ConfigFile> {
    match config {
        Some(p) => Ok(load_config(p)?),
        None => Ok(ConfigFile::default()),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let cfg = load(&args.config)?;
    let mut plan: CorpusPlan = cfg.corpus.plan();
    if let Some(colors) = args.colors {
        plan.colors = colors;
    }
    plan.depths.extend(args.depths);
    let root = args.root.unwrap_or(cfg.corpus.root);
    let start = Instant::now();
    let items = build_corpus(&root, &plan)?;
    println!(
        "wrote {} images to {} in {:.1} s",
        items.len(),
        root.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn manifest_for(args: RunArgs) -> Result<RunManifest> {
    let cfg = load(&args.config)?;
    let provider = match args.provider {
        None => cfg.run.as_ref().and_then(|r| r.provider.clone()),
        Some(ProviderKind::Native) => Some(ProviderConfig::Native {
            substitute: args.substitute,
        }),
        Some(ProviderKind::TraceDir) => Some(ProviderConfig::TraceDir {
            dir: args
                .traces
                .clone()
                .context("--traces is required for trace-dir")?,
            extension: "trace".into(),
        }),
        Some(ProviderKind::Http) => Some(ProviderConfig::Http {
            endpoint: args
                .endpoint
                .clone()
                .context("--endpoint is required for http")?,
            attempts: 3,
            backoff_ms: 500,
            request_timeout_s: 120.0,
        }),
    };
    let Some(provider) = provider else {
        bail!("no provider: pass --provider or a config with [run.provider]");
    };
    let run = cfg.run.clone().unwrap_or_default();
    let mut file = cfg.clone();
    file.run = Some(RunSection {
        output_dir: args.output.or(run.output_dir),
        prompt: args.prompt.or(run.prompt),
        model: args.model.or(run.model),
        timeout_s: args.timeout.or(run.timeout_s),
        threshold: args.threshold.or(run.threshold),
        workers: args.workers.or(run.workers),
        colors: args.colors.or(run.colors),
        provider: Some(provider),
        executor: match args.shim {
            Some(command) => ExecutorConfig::Shim { command },
            None => run.executor,
        },
    });
    if let Some(c) = args.corpus {
        file.corpus.root = c;
    }
    Ok(RunManifest::from_config(&file)?)
}

fn print_summary(records: &[EvalRecord]) {
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for r in records {
        *counts.entry(r.status.as_str()).or_default() += 1;
    }
    for (status, n) in &counts {
        println!("{status:>18}  {n}");
    }
    let t = summary_table(records, &[]);
    print!("{}", t.to_markdown());
}

fn run(args: RunArgs) -> Result<()> {
    let manifest = manifest_for(args)?;
    let records = run_benchmark(&manifest)?;
    println!(
        "{} records in {}",
        records.len(),
        manifest.output_dir.join(RECORDS_FILE).display()
    );
    print_summary(&records);
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let provider = ProviderConfig::TraceDir {
        dir: args.traces,
        extension: "trace".into(),
    };
    let mut m = RunManifest::new(&args.corpus, &args.output, provider);
    if let Some(t) = args.threshold {
        m.threshold = t;
    }
    if let Some(model) = args.model {
        m.model = model;
    }
    if let Some(w) = args.workers {
        m.workers = w;
    }
    let records = run_benchmark(&m)?;
    print_summary(&records);
    let failed = records.iter().filter(|r| r.status != Status::Ok).count();
    if failed > 0 {
        log::warn!("{failed} items did not produce a scorable trace");
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for p in &args.records {
        let path = if p.is_dir() {
            p.join(RECORDS_FILE)
        } else {
            p.clone()
        };
        if !path.is_file() {
            bail!("{}: no such records file", path.display());
        }
        records.extend(load_records(&path)?);
    }
    let written = write_reports(&records, &args.group_by, &args.out)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Cmd::Build(a) => build(a),
        Cmd::Run(a) => run(a),
        Cmd::Score(a) => score(a),
        Cmd::Report(a) => report(a),
        Cmd::Catalog => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", manifest_json()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
