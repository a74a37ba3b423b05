//! Declarative configuration (one TOML file) and the validated run manifest.
//!
//! ```toml
//! [corpus]
//! root = "corpus"
//! colors = ["black", "red"]
//! depths = { levy_dragon = [0, 17] }
//!
//! [run]
//! output_dir = "runs/dcg"
//! prompt = "DCG"
//! timeout_s = 30
//! workers = 8
//!
//! [run.provider]
//! kind = "http"
//! endpoint = "http://localhost:8080/generate"
//!
//! [run.executor]
//! kind = "shim"
//! command = ["python3", "-m", "minimal_turtle_shim", "{source}", "{trace}"]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ifsbench_core::catalog::FractalKind;
use ifsbench_core::eval::DEFAULT_THRESHOLD;
use ifsbench_core::raster::LineColor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusPlan;
use crate::prompts::PromptId;

pub const DEFAULT_TIMEOUT_S: f64 = 30.0;
/// Environment variable holding the HTTP provider credential.
pub const API_KEY_ENV: &str = "IFSBENCH_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub corpus: CorpusSection,
    pub run: Option<RunSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    #[serde(default = "default_corpus_root")]
    pub root: PathBuf,
    #[serde(default = "all_colors")]
    pub colors: Vec<LineColor>,
    #[serde(default)]
    pub depths: BTreeMap<FractalKind, (u32, u32)>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            root: default_corpus_root(),
            colors: all_colors(),
            depths: BTreeMap::new(),
        }
    }
}

impl CorpusSection {
    pub fn plan(&self) -> CorpusPlan {
        CorpusPlan {
            colors: self.colors.clone(),
            depths: self.depths.clone(),
            ..CorpusPlan::default()
        }
    }
}

fn default_corpus_root() -> PathBuf {
    PathBuf::from("corpus")
}

fn all_colors() -> Vec<LineColor> {
    LineColor::ALL.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: Option<PathBuf>,
    pub prompt: Option<PromptId>,
    pub model: Option<String>,
    pub timeout_s: Option<f64>,
    pub threshold: Option<f64>,
    pub workers: Option<usize>,
    /// Restrict the run to these colors (default: every corpus item).
    pub colors: Option<Vec<LineColor>>,
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub executor: ExecutorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Serves the catalog's own trace for each item (or for `substitute`).
    Native {
        #[serde(default)]
        substitute: Option<FractalKind>,
    },
    /// Reads `<dir>/<item id>.<extension>`.
    TraceDir {
        dir: PathBuf,
        #[serde(default = "default_extension")]
        extension: String,
    },
    Http {
        endpoint: String,
        #[serde(default = "default_attempts")]
        attempts: u32,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
        #[serde(default = "default_request_timeout_s")]
        request_timeout_s: f64,
    },
}

impl ProviderConfig {
    pub fn id(&self) -> String {
        match self {
            ProviderConfig::Native { substitute: None } => "native".to_string(),
            ProviderConfig::Native {
                substitute: Some(k),
            } => format!("native:{k}"),
            ProviderConfig::TraceDir { dir, .. } => format!("trace_dir:{}", dir.display()),
            ProviderConfig::Http { endpoint, .. } => format!("http:{endpoint}"),
        }
    }
}

fn default_extension() -> String {
    "trace".to_string()
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_request_timeout_s() -> f64 {
    120.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExecutorConfig {
    /// The candidate text is itself a trace.
    #[default]
    Trace,
    /// External program; `{source}` and `{trace}` in the argument list are
    /// replaced by the candidate file and the trace output path.
    Shim { command: Vec<String> },
}

/// Everything a benchmark run needs, validated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub corpus_root: PathBuf,
    pub output_dir: PathBuf,
    pub prompt: PromptId,
    /// Label written to every record; defaults to the provider id.
    pub model: String,
    pub timeout_s: f64,
    pub threshold: f64,
    pub workers: usize,
    pub colors: Option<Vec<LineColor>>,
    pub provider: ProviderConfig,
    pub executor: ExecutorConfig,
}

impl RunManifest {
    pub fn new(corpus_root: &Path, output_dir: &Path, provider: ProviderConfig) -> Self {
        Self {
            corpus_root: corpus_root.to_path_buf(),
            output_dir: output_dir.to_path_buf(),
            prompt: PromptId::Dcg,
            model: provider.id(),
            timeout_s: DEFAULT_TIMEOUT_S,
            threshold: DEFAULT_THRESHOLD,
            workers: default_workers(),
            colors: None,
            provider,
            executor: ExecutorConfig::Trace,
        }
    }

    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ConfigError> {
        let run = cfg
            .run
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing [run] section".into()))?;
        let provider = run
            .provider
            .clone()
            .ok_or_else(|| ConfigError::Invalid("missing [run.provider]".into()))?;
        let output_dir = run
            .output_dir
            .clone()
            .ok_or_else(|| ConfigError::Invalid("missing run.output_dir".into()))?;
        let mut m = RunManifest::new(&cfg.corpus.root, &output_dir, provider);
        if let Some(p) = run.prompt {
            m.prompt = p;
        }
        if let Some(model) = &run.model {
            m.model = model.clone();
        }
        if let Some(t) = run.timeout_s {
            m.timeout_s = t;
        }
        if let Some(t) = run.threshold {
            m.threshold = t;
        }
        if let Some(w) = run.workers {
            m.workers = w;
        }
        m.colors = run.colors.clone();
        m.executor = run.executor.clone();
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad(format!(
                "timeout_s must be positive, got {}",
                self.timeout_s
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            ));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if let ExecutorConfig::Shim { command } = &self.executor {
            if command.is_empty() {
                return bad("shim command is empty".into());
            }
            for placeholder in ["{source}", "{trace}"] {
                if !command.iter().any(|a| a.contains(placeholder)) {
                    return bad(format!("shim command lacks {placeholder}"));
                }
            }
        }
        match &self.provider {
            ProviderConfig::Http {
                attempts,
                request_timeout_s,
                ..
            } => {
                if *attempts == 0 {
                    return bad("http attempts must be at least 1".into());
                }
                if !(request_timeout_s.is_finite() && *request_timeout_s > 0.0) {
                    return bad("http request_timeout_s must be positive".into());
                }
            }
            ProviderConfig::TraceDir { extension, .. } if extension.is_empty() => {
                return bad("trace_dir extension is empty".into());
            }
            _ => {}
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

pub fn parse_config(text: &str) -> Result<ConfigFile, toml::de::Error> {
    toml::from_str(text)
}
