//! Candidate acquisition: where a candidate program for a corpus item comes
//! from.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use ifsbench_core::catalog::{trace_unchecked, FractalKind};
use ifsbench_core::serialize_trace;
use serde::Deserialize;
use thiserror::Error;

use crate::config::{ProviderConfig, API_KEY_ENV};
use crate::corpus::CorpusItem;

/// What a provider hands back for one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    Source(String),
    /// The provider answered but declined to produce code.
    Refusal(String),
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Inputs for one request.
pub struct Request<'a> {
    pub item: &'a CorpusItem,
    pub image_path: &'a Path,
    pub prompt: &'a str,
    /// Per-item artifact directory for audit files.
    pub audit_dir: &'a Path,
}

pub trait CandidateProvider: Send + Sync {
    fn id(&self) -> String;
    fn fetch(&self, req: &Request<'_>) -> Result<Candidate, ProviderError>;
}

pub fn from_config(cfg: &ProviderConfig) -> Box<dyn CandidateProvider> {
    match cfg {
        ProviderConfig::Native { substitute } => Box::new(NativeProvider {
            substitute: *substitute,
        }),
        ProviderConfig::TraceDir { dir, extension } => Box::new(TraceDirProvider {
            dir: dir.clone(),
            extension: extension.clone(),
        }),
        ProviderConfig::Http {
            endpoint,
            attempts,
            backoff_ms,
            request_timeout_s,
        } => Box::new(HttpProvider {
            endpoint: endpoint.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            attempts: *attempts,
            backoff: Duration::from_millis(*backoff_ms),
            request_timeout: Duration::from_secs_f64(*request_timeout_s),
        }),
    }
}

/// Emits the catalog's ground-truth trace, optionally for a different
/// fractal at the same depth.
#[derive(Debug, Clone, Default)]
pub struct NativeProvider {
    pub substitute: Option<FractalKind>,
}

impl CandidateProvider for NativeProvider {
    fn id(&self) -> String {
        match self.substitute {
            None => "native".into(),
            Some(k) => format!("native:{k}"),
        }
    }

    fn fetch(&self, req: &Request<'_>) -> Result<Candidate, ProviderError> {
        let kind = self.substitute.unwrap_or(req.item.fractal);
        Ok(Candidate::Source(serialize_trace(&trace_unchecked(
            kind,
            req.item.depth,
        ))))
    }
}

/// Reads pre-computed candidates from `<dir>/<item id>.<extension>`.
#[derive(Debug, Clone)]
pub struct TraceDirProvider {
    pub dir: PathBuf,
    pub extension: String,
}

impl TraceDirProvider {
    pub fn path_for(&self, item: &CorpusItem) -> PathBuf {
        self.dir.join(format!("{}.{}", item.id, self.extension))
    }
}

impl CandidateProvider for TraceDirProvider {
    fn id(&self) -> String {
        format!("trace_dir:{}", self.dir.display())
    }

    fn fetch(&self, req: &Request<'_>) -> Result<Candidate, ProviderError> {
        let path = self.path_for(req.item);
        let bytes = fs::read(&path).map_err(|source| ProviderError::Io {
            path: path.clone(),
            source,
        })?;
        // Non-UTF-8 bytes are kept so the trace parser reports them.
        Ok(Candidate::Source(
            String::from_utf8_lossy(&bytes).into_owned(),
        ))
    }
}

/// POSTs `{image, prompt, id}` as JSON and expects `{code}` back (or
/// `{refusal}`).
#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub attempts: u32,
    pub backoff: Duration,
    pub request_timeout: Duration,
}

pub const RESPONSE_FILE: &str = "response.json";

#[derive(Deserialize)]
struct Reply {
    code: Option<String>,
    refusal: Option<String>,
}

enum Attempt {
    Done(u16, String),
    Retry(String),
}

impl HttpProvider {
    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(self.request_timeout))
            .build()
            .into()
    }

    fn attempt(&self, agent: &ureq::Agent, body: &serde_json::Value) -> Attempt {
        let mut req = agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                if status >= 500 {
                    Attempt::Retry(format!("HTTP {status}"))
                } else {
                    Attempt::Done(status, text)
                }
            }
            Err(e) => Attempt::Retry(e.to_string()),
        }
    }
}

impl CandidateProvider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn fetch(&self, req: &Request<'_>) -> Result<Candidate, ProviderError> {
        let mut png = Vec::new();
        fs::File::open(req.image_path)
            .and_then(|mut f| f.read_to_end(&mut png))
            .map_err(|source| ProviderError::Io {
                path: req.image_path.to_path_buf(),
                source,
            })?;
        let body = serde_json::json!({
            "image": base64::engine::general_purpose::STANDARD.encode(&png),
            "prompt": req.prompt,
            "id": req.item.id,
        });
        let agent = self.agent();
        let mut last_error = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&agent, &body) {
                Attempt::Retry(why) => last_error = why,
                Attempt::Done(status, text) => {
                    let audit = req.audit_dir.join(RESPONSE_FILE);
                    fs::write(&audit, &text).map_err(|source| ProviderError::Io {
                        path: audit,
                        source,
                    })?;
                    if !(200..300).contains(&status) {
                        return Err(ProviderError::Transport(format!("HTTP {status}")));
                    }
                    return parse_reply(&text);
                }
            }
        }
        Err(ProviderError::Transport(format!(
            "{} attempts failed, last: {last_error}",
            self.attempts
        )))
    }
}

fn parse_reply(text: &str) -> Result<Candidate, ProviderError> {
    let reply: Reply =
        serde_json::from_str(text).map_err(|e| ProviderError::Schema(e.to_string()))?;
    match (reply.code, reply.refusal) {
        (Some(code), _) => Ok(Candidate::Source(code)),
        (None, Some(why)) => Ok(Candidate::Refusal(why)),
        (None, None) => Err(ProviderError::Schema("response has no `code` field".into())),
    }
}
