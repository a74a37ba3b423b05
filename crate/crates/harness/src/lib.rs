//! Corpus builder, benchmark runner and report writer around `ifsbench-core`.

pub mod config;
pub mod corpus;
pub mod executor;
pub mod pipeline;
pub mod prompts;
pub mod provider;
pub mod report;

pub use config::{ProviderConfig, RunManifest};
pub use corpus::{build_corpus, CorpusItem, CorpusPlan};
pub use pipeline::run_benchmark;
pub use prompts::PromptId;
