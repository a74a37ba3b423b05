//! Bundled prompt texts, keyed by strategy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PromptId {
    /// Direct code generation.
    Dcg,
    /// Reasoning then code.
    Rtc,
    /// Recursive structure focus.
    Rsf,
}

impl PromptId {
    pub const ALL: [PromptId; 3] = [PromptId::Dcg, PromptId::Rtc, PromptId::Rsf];

    pub const fn as_str(self) -> &'static str {
        match self {
            PromptId::Dcg => "DCG",
            PromptId::Rtc => "RTC",
            PromptId::Rsf => "RSF",
        }
    }

    pub const fn text(self) -> &'static str {
        match self {
            PromptId::Dcg => include_str!("../assets/prompts/dcg.txt"),
            PromptId::Rtc => include_str!("../assets/prompts/rtc.txt"),
            PromptId::Rsf => include_str!("../assets/prompts/rsf.txt"),
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown prompt `{s}` (expected DCG, RTC or RSF)"))
    }
}
