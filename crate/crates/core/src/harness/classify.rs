use regex::Regex;
use serde::{Deserialize, Serialize};

pub const DEFAULT_FAILURE_PHRASES: &[&str] = &["unable to", "could not", "cannot complete"];
pub const DEFAULT_FAILURE_REGEX: &str = r"(?is)\bdue to\b.*\berrors?\b";

/// Phrases by which an agent admits it did not finish a task.
#[derive(Clone, Debug)]
pub struct FailurePatterns {
    phrases: Vec<String>,
    patterns: Vec<Regex>,
}

impl Default for FailurePatterns {
    fn default() -> Self {
        Self {
            phrases: DEFAULT_FAILURE_PHRASES
                .iter()
                .map(|p| p.to_string())
                .collect(),
            patterns: vec![Regex::new(DEFAULT_FAILURE_REGEX).expect("valid default pattern")],
        }
    }
}

impl FailurePatterns {
    /// Case-insensitive substrings plus regular expressions.
    pub fn new(
        phrases: impl IntoIterator<Item = String>,
        patterns: &[&str],
    ) -> Result<Self, regex::Error> {
        Ok(Self {
            phrases: phrases.into_iter().map(|p| p.to_lowercase()).collect(),
            patterns: patterns
                .iter()
                .map(|p| Regex::new(p))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn admits_failure(&self, message: &str) -> bool {
        let lower = message.to_lowercase();
        self.phrases.iter().any(|p| lower.contains(p.as_str()))
            || self.patterns.iter().any(|r| r.is_match(message))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    SelfAware,
    Oblivious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Success,
    Failure(FailureKind),
}

/// Success requires a claim not contradicted by the gold check; a final
/// message admitting failure is self-aware; anything else is oblivious.
pub fn classify_failure(
    final_message: &str,
    claimed_success: bool,
    gold_check: Option<bool>,
) -> Verdict {
    classify_with(
        &FailurePatterns::default(),
        final_message,
        claimed_success,
        gold_check,
    )
}

pub fn classify_with(
    patterns: &FailurePatterns,
    final_message: &str,
    claimed_success: bool,
    gold_check: Option<bool>,
) -> Verdict {
    if claimed_success && gold_check != Some(false) {
        return Verdict::Success;
    }
    if patterns.admits_failure(final_message) {
        return Verdict::Failure(FailureKind::SelfAware);
    }
    Verdict::Failure(FailureKind::Oblivious)
}
