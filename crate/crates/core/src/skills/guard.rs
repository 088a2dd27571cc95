use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("{0:?} is not a valid absolute URL")]
    InvalidUrl(String),
    #[error("domain {0:?} is outside the permitted boundary")]
    Rejected(String),
}

/// Domain boundary for navigation.
///
/// `allow = None` permits every domain not denied; `Some(list)` permits only
/// the listed domains and their subdomains. Deny entries always win.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlGuard {
    pub allow: Option<Vec<String>>,
    #[serde(default)]
    pub deny: Vec<String>,
}

impl UrlGuard {
    pub fn unrestricted() -> Self {
        Self::default()
    }

    pub fn allow_only<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            allow: Some(domains.into_iter().map(|d| normalize(&d.into())).collect()),
            deny: Vec::new(),
        }
    }

    pub fn with_deny<I, S>(mut self, domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.deny
            .extend(domains.into_iter().map(|d| normalize(&d.into())));
        self
    }

    /// Returns the parsed URL when navigation to it is permitted.
    pub fn check(&self, raw: &str) -> Result<Url, GuardError> {
        let url = Url::parse(raw.trim()).map_err(|_| GuardError::InvalidUrl(raw.to_string()))?;
        if url.scheme() == "about" {
            return Ok(url);
        }
        let host = match url.host_str() {
            Some(h) => normalize(h),
            None => return Err(GuardError::InvalidUrl(raw.to_string())),
        };
        if self.deny.iter().any(|d| covers(d, &host)) {
            return Err(GuardError::Rejected(host));
        }
        match &self.allow {
            Some(list) if !list.iter().any(|d| covers(d, &host)) => Err(GuardError::Rejected(host)),
            _ => Ok(url),
        }
    }
}

fn normalize(d: &str) -> String {
    d.trim()
        .trim_start_matches("*.")
        .trim_end_matches('.')
        .to_ascii_lowercase()
}

fn covers(domain: &str, host: &str) -> bool {
    host == domain
        || host
            .strip_suffix(domain)
            .is_some_and(|rest| rest.ends_with('.'))
}
