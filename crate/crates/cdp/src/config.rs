use serde::{Deserialize, Serialize};
use webnav::dom::MmidPolicy;

use crate::CdpError;

pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:9222";
pub const DEFAULT_SETTLE_MS: u64 = 500;
pub const DEFAULT_NAV_TIMEOUT_MS: u64 = 30_000;

/// Who puts `mmid` attributes on the live page.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmidSource {
    /// The adapter assigns them from its parse and writes them back.
    #[default]
    Adapter,
    /// The in-page script assigns them; the adapter adopts them.
    Instrumentation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// `http://host:port` of the debugging endpoint, or a `ws://` URL of
    /// the browser target itself.
    pub endpoint: String,
    /// When false the page opens in a new window instead of a background tab.
    pub headless: bool,
    pub settle_ms: u64,
    pub nav_timeout_ms: u64,
    /// Script registered to run at every document start.
    pub instrumentation: Option<String>,
    pub mmid_source: MmidSource,
    pub mmid_policy: MmidPolicy,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            headless: true,
            settle_ms: DEFAULT_SETTLE_MS,
            nav_timeout_ms: DEFAULT_NAV_TIMEOUT_MS,
            instrumentation: None,
            mmid_source: MmidSource::Adapter,
            mmid_policy: MmidPolicy::AllElements,
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), CdpError> {
        if self.nav_timeout_ms == 0 {
            return Err(CdpError::InvalidConfig(
                "nav_timeout_ms must be positive".into(),
            ));
        }
        if self.mmid_source == MmidSource::Instrumentation && self.instrumentation.is_none() {
            return Err(CdpError::InvalidConfig(
                "mmid_source=instrumentation needs an instrumentation script".into(),
            ));
        }
        if !["http://", "https://", "ws://", "wss://"]
            .iter()
            .any(|p| self.endpoint.starts_with(p))
        {
            return Err(CdpError::InvalidConfig(format!(
                "unsupported endpoint {:?}",
                self.endpoint
            )));
        }
        Ok(())
    }
}
