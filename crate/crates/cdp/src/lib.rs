//! [`BrowserSession`](webnav::skills::BrowserSession) over the Chrome
//! DevTools Protocol.
//!
//! The adapter attaches to a page target, serializes the live DOM, assigns
//! mmids with the same allocator the simulator uses and writes them back as
//! `mmid` attributes so actions can find their targets. An optional in-page
//! script (see [`instrumentation`]) adds a mutation buffer used to tell
//! whether the page settled.

mod config;
mod error;
pub mod input;
pub mod instrumentation;
mod session;
pub mod transport;

pub use config::{
    AdapterConfig, MmidSource, DEFAULT_ENDPOINT, DEFAULT_NAV_TIMEOUT_MS, DEFAULT_SETTLE_MS,
};
pub use error::CdpError;
pub use session::{connect, fetch_version, BrowserVersion, CdpSession, SUPPORTED_PROTOCOL};
