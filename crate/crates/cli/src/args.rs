use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use webnav::harness::{ReportFormat, TaskStart};

#[derive(Debug, Parser)]
#[command(
    name = "webnav",
    version,
    about = "Hierarchical web navigation agent and benchmark runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a task suite or a single task and write traces, records and a report.
    Run(Box<RunArgs>),
    /// List the shipped simulated sites.
    Sites,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Sim,
    Browser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportArg {
    Table,
    Json,
    Csv,
}

impl From<ReportArg> for ReportFormat {
    fn from(r: ReportArg) -> Self {
        match r {
            ReportArg::Table => ReportFormat::Table,
            ReportArg::Json => ReportFormat::Json,
            ReportArg::Csv => ReportFormat::Csv,
        }
    }
}

/// Where model responses come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmSpec {
    Scripted(PathBuf),
    Replay(PathBuf),
    Http,
}

impl FromStr for LlmSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let path = |p: &str| {
            if p.is_empty() {
                Err(format!("{s:?} needs a path"))
            } else {
                Ok(PathBuf::from(p))
            }
        };
        match s.split_once(':') {
            Some(("scripted", p)) => path(p).map(LlmSpec::Scripted),
            Some(("replay", p)) => path(p).map(LlmSpec::Replay),
            None if s == "http" => Ok(LlmSpec::Http),
            _ => Err(format!(
                "expected scripted:<path>, replay:<path> or http, got {s:?}"
            )),
        }
    }
}

/// Builtin name or spec path for the simulator, a URL for the browser.
pub fn site_start(site: &str) -> TaskStart {
    if site.starts_with("http://") || site.starts_with("https://") || site.starts_with("file://") {
        TaskStart::Url(site.to_string())
    } else {
        TaskStart::Sim(site.to_string())
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON-lines task suite.
    #[arg(long, conflicts_with_all = ["task", "site"], required_unless_present = "task")]
    pub tasks: Option<PathBuf>,
    /// Text of a single task.
    #[arg(long, requires = "site")]
    pub task: Option<String>,
    /// Shipped site name, site spec path or start URL for --task.
    #[arg(long)]
    pub site: Option<String>,
    /// Task id for --task.
    #[arg(long, default_value = "task")]
    pub id: String,
    #[arg(long, value_enum, default_value_t = Backend::Sim)]
    pub backend: Backend,
    /// scripted:<file|dir>, replay:<file|dir> or http. A directory holds
    /// one `<task id>.jsonl` per task.
    #[arg(long)]
    pub llm: LlmSpec,
    /// Chat-completions URL for --llm http.
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    /// Record every model exchange to `<dir>/<task id>.jsonl`.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Model for both agents.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub planner_model: Option<String>,
    #[arg(long)]
    pub navigator_model: Option<String>,
    /// Comma-separated domains the agent may open; subdomains included.
    #[arg(long, value_delimiter = ',')]
    pub allowlist: Vec<String>,
    /// Let the navigator ask the user on the terminal.
    #[arg(long)]
    pub hitl: bool,
    #[arg(long)]
    pub max_planner_steps: Option<usize>,
    #[arg(long)]
    pub max_nav_turns: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub concurrency: usize,
    #[arg(long, default_value = "webnav-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportArg::Table)]
    pub report: ReportArg,
    #[command(flatten)]
    pub browser: BrowserArgs,
}

#[derive(Debug, Args)]
pub struct BrowserArgs {
    /// Debugging endpoint of a running browser.
    #[arg(long, default_value = "http://127.0.0.1:9222")]
    pub cdp_endpoint: String,
    /// Open pages in a visible window.
    #[arg(long)]
    pub headed: bool,
    #[arg(long, default_value_t = 500)]
    pub settle_ms: u64,
    #[arg(long, default_value_t = 30_000)]
    pub nav_timeout_ms: u64,
    /// In-page instrumentation script to register on every document.
    #[arg(long)]
    pub instrumentation: Option<PathBuf>,
}
