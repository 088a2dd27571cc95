//! Benchmark runner: task suites, outcome classification and the results
//! table.

mod classify;
mod report;

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{run_task, AgentConfig, OutcomeStatus, Runtime, TaskOutcome};
use crate::llm::{load_script, CallLedger, LlmGateway, ReplayBackend, ScriptedBackend};
use crate::sim::{fixtures, load_site_file, SimSite};
use crate::skills::{BrowserSession, SkillSet, UrlGuard};
use crate::trace::Trace;

pub use classify::{
    classify_failure, classify_with, FailureKind, FailurePatterns, Verdict,
    DEFAULT_FAILURE_PHRASES, DEFAULT_FAILURE_REGEX,
};
pub use report::{
    compute_metrics, emit_report, parse_report_csv, parse_report_json, rounded, GroupMetrics,
    ReportError, ReportFormat, RunMetrics, COLUMNS, OVERALL,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStart {
    /// A shipped site name or a path to a site spec file.
    Sim(String),
    Url(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldPredicate {
    Substring(String),
    Regex(String),
}

impl GoldPredicate {
    /// Case-insensitive for substrings.
    pub fn check(&self, answer: &str) -> Result<bool, regex::Error> {
        match self {
            GoldPredicate::Substring(s) => Ok(answer.to_lowercase().contains(&s.to_lowercase())),
            GoldPredicate::Regex(r) => Ok(Regex::new(r)?.is_match(answer)),
        }
    }
}

/// One line of a task suite file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    #[serde(rename = "site")]
    pub site_name: String,
    pub start: TaskStart,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldPredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("task suite line {line}: {reason}")]
    SuiteFormat { line: usize, reason: String },
    #[error("duplicate task id {0:?}")]
    DuplicateTaskId(String),
    #[error("empty task text for {0:?}")]
    EmptyTask(String),
    #[error("{0}")]
    Io(String),
}

pub fn parse_suite(text: &str) -> Result<Vec<TaskSpec>, HarnessError> {
    let suite = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::SuiteFormat {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<TaskSpec>, _>>()?;
    validate_suite(&suite)?;
    Ok(suite)
}

pub fn validate_suite(suite: &[TaskSpec]) -> Result<(), HarnessError> {
    let mut seen = BTreeSet::new();
    for spec in suite {
        if !seen.insert(spec.id.as_str()) {
            return Err(HarnessError::DuplicateTaskId(spec.id.clone()));
        }
        if spec.task.trim().is_empty() {
            return Err(HarnessError::EmptyTask(spec.id.clone()));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub site: String,
    pub status: OutcomeStatus,
    pub answer: String,
    pub claimed_success: bool,
    pub wall_time_s: f64,
    pub ledger: CallLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
    /// Harness-level problem that kept the task from running normally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type SessionFactory =
    Box<dyn Fn(&TaskSpec) -> Result<Box<dyn BrowserSession>, String> + Send + Sync>;
pub type GatewayFactory = Box<dyn Fn(&TaskSpec) -> Result<LlmGateway, String> + Send + Sync>;
pub type SkillsFactory = Box<dyn Fn(&TaskSpec) -> SkillSet + Send + Sync>;

/// Builds the per-task session, gateway and skills.
pub struct TaskEnvironment {
    pub sessions: SessionFactory,
    pub gateways: GatewayFactory,
    pub skills: SkillsFactory,
}

impl TaskEnvironment {
    pub fn new(sessions: SessionFactory, gateways: GatewayFactory) -> Self {
        Self {
            sessions,
            gateways,
            skills: Box::new(|_| SkillSet::new(UrlGuard::unrestricted())),
        }
    }

    pub fn with_skills(mut self, skills: SkillsFactory) -> Self {
        self.skills = skills;
        self
    }
}

/// Resolves `TaskStart::Sim` as a shipped name or a spec path relative to
/// `base`. URL starts are rejected.
pub fn sim_sessions(base: PathBuf) -> SessionFactory {
    Box::new(
        move |spec: &TaskSpec| -> Result<Box<dyn BrowserSession>, String> {
            let site = resolve_sim_site(&spec.start, &base)?;
            Ok(Box::new(site.session()))
        },
    )
}

pub fn resolve_sim_site(start: &TaskStart, base: &Path) -> Result<Arc<SimSite>, String> {
    match start {
        TaskStart::Sim(name) => match fixtures::by_name(name) {
            Some(spec) => SimSite::new(spec).map_err(|e| e.to_string()),
            None => load_site_file(&base.join(name)).map_err(|e| e.to_string()),
        },
        TaskStart::Url(url) => Err(format!(
            "the simulator cannot open {url}; use the browser backend"
        )),
    }
}

fn script_path(path: &Path, spec: &TaskSpec) -> PathBuf {
    if path.is_dir() {
        path.join(format!("{}.jsonl", spec.id))
    } else {
        path.to_path_buf()
    }
}

/// Scripts from a file, or from `<dir>/<task id>.jsonl` for a directory.
pub fn scripted_gateways(path: PathBuf) -> GatewayFactory {
    Box::new(move |spec: &TaskSpec| {
        let entries = load_script(&script_path(&path, spec)).map_err(|e| e.to_string())?;
        Ok(LlmGateway::new(ScriptedBackend::new(entries)))
    })
}

pub fn replay_gateways(path: PathBuf) -> GatewayFactory {
    Box::new(move |spec: &TaskSpec| {
        let entries = load_script(&script_path(&path, spec)).map_err(|e| e.to_string())?;
        Ok(LlmGateway::new(
            ReplayBackend::new(entries).map_err(|e| e.to_string())?,
        ))
    })
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub agent: AgentConfig,
    pub concurrency: usize,
    pub failure_patterns: FailurePatterns,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            concurrency: 1,
            failure_patterns: FailurePatterns::default(),
        }
    }
}

#[derive(Debug)]
pub struct TaskRun {
    pub record: TaskRecord,
    pub trace: Trace,
}

#[derive(Debug)]
pub struct BenchmarkRun {
    pub runs: Vec<TaskRun>,
    pub metrics: RunMetrics,
}

impl BenchmarkRun {
    pub fn records(&self) -> Vec<TaskRecord> {
        self.runs.iter().map(|r| r.record.clone()).collect()
    }
}

fn setup_failure(spec: &TaskSpec, reason: String) -> TaskRun {
    TaskRun {
        record: TaskRecord {
            id: spec.id.clone(),
            site: spec.site_name.clone(),
            status: OutcomeStatus::SelfAwareFailure,
            answer: format!("Unable to start the task: {reason}"),
            claimed_success: false,
            wall_time_s: 0.0,
            ledger: CallLedger::default(),
            failure_kind: Some(FailureKind::SelfAware),
            error: Some(reason),
        },
        trace: Trace::new(),
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs one task and classifies it. Never panics.
pub fn run_one(spec: &TaskSpec, env: &TaskEnvironment, config: &RunConfig) -> TaskRun {
    let mut session = match (env.sessions)(spec) {
        Ok(s) => s,
        Err(e) => return setup_failure(spec, e),
    };
    let mut gateway = match (env.gateways)(spec) {
        Ok(g) => g,
        Err(e) => return setup_failure(spec, e),
    };
    let mut skills = (env.skills)(spec);
    let mut trace = Trace::new();

    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| {
        let mut rt = Runtime {
            session: &mut *session,
            skills: &mut skills,
            gateway: &mut gateway,
            trace: &mut trace,
        };
        run_task(&spec.id, &spec.task, &mut rt, &config.agent)
    }));
    let wall_time_s = started.elapsed().as_secs_f64();
    let _ = session.close();

    let (outcome, error) = match result {
        Ok(o) => (o, None),
        Err(payload) => {
            let msg = panic_message(&*payload);
            let outcome = TaskOutcome {
                status: OutcomeStatus::SelfAwareFailure,
                answer: format!("Unable to complete the task: the run crashed ({msg})."),
                claimed_success: false,
                steps_used: 0,
                ledger: gateway.ledger(),
            };
            (outcome, Some(format!("panic: {msg}")))
        }
    };
    let (gold_check, gold_error) = match &spec.gold {
        Some(g) => match g.check(&outcome.answer) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(format!("invalid gold pattern: {e}"))),
        },
        None => (None, None),
    };
    let verdict = classify_with(
        &config.failure_patterns,
        &outcome.answer,
        outcome.claimed_success,
        gold_check,
    );
    let failure_kind = match verdict {
        Verdict::Success => None,
        Verdict::Failure(k) => Some(k),
    };
    let status = match (verdict, outcome.claimed_success) {
        (Verdict::Success, _) => OutcomeStatus::Success,
        (Verdict::Failure(FailureKind::Oblivious), true) => OutcomeStatus::ObliviousCandidate,
        _ => OutcomeStatus::SelfAwareFailure,
    };
    TaskRun {
        record: TaskRecord {
            id: spec.id.clone(),
            site: spec.site_name.clone(),
            status,
            answer: outcome.answer,
            claimed_success: outcome.claimed_success,
            wall_time_s,
            ledger: outcome.ledger,
            failure_kind,
            error: error.or(gold_error),
        },
        trace,
    }
}

/// Runs the suite with up to `config.concurrency` tasks at once. Records
/// come back in suite order.
pub fn run_benchmark(
    suite: &[TaskSpec],
    env: &TaskEnvironment,
    config: &RunConfig,
) -> Result<BenchmarkRun, HarnessError> {
    validate_suite(suite)?;
    let slots: Vec<Mutex<Option<TaskRun>>> = suite.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.clamp(1, suite.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = suite.get(i) else { break };
                log::info!("task {} started", spec.id);
                let run = run_one(spec, env, config);
                log::info!("task {} finished: {:?}", spec.id, run.record.status);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(run);
            });
        }
    });
    let runs: Vec<TaskRun> = slots
        .into_iter()
        .zip(suite)
        .map(|(slot, spec)| {
            slot.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or_else(|| {
                    setup_failure(spec, "worker exited before running the task".into())
                })
        })
        .collect();
    let records: Vec<TaskRecord> = runs.iter().map(|r| r.record.clone()).collect();
    Ok(BenchmarkRun {
        metrics: compute_metrics(&records),
        runs,
    })
}

fn file_name_for(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `traces/<id>.jsonl`, `records.jsonl` and `report.<ext>` under `dir`.
pub fn write_outputs(dir: &Path, run: &BenchmarkRun, format: ReportFormat) -> io::Result<PathBuf> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    for r in &run.runs {
        let file = fs::File::create(traces.join(format!("{}.jsonl", file_name_for(&r.record.id))))?;
        r.trace.write_jsonl(io::BufWriter::new(file))?;
    }
    let mut records = String::new();
    for r in &run.runs {
        records.push_str(&serde_json::to_string(&r.record).map_err(io::Error::other)?);
        records.push('\n');
    }
    fs::write(dir.join("records.jsonl"), records)?;
    let report = dir.join(format!("report.{}", format.extension()));
    fs::write(&report, emit_report(&run.metrics, format))?;
    Ok(report)
}
