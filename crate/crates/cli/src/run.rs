use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use webnav::harness::{
    compute_metrics, emit_report, parse_suite, replay_gateways, run_benchmark, scripted_gateways,
    sim_sessions, write_outputs, GatewayFactory, HarnessError, RunConfig, SessionFactory,
    TaskEnvironment, TaskSpec,
};
use webnav::llm::{HttpBackend, HttpConfig, LlmGateway, RecordingBackend};
use webnav::skills::{SkillSet, StdinChannel, UrlGuard};

use crate::args::{site_start, Backend, LlmSpec, RunArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write outputs to {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Usage(String),
}

pub fn load_suite(args: &RunArgs) -> Result<Vec<TaskSpec>, CliError> {
    if let Some(path) = &args.tasks {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        return Ok(parse_suite(&text)?);
    }
    let (Some(task), Some(site)) = (&args.task, &args.site) else {
        return Err(CliError::Usage(
            "give --tasks, or --task with --site".into(),
        ));
    };
    Ok(vec![TaskSpec {
        id: args.id.clone(),
        site_name: site.clone(),
        start: site_start(site),
        task: task.clone(),
        gold: None,
    }])
}

fn suite_base(args: &RunArgs) -> PathBuf {
    args.tasks
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(feature = "browser")]
fn browser_sessions(args: &RunArgs) -> Result<SessionFactory, CliError> {
    use webnav::harness::TaskStart;
    use webnav::skills::BrowserSession;
    use webnav_cdp::{AdapterConfig, CdpSession};

    let b = &args.browser;
    let instrumentation = match &b.instrumentation {
        Some(p) => Some(fs::read_to_string(p).map_err(|source| CliError::Read {
            path: p.clone(),
            source,
        })?),
        None => None,
    };
    let config = AdapterConfig {
        endpoint: b.cdp_endpoint.clone(),
        headless: !b.headed,
        settle_ms: b.settle_ms,
        nav_timeout_ms: b.nav_timeout_ms,
        instrumentation,
        ..AdapterConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Box::new(
        move |spec: &TaskSpec| -> Result<Box<dyn BrowserSession>, String> {
            let TaskStart::Url(url) = &spec.start else {
                return Err(format!(
                    "the browser backend needs a URL start, not {:?}",
                    spec.start
                ));
            };
            let mut session: CdpSession =
                webnav_cdp::connect(config.clone()).map_err(|e| e.to_string())?;
            session.navigate(url).map_err(|e| e.to_string())?;
            Ok(Box::new(session))
        },
    ))
}

#[cfg(not(feature = "browser"))]
fn browser_sessions(_: &RunArgs) -> Result<SessionFactory, CliError> {
    Err(CliError::Usage("this build has no browser backend".into()))
}

fn http_gateways(args: &RunArgs) -> Result<GatewayFactory, CliError> {
    let config = HttpConfig::from_env(args.llm_endpoint.as_deref())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let record = args.record.clone();
    if let Some(dir) = &record {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.clone(),
            source,
        })?;
    }
    Ok(Box::new(move |spec: &TaskSpec| {
        let backend = HttpBackend::new(config.clone());
        match &record {
            Some(dir) => {
                let path = dir.join(format!("{}.jsonl", spec.id));
                let sink = fs::File::create(&path)
                    .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
                Ok(LlmGateway::new(RecordingBackend::new(backend, sink)))
            }
            None => Ok(LlmGateway::new(backend)),
        }
    }))
}

pub fn environment(args: &RunArgs) -> Result<TaskEnvironment, CliError> {
    let sessions = match args.backend {
        Backend::Sim => sim_sessions(suite_base(args)),
        Backend::Browser => browser_sessions(args)?,
    };
    let gateways = match &args.llm {
        LlmSpec::Scripted(p) => scripted_gateways(p.clone()),
        LlmSpec::Replay(p) => replay_gateways(p.clone()),
        LlmSpec::Http => http_gateways(args)?,
    };
    let guard = if args.allowlist.is_empty() {
        UrlGuard::unrestricted()
    } else {
        UrlGuard::allow_only(args.allowlist.iter().map(String::as_str))
    };
    let hitl = args.hitl;
    Ok(
        TaskEnvironment::new(sessions, gateways).with_skills(Box::new(move |_| {
            let skills = SkillSet::new(guard.clone());
            if hitl {
                skills.with_user(Box::new(StdinChannel))
            } else {
                skills
            }
        })),
    )
}

pub fn run_config(args: &RunArgs) -> RunConfig {
    let mut config = RunConfig {
        concurrency: args.concurrency.max(1),
        ..RunConfig::default()
    };
    let agent = &mut config.agent;
    if let Some(n) = args.max_planner_steps {
        agent.max_planner_steps = n;
    }
    if let Some(n) = args.max_nav_turns {
        agent.max_nav_turns = n;
    }
    if let Some(m) = &args.model {
        agent.planner_model = m.clone();
        agent.navigator_model = m.clone();
    }
    if let Some(m) = &args.planner_model {
        agent.planner_model = m.clone();
    }
    if let Some(m) = &args.navigator_model {
        agent.navigator_model = m.clone();
    }
    config
}

/// Runs the suite, writes outputs and returns the report text.
pub fn run(args: &RunArgs) -> Result<String, CliError> {
    let suite = load_suite(args)?;
    let env = environment(args)?;
    let bench = run_benchmark(&suite, &env, &run_config(args))?;
    let format = args.report.into();
    write_outputs(&args.out, &bench, format).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    debug_assert_eq!(compute_metrics(&bench.records()), bench.metrics);
    Ok(emit_report(&bench.metrics, format))
}
