//! Per-task event log, written as JSON lines.
//!
//! ```text
//! {"seq":0,"ts_ms":1718000000000,"event":"task_start","task_id":"t1","task":"..."}
//! ```

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{NavReport, PlannerDirective, TaskOutcome};
use crate::llm::{AgentLabel, ChatRequest, ToolCall};
use crate::skills::SkillResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    TaskStart {
        task_id: String,
        task: String,
    },
    PlannerRequest {
        step: usize,
        ordinal: u64,
        request: ChatRequest,
    },
    PlannerDirective {
        step: usize,
        raw: String,
        directive: PlannerDirective,
    },
    NavBegin {
        step: usize,
        subtask: String,
    },
    NavRequest {
        step: usize,
        turn: usize,
        ordinal: u64,
        request: ChatRequest,
    },
    NavText {
        step: usize,
        turn: usize,
        text: String,
    },
    SkillCall {
        step: usize,
        turn: usize,
        call: ToolCall,
    },
    SkillResult {
        step: usize,
        turn: usize,
        name: String,
        result: SkillResult,
    },
    NavEnd {
        step: usize,
        report: NavReport,
    },
    GatewayError {
        agent: AgentLabel,
        error: String,
    },
    Outcome {
        outcome: TaskOutcome,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub ts_ms: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

pub type Clock = Box<dyn FnMut() -> u64 + Send>;

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Append-only event list for one task.
pub struct Trace {
    entries: Vec<TraceEntry>,
    clock: Clock,
}

impl Default for Trace {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trace")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl Trace {
    pub fn new() -> Self {
        Self::with_clock(wall_clock_ms)
    }

    pub fn with_clock(clock: impl FnMut() -> u64 + Send + 'static) -> Self {
        Self {
            entries: Vec::new(),
            clock: Box::new(clock),
        }
    }

    pub fn push(&mut self, event: TraceEvent) {
        let entry = TraceEntry {
            seq: self.entries.len() as u64,
            ts_ms: (self.clock)(),
            event,
        };
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.entries.iter().map(|e| &e.event)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

pub fn parse_trace(jsonl: &str) -> Result<Vec<TraceEntry>, serde_json::Error> {
    jsonl
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// The trace with every `ts_ms` removed, one JSON object per line.
pub fn strip_timestamps(jsonl: &str) -> Result<String, serde_json::Error> {
    let mut out = String::with_capacity(jsonl.len());
    for line in jsonl.lines().filter(|l| !l.trim().is_empty()) {
        let mut v: Value = serde_json::from_str(line)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("ts_ms");
        }
        out.push_str(&v.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn same_modulo_timestamps(a: &str, b: &str) -> bool {
    matches!((strip_timestamps(a), strip_timestamps(b)), (Ok(x), Ok(y)) if x == y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_round_trip_and_strip() {
        let mut t = Trace::with_clock({
            let mut now = 100;
            move || {
                now += 7;
                now
            }
        });
        t.push(TraceEvent::TaskStart {
            task_id: "t".into(),
            task: "find".into(),
        });
        t.push(TraceEvent::NavBegin {
            step: 1,
            subtask: "go".into(),
        });
        let text = t.to_jsonl();
        assert!(text.starts_with(r#"{"seq":0,"ts_ms":107,"event":"task_start""#));
        assert_eq!(parse_trace(&text).unwrap(), t.entries());

        let mut later = Trace::with_clock(|| 999);
        for e in t.events().cloned() {
            later.push(e);
        }
        assert_ne!(text, later.to_jsonl());
        assert!(same_modulo_timestamps(&text, &later.to_jsonl()));
        assert!(!strip_timestamps(&text).unwrap().contains("ts_ms"));
    }
}
