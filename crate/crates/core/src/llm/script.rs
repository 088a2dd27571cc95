use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{request_hash, ChatBackend, ChatRequest, ChatResponse, LlmError};

/// Failure a script can inject in place of a response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptedError {
    Transport { message: String },
    RateLimited,
}

impl From<ScriptedError> for LlmError {
    fn from(e: ScriptedError) -> Self {
        match e {
            ScriptedError::Transport { message } => LlmError::Transport(message),
            ScriptedError::RateLimited => LlmError::RateLimited { attempts: 1 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptOutcome {
    Response(ChatResponse),
    Error(ScriptedError),
}

/// One line of a script or recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub ordinal: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_hash: Option<String>,
    #[serde(flatten)]
    pub outcome: ScriptOutcome,
}

impl ScriptEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("entry serializes")
    }
}

/// JSON lines; blank lines are skipped, ordinals must run 1, 2, 3, ...
pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, LlmError> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ScriptEntry =
            serde_json::from_str(line).map_err(|e| LlmError::ScriptFormat {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        let expected = entries.len() as u64 + 1;
        if entry.ordinal != expected {
            return Err(LlmError::ScriptFormat {
                line: idx + 1,
                reason: format!(
                    "ordinal {} out of sequence, expected {expected}",
                    entry.ordinal
                ),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptEntry>, LlmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LlmError::ScriptFormat {
        line: 0,
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_script(&text)
}

/// Plays entries back in order without looking at requests.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    next: usize,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries, next: 0 }
    }

    pub fn from_responses(responses: impl IntoIterator<Item = ChatResponse>) -> Self {
        Self::new(
            responses
                .into_iter()
                .enumerate()
                .map(|(i, r)| ScriptEntry {
                    ordinal: i as u64 + 1,
                    request_hash: None,
                    outcome: ScriptOutcome::Response(r),
                })
                .collect(),
        )
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.next
    }

    fn take(&mut self) -> Result<&ScriptEntry, LlmError> {
        let entry = self
            .entries
            .get(self.next)
            .ok_or(LlmError::ScriptExhausted {
                ordinal: self.next as u64 + 1,
            })?;
        self.next += 1;
        Ok(entry)
    }
}

fn outcome(entry: &ScriptEntry) -> Result<ChatResponse, LlmError> {
    match &entry.outcome {
        ScriptOutcome::Response(r) => Ok(r.clone()),
        ScriptOutcome::Error(e) => Err(e.clone().into()),
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&mut self, _request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        outcome(self.take()?)
    }
}

/// Plays a recording back, failing on the first request whose hash differs.
#[derive(Clone, Debug)]
pub struct ReplayBackend {
    inner: ScriptedBackend,
}

impl ReplayBackend {
    /// Every entry must carry a request hash.
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, LlmError> {
        if let Some(e) = entries.iter().find(|e| e.request_hash.is_none()) {
            return Err(LlmError::ScriptFormat {
                line: e.ordinal as usize,
                reason: "replay entry has no request_hash".into(),
            });
        }
        Ok(Self {
            inner: ScriptedBackend::new(entries),
        })
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let actual = request_hash(request);
        let entry = self.inner.take()?;
        let expected = entry.request_hash.as_deref().unwrap_or_default();
        if expected != actual {
            return Err(LlmError::ReplayDivergence {
                ordinal: entry.ordinal,
                expected: expected.to_string(),
                actual,
            });
        }
        outcome(entry)
    }
}

/// Wraps a backend and appends each exchange to `sink` as a replayable line.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Box<dyn Write + Send>,
    ordinal: u64,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, sink: impl Write + Send + 'static) -> Self {
        Self {
            inner,
            sink: Box::new(sink),
            ordinal: 0,
        }
    }

    fn persist(&mut self, entry: &ScriptEntry) -> Result<(), LlmError> {
        writeln!(self.sink, "{}", entry.to_line())
            .and_then(|_| self.sink.flush())
            .map_err(|e| LlmError::Transport(format!("recording sink: {e}")))
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let result = self.inner.complete(request);
        let recorded = match &result {
            Ok(r) => Some(ScriptOutcome::Response(r.clone())),
            Err(LlmError::Transport(message)) => {
                Some(ScriptOutcome::Error(ScriptedError::Transport {
                    message: message.clone(),
                }))
            }
            Err(LlmError::RateLimited { .. }) => {
                Some(ScriptOutcome::Error(ScriptedError::RateLimited))
            }
            Err(_) => None,
        };
        if let Some(outcome) = recorded {
            self.ordinal += 1;
            let entry = ScriptEntry {
                ordinal: self.ordinal,
                request_hash: Some(request_hash(request)),
                outcome,
            };
            self.persist(&entry)?;
        }
        result
    }
}

/// Backend computed by a closure, for tests and adapters.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: FnMut(&ChatRequest) -> Result<ChatResponse, LlmError> + Send,
{
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (self.0)(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{AgentLabel, ChatMessage, LlmGateway};
    use std::sync::{Arc, Mutex};

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            agent: AgentLabel::Navigator,
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage::user(text)],
            tools: vec![],
        }
    }

    #[derive(Clone, Default)]
    struct SharedSink(Arc<Mutex<Vec<u8>>>);

    impl Write for SharedSink {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn seven_entries_then_exhausted() {
        let mut b =
            ScriptedBackend::from_responses((0..7).map(|i| ChatResponse::text(format!("r{i}"))));
        for i in 0..7 {
            assert_eq!(
                b.complete(&req("x")).unwrap(),
                ChatResponse::text(format!("r{i}"))
            );
        }
        assert_eq!(
            b.complete(&req("x")),
            Err(LlmError::ScriptExhausted { ordinal: 8 })
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text =
            "{\"ordinal\":1,\"response\":{\"kind\":\"text\",\"text\":\"a\"}}\n\n{not json}\n";
        assert!(matches!(
            parse_script(text),
            Err(LlmError::ScriptFormat { line: 3, .. })
        ));
        let text = "{\"ordinal\":2,\"response\":{\"kind\":\"text\",\"text\":\"a\"}}";
        assert!(matches!(
            parse_script(text),
            Err(LlmError::ScriptFormat { line: 1, .. })
        ));
    }

    #[test]
    fn error_entries_parse() {
        let text = "{\"ordinal\":1,\"error\":{\"kind\":\"rate_limited\"}}\n{\"ordinal\":2,\"error\":{\"kind\":\"transport\",\"message\":\"reset\"}}";
        let mut b = ScriptedBackend::new(parse_script(text).unwrap());
        assert_eq!(
            b.complete(&req("x")),
            Err(LlmError::RateLimited { attempts: 1 })
        );
        assert_eq!(
            b.complete(&req("x")),
            Err(LlmError::Transport("reset".into()))
        );
    }

    #[test]
    fn record_then_replay() {
        let sink = SharedSink::default();
        let inner =
            ScriptedBackend::from_responses([ChatResponse::text("a"), ChatResponse::text("b")]);
        let mut rec = RecordingBackend::new(inner, sink.clone());
        rec.complete(&req("one")).unwrap();
        rec.complete(&req("two")).unwrap();
        let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        let entries = parse_script(&text).unwrap();

        let mut replay = LlmGateway::new(ReplayBackend::new(entries.clone()).unwrap());
        assert_eq!(
            replay.complete(&req("one")).unwrap(),
            ChatResponse::text("a")
        );
        assert_eq!(
            replay.complete(&req("two")).unwrap(),
            ChatResponse::text("b")
        );

        let mut diverged = ReplayBackend::new(entries).unwrap();
        diverged.complete(&req("one")).unwrap();
        assert!(matches!(
            diverged.complete(&req("altered")),
            Err(LlmError::ReplayDivergence { ordinal: 2, .. })
        ));
    }

    #[test]
    fn replay_requires_hashes() {
        let entries = vec![ScriptEntry {
            ordinal: 1,
            request_hash: None,
            outcome: ScriptOutcome::Response(ChatResponse::text("a")),
        }];
        assert!(ReplayBackend::new(entries).is_err());
    }
}
