use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};
use webnav::dom::{
    parse_html, parse_instrumented_html, Attributes, DomNode, DomSnapshot, Mmid, MmidAllocator,
    NodeKind,
};
use webnav::skills::{ActionEffect, BrowserSession, KeyChord, PageAction, SessionError, BLANK_URL};

use crate::input::{click_events, key_events};
use crate::instrumentation::{self as inst, MutationBuffer, PageSource, TargetInfo};
use crate::transport::{Connection, Transport, WsTransport};
use crate::{AdapterConfig, CdpError, MmidSource};

/// Protocol revision the adapter speaks.
pub const SUPPORTED_PROTOCOL: &str = "1.3";

/// Extra wait after the settle window used to tell whether mutations are
/// still arriving.
const QUIESCENCE_PROBE_MS: u64 = 50;

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct BrowserVersion {
    #[serde(rename = "Browser", default)]
    pub browser: String,
    #[serde(rename = "Protocol-Version")]
    pub protocol_version: String,
    #[serde(rename = "webSocketDebuggerUrl")]
    pub websocket_url: String,
}

/// Reads `/json/version` from an HTTP debugging endpoint.
pub fn fetch_version(endpoint: &str, timeout: Duration) -> Result<BrowserVersion, CdpError> {
    let url = format!("{}/json/version", endpoint.trim_end_matches('/'));
    let failed = |reason: String| CdpError::ConnectFailed {
        endpoint: endpoint.to_string(),
        reason,
    };
    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .new_agent();
    let text = agent
        .get(&url)
        .call()
        .map_err(|e| failed(e.to_string()))?
        .body_mut()
        .read_to_string()
        .map_err(|e| failed(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| failed(format!("bad /json/version reply: {e}")))
}

fn check_protocol(found: &str) -> Result<(), CdpError> {
    if found == SUPPORTED_PROTOCOL {
        Ok(())
    } else {
        Err(CdpError::ProtocolVersionMismatch {
            expected: SUPPORTED_PROTOCOL.into(),
            found: found.into(),
        })
    }
}

/// Connects to a browser and opens a fresh page in it.
pub fn connect(config: AdapterConfig) -> Result<CdpSession, CdpError> {
    config.validate()?;
    let timeout = Duration::from_millis(config.nav_timeout_ms);
    let (ws_url, checked) = if config.endpoint.starts_with("ws") {
        (config.endpoint.clone(), false)
    } else {
        let v = fetch_version(&config.endpoint, timeout)?;
        check_protocol(&v.protocol_version)?;
        (v.websocket_url, true)
    };
    let transport = WsTransport::connect(&ws_url, timeout)?;
    let mut conn = Connection::new(Box::new(transport));
    if !checked {
        let v = conn.call(None, "Browser.getVersion", json!({}), timeout)?;
        check_protocol(v["protocolVersion"].as_str().unwrap_or(""))?;
    }
    CdpSession::open(conn, config)
}

/// A page target driven over the protocol.
pub struct CdpSession {
    conn: Connection,
    config: AdapterConfig,
    target_id: String,
    session_id: String,
    allocator: MmidAllocator,
    url: String,
    seq: u64,
    last_mutations: Option<MutationBuffer>,
    closed: bool,
}

impl CdpSession {
    /// Opens a page over an already connected transport.
    pub fn attach(transport: Box<dyn Transport>, config: AdapterConfig) -> Result<Self, CdpError> {
        config.validate()?;
        Self::open(Connection::new(transport), config)
    }

    fn open(mut conn: Connection, config: AdapterConfig) -> Result<Self, CdpError> {
        let t = Duration::from_millis(config.nav_timeout_ms);
        let created = conn.call(
            None,
            "Target.createTarget",
            json!({"url": BLANK_URL, "newWindow": !config.headless, "background": config.headless}),
            t,
        )?;
        let target_id = str_field(&created, "targetId")?;
        let attached = conn.call(
            None,
            "Target.attachToTarget",
            json!({"targetId": target_id, "flatten": true}),
            t,
        )?;
        let session_id = str_field(&attached, "sessionId")?;
        let sid = Some(session_id.as_str());
        conn.call(sid, "Page.enable", json!({}), t)?;
        conn.call(sid, "Runtime.enable", json!({}), t)?;
        if let Some(source) = &config.instrumentation {
            conn.call(
                sid,
                "Page.addScriptToEvaluateOnNewDocument",
                json!({"source": source}),
                t,
            )?;
        }
        Ok(Self {
            conn,
            allocator: MmidAllocator::new(config.mmid_policy),
            config,
            target_id,
            session_id,
            url: BLANK_URL.into(),
            seq: 0,
            last_mutations: None,
            closed: false,
        })
    }

    /// Mutation buffer read after the last action, when instrumented.
    pub fn last_mutations(&self) -> Option<&MutationBuffer> {
        self.last_mutations.as_ref()
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.config.nav_timeout_ms)
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, CdpError> {
        let t = self.timeout();
        self.conn.call(Some(&self.session_id), method, params, t)
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.closed {
            Err(SessionError::Closed)
        } else {
            Ok(())
        }
    }

    /// Runs an expression in the page and returns its value.
    fn evaluate(&mut self, expression: &str) -> Result<Value, SessionError> {
        let reply = self
            .call(
                "Runtime.evaluate",
                json!({"expression": expression, "returnByValue": true, "awaitPromise": true}),
            )
            .map_err(|e| match e {
                CdpError::Command { message, .. } => SessionError::EvaluationFailed {
                    retryable: context_lost(&message),
                    message,
                },
                other => other.into(),
            })?;
        if let Some(details) = reply.get("exceptionDetails") {
            let message = details["exception"]["description"]
                .as_str()
                .or_else(|| details["text"].as_str())
                .unwrap_or("exception")
                .to_string();
            return Err(SessionError::EvaluationFailed {
                retryable: context_lost(&message),
                message,
            });
        }
        Ok(reply["result"].get("value").cloned().unwrap_or(Value::Null))
    }

    fn evaluate_as<T: serde::de::DeserializeOwned>(
        &mut self,
        expression: &str,
    ) -> Result<T, SessionError> {
        let v = self.evaluate(expression)?;
        serde_json::from_value(v).map_err(|e| SessionError::EvaluationFailed {
            message: format!("unexpected page reply: {e}"),
            retryable: true,
        })
    }

    fn capture(&mut self) -> Result<DomSnapshot, SessionError> {
        self.ensure_open()?;
        let instrumented = self.config.mmid_source == MmidSource::Instrumentation;
        if instrumented {
            let v = self.evaluate(&inst::inject_expression())?;
            inst::parse_inject_reply(&v).map_err(CdpError::from)?;
        }
        let page: PageSource = self.evaluate_as(&inst::serialize_expression())?;
        if page.url != self.url {
            self.allocator.reset();
            self.url = page.url.clone();
        }
        let parse = if instrumented {
            parse_instrumented_html
        } else {
            parse_html
        };
        let parsed = parse(&page.html, &page.url).map_err(|e| SessionError::EvaluationFailed {
            message: e.to_string(),
            retryable: false,
        })?;
        let (clean, indices) = strip_indices(&parsed);
        let snap = if instrumented {
            self.allocator.adopt(&clean);
            clean
        } else {
            let snap = self.allocator.assign(clean);
            let triples = mark_triples(&snap, &indices);
            let reply = self.evaluate(&inst::mark_expression(&triples))?;
            if reply["skipped"].as_u64().unwrap_or(0) > 0 {
                return Err(SessionError::EvaluationFailed {
                    message: "page changed while mmids were being written".into(),
                    retryable: true,
                });
            }
            snap
        };
        self.seq += 1;
        Ok(snap.with_seq(self.seq))
    }

    fn target(&mut self, mmid: Mmid) -> Result<TargetInfo, SessionError> {
        let info: TargetInfo = self.evaluate_as(&inst::target_expression(mmid.get()))?;
        if !info.found {
            return Err(SessionError::ElementNotFound(mmid));
        }
        Ok(info)
    }

    fn focus(&mut self, mmid: Mmid, clear: bool) -> Result<(), SessionError> {
        match self.evaluate(&inst::focus_expression(mmid.get(), clear))? {
            Value::Bool(true) => Ok(()),
            _ => Err(SessionError::ElementNotFound(mmid)),
        }
    }

    fn press(&mut self, chord: &KeyChord) -> Result<(), SessionError> {
        for event in key_events(chord) {
            self.call("Input.dispatchKeyEvent", event)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, action: &PageAction) -> Result<(), SessionError> {
        match action {
            PageAction::Click { target } => {
                let info = self.target(*target)?;
                if !info.visible || info.disabled {
                    return Err(SessionError::ElementNotInteractable(*target));
                }
                for event in click_events(info.x, info.y) {
                    self.call("Input.dispatchMouseEvent", event)?;
                }
            }
            PageAction::EnterText { target, text } => {
                let info = self.target(*target)?;
                if !info.editable {
                    return Err(SessionError::NotTextInput(*target));
                }
                if !info.visible || info.disabled {
                    return Err(SessionError::ElementNotInteractable(*target));
                }
                self.focus(*target, true)?;
                self.call("Input.insertText", json!({"text": text}))?;
            }
            PageAction::PressKeys { target, keys } => {
                if let Some(t) = target {
                    self.target(*t)?;
                    self.focus(*t, false)?;
                }
                for chord in keys {
                    self.press(chord)?;
                }
            }
            PageAction::Navigate { .. } => unreachable!("handled by navigate"),
        }
        Ok(())
    }

    fn is_mine(&self, session: &Option<String>) -> bool {
        session.as_deref() == Some(self.session_id.as_str())
    }

    fn wait_for_load(&mut self) -> Result<(), SessionError> {
        let deadline = Instant::now() + self.timeout();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(SessionError::Timeout(self.config.nav_timeout_ms));
            }
            match self.conn.next_event(left).map_err(SessionError::from)? {
                Some(e) if e.method == "Page.loadEventFired" && self.is_mine(&e.session_id) => {
                    return Ok(())
                }
                Some(_) => {}
                None => return Err(SessionError::Timeout(self.config.nav_timeout_ms)),
            }
        }
    }

    /// Waits out the settle window. Returns whether the top frame began a
    /// new document during it, waiting for that document's load if so.
    fn settle(&mut self) -> Result<bool, SessionError> {
        let deadline = Instant::now() + Duration::from_millis(self.config.settle_ms);
        let mut loading = false;
        let mut navigated = false;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                break;
            }
            let Some(e) = self.conn.next_event(left).map_err(SessionError::from)? else {
                break;
            };
            if !self.is_mine(&e.session_id) {
                continue;
            }
            match e.method.as_str() {
                "Page.frameStartedLoading" if e.params["frameId"] == json!(self.target_id) => {
                    loading = true;
                    navigated = true;
                }
                "Page.loadEventFired" => loading = false,
                _ => {}
            }
        }
        if loading {
            self.wait_for_load()?;
            thread::sleep(Duration::from_millis(self.config.settle_ms));
        }
        Ok(navigated)
    }

    fn read_mutations(&mut self, epoch: u64) -> Result<MutationBuffer, SessionError> {
        let v = self.evaluate(&inst::read_mutations_expression(epoch))?;
        inst::parse_read_reply(epoch, &v).map_err(|e| CdpError::from(e).into())
    }
}

fn context_lost(message: &str) -> bool {
    [
        "Execution context was destroyed",
        "Cannot find context",
        "Inspected target navigated",
    ]
    .iter()
    .any(|m| message.contains(m))
}

fn str_field(v: &Value, name: &str) -> Result<String, CdpError> {
    v[name]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| CdpError::Malformed(format!("reply without {name}: {v}")))
}

/// Copies the tree without the clone index attribute, returning each
/// element's index in pre-order.
fn strip_indices(snapshot: &DomSnapshot) -> (DomSnapshot, Vec<Option<usize>>) {
    fn rebuild(node: &DomNode, out: &mut Vec<Option<usize>>) -> DomNode {
        match node.kind() {
            NodeKind::Text => DomNode::text_node(node.text()),
            NodeKind::Comment => DomNode::comment(node.text()),
            NodeKind::Element => {
                out.push(
                    node.attr(inst::INDEX_ATTRIBUTE)
                        .and_then(|v| v.parse().ok()),
                );
                let mut attrs = Attributes::new();
                for (k, v) in node
                    .attributes()
                    .iter()
                    .filter(|(k, _)| *k != inst::INDEX_ATTRIBUTE)
                {
                    attrs.set(k, v);
                }
                let children = node.children().iter().map(|c| rebuild(c, out)).collect();
                let mut copy = DomNode::element(node.tag(), attrs).with_children(children);
                if let Some(m) = node.mmid() {
                    copy = copy.with_mmid(m);
                }
                copy
            }
        }
    }
    let mut indices = Vec::new();
    let root = rebuild(snapshot.root(), &mut indices);
    (DomSnapshot::new(root, snapshot.url()), indices)
}

fn mark_triples(snapshot: &DomSnapshot, indices: &[Option<usize>]) -> Vec<(usize, String, u32)> {
    snapshot
        .walk()
        .filter(|(_, n)| n.is_element())
        .zip(indices)
        .filter_map(|((_, n), ix)| Some(((*ix)?, n.tag().to_string(), n.mmid()?.get())))
        .collect()
}

impl BrowserSession for CdpSession {
    fn current_url(&self) -> String {
        self.url.clone()
    }

    fn navigate(&mut self, url: &str) -> Result<DomSnapshot, SessionError> {
        self.ensure_open()?;
        self.conn.clear_events();
        let reply = self
            .call("Page.navigate", json!({"url": url}))
            .map_err(|e| match e {
                CdpError::Command { message, .. } => SessionError::NavigationFailed(message),
                other => other.into(),
            })?;
        if let Some(err) = reply["errorText"].as_str().filter(|s| !s.is_empty()) {
            return Err(SessionError::NavigationFailed(err.to_string()));
        }
        if reply.get("loaderId").is_some() {
            self.wait_for_load()?;
        }
        self.settle()?;
        self.capture()
    }

    fn snapshot(&mut self) -> Result<DomSnapshot, SessionError> {
        self.capture()
    }

    fn perform(&mut self, action: &PageAction) -> Result<ActionEffect, SessionError> {
        self.ensure_open()?;
        if let PageAction::Navigate { url } = action {
            let snapshot = self.navigate(url)?;
            return Ok(ActionEffect {
                snapshot,
                settled: true,
            });
        }
        let epoch = match &self.config.instrumentation {
            Some(_) => Some(
                inst::parse_epoch_reply(&self.evaluate(&inst::begin_epoch_expression())?)
                    .map_err(CdpError::from)?,
            ),
            None => None,
        };
        self.conn.clear_events();
        self.dispatch(action)?;
        let navigated = self.settle()?;
        let settled = match epoch {
            Some(e) if !navigated => match self.read_mutations(e) {
                Ok(buffer) => {
                    self.last_mutations = Some(buffer);
                    thread::sleep(Duration::from_millis(QUIESCENCE_PROBE_MS));
                    self.read_mutations(e)
                        .map(|late| late.entries.is_empty())
                        .unwrap_or(false)
                }
                Err(err) => {
                    log::warn!("mutation buffer unavailable: {err}");
                    self.last_mutations = None;
                    false
                }
            },
            _ => {
                self.last_mutations = None;
                true
            }
        };
        Ok(ActionEffect {
            snapshot: self.capture()?,
            settled,
        })
    }

    fn close(&mut self) -> Result<(), SessionError> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        let t = self.timeout();
        let result = self.conn.call(
            None,
            "Target.closeTarget",
            json!({"targetId": self.target_id}),
            t,
        );
        self.conn.close();
        result.map(|_| ()).map_err(Into::into)
    }
}

impl Drop for CdpSession {
    fn drop(&mut self) {
        if !self.closed {
            self.close().ok();
        }
    }
}
