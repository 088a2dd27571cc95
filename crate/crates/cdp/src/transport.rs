//! Message transport and request/response correlation.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::client::IntoClientRequest;
use tungstenite::{Message, WebSocket};

use crate::CdpError;

/// A duplex channel of protocol text frames.
pub trait Transport: Send {
    fn send(&mut self, text: &str) -> Result<(), CdpError>;
    /// Next inbound frame, or `None` when `timeout` passes first.
    fn recv(&mut self, timeout: Duration) -> Result<Option<String>, CdpError>;
    fn close(&mut self) {}
}

pub struct WsTransport {
    socket: WebSocket<TcpStream>,
}

impl WsTransport {
    /// Opens a plain-TCP websocket to a `ws://` URL.
    pub fn connect(url: &str, timeout: Duration) -> Result<Self, CdpError> {
        let failed = |reason: String| CdpError::ConnectFailed {
            endpoint: url.to_string(),
            reason,
        };
        let request = url
            .into_client_request()
            .map_err(|e| failed(e.to_string()))?;
        let host = request
            .uri()
            .host()
            .ok_or_else(|| failed("no host".into()))?;
        let port = request.uri().port_u16().unwrap_or(80);
        let addr = std::net::ToSocketAddrs::to_socket_addrs(&(host, port))
            .map_err(|e| failed(e.to_string()))?
            .next()
            .ok_or_else(|| failed("host did not resolve".into()))?;
        let stream =
            TcpStream::connect_timeout(&addr, timeout).map_err(|e| failed(e.to_string()))?;
        stream
            .set_read_timeout(Some(timeout))
            .map_err(|e| failed(e.to_string()))?;
        stream.set_nodelay(true).ok();
        let (socket, _) =
            tungstenite::client(request, stream).map_err(|e| failed(e.to_string()))?;
        Ok(Self { socket })
    }
}

impl Transport for WsTransport {
    fn send(&mut self, text: &str) -> Result<(), CdpError> {
        self.socket
            .send(Message::text(text))
            .map_err(|e| CdpError::Malformed(format!("send failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<String>, CdpError> {
        let timeout = timeout.max(Duration::from_millis(1));
        self.socket.get_mut().set_read_timeout(Some(timeout)).ok();
        loop {
            match self.socket.read() {
                Ok(Message::Text(t)) => return Ok(Some(t.to_string())),
                Ok(Message::Binary(b)) => {
                    return Ok(Some(String::from_utf8_lossy(&b).into_owned()))
                }
                Ok(Message::Close(_)) => return Err(CdpError::Closed),
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
                {
                    return Ok(None)
                }
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Err(CdpError::Closed)
                }
                Err(e) => return Err(CdpError::Malformed(e.to_string())),
            }
        }
    }

    fn close(&mut self) {
        self.socket.close(None).ok();
        self.socket.flush().ok();
    }
}

/// A protocol event, tagged with the flattened session it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub method: String,
    pub params: Value,
    pub session_id: Option<String>,
}

/// Numbered commands over one transport. Events that arrive while waiting
/// for a reply are queued for [`Connection::next_event`].
pub struct Connection {
    transport: Box<dyn Transport>,
    next_id: u64,
    events: VecDeque<Event>,
}

impl Connection {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            next_id: 1,
            events: VecDeque::new(),
        }
    }

    pub fn call(
        &mut self,
        session: Option<&str>,
        method: &str,
        params: Value,
        timeout: Duration,
    ) -> Result<Value, CdpError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut msg = json!({"id": id, "method": method, "params": params});
        if let Some(s) = session {
            msg["sessionId"] = json!(s);
        }
        log::trace!("-> {msg}");
        self.transport.send(&msg.to_string())?;
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(CdpError::Timeout(timeout.as_millis() as u64));
            }
            let Some(text) = self.transport.recv(left)? else {
                continue;
            };
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CdpError::Malformed(e.to_string()))?;
            if v.get("id").and_then(Value::as_u64) == Some(id) {
                if let Some(err) = v.get("error") {
                    return Err(CdpError::Command {
                        method: method.to_string(),
                        code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                        message: err
                            .get("message")
                            .and_then(Value::as_str)
                            .unwrap_or("")
                            .to_string(),
                    });
                }
                return Ok(v.get("result").cloned().unwrap_or(Value::Null));
            }
            self.queue(v);
        }
    }

    fn queue(&mut self, v: Value) {
        let Some(method) = v.get("method").and_then(Value::as_str) else {
            log::debug!("dropping unmatched reply {v}");
            return;
        };
        self.events.push_back(Event {
            method: method.to_string(),
            params: v.get("params").cloned().unwrap_or(Value::Null),
            session_id: v
                .get("sessionId")
                .and_then(Value::as_str)
                .map(str::to_string),
        });
    }

    /// Next queued or inbound event, or `None` once `timeout` passes.
    pub fn next_event(&mut self, timeout: Duration) -> Result<Option<Event>, CdpError> {
        if let Some(e) = self.events.pop_front() {
            return Ok(Some(e));
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            let Some(text) = self.transport.recv(left)? else {
                continue;
            };
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CdpError::Malformed(e.to_string()))?;
            self.queue(v);
            if let Some(e) = self.events.pop_front() {
                return Ok(Some(e));
            }
        }
    }

    /// Discards queued events.
    pub fn clear_events(&mut self) {
        self.events.clear();
    }

    pub fn close(&mut self) {
        self.transport.close();
    }
}
