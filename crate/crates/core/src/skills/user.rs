use std::collections::VecDeque;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("user channel closed")]
    Closed,
    #[error("user channel I/O error: {0}")]
    Io(String),
}

/// Where `ask_user` questions go in human-in-the-loop mode.
pub trait UserChannel: Send {
    fn ask(&mut self, prompt: &str) -> Result<String, ChannelError>;
}

/// Prompts on stderr, reads one line from stdin.
#[derive(Debug, Default)]
pub struct StdinChannel;

impl UserChannel for StdinChannel {
    fn ask(&mut self, prompt: &str) -> Result<String, ChannelError> {
        let mut err = std::io::stderr();
        writeln!(err, "{prompt}").map_err(|e| ChannelError::Io(e.to_string()))?;
        write!(err, "> ").map_err(|e| ChannelError::Io(e.to_string()))?;
        err.flush().ok();
        let mut line = String::new();
        let read = std::io::stdin()
            .lock()
            .read_line(&mut line)
            .map_err(|e| ChannelError::Io(e.to_string()))?;
        if read == 0 {
            return Err(ChannelError::Closed);
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

/// Canned replies; closes once they run out.
#[derive(Debug, Default, Clone)]
pub struct ScriptedChannel {
    replies: VecDeque<String>,
    pub asked: Vec<String>,
}

impl ScriptedChannel {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: replies.into_iter().map(Into::into).collect(),
            asked: Vec::new(),
        }
    }
}

impl UserChannel for ScriptedChannel {
    fn ask(&mut self, prompt: &str) -> Result<String, ChannelError> {
        self.asked.push(prompt.to_string());
        self.replies.pop_front().ok_or(ChannelError::Closed)
    }
}
