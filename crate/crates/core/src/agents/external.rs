use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{decode_from_agent, encode, FromAgent, ToAgent};
use super::AgentError;
use crate::items::QuestionItem;
use crate::session::Verdict;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// An agent in another process (or at the other end of any byte stream)
/// speaking the wire protocol.
pub struct ExternalAgent {
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
    greeted: bool,
    /// Every line sent and received, for auditing.
    transcript: Vec<String>,
}

impl ExternalAgent {
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        ExternalAgent {
            writer: Some(Box::new(writer)),
            lines: rx,
            timeout,
            child: None,
            greeted: false,
            transcript: Vec::new(),
        }
    }

    /// Starts `program args...` with piped stdin/stdout.
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, AgentError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::Transport(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let mut agent = Self::from_streams(stdout, stdin, timeout);
        agent.child = Some(child);
        Ok(agent)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    fn send(&mut self, msg: &ToAgent) -> Result<(), AgentError> {
        let line = encode(msg);
        let w = self.writer.as_mut().ok_or_else(|| AgentError::Transport("agent stream closed".into()))?;
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| AgentError::Transport(format!("write to agent: {e}")))?;
        self.transcript.push(line);
        Ok(())
    }

    fn recv(&mut self, deadline: Instant) -> Result<FromAgent, AgentError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => {
                self.transcript.push(line.clone());
                decode_from_agent(&line)
            }
            Ok(Err(e)) => Err(AgentError::Transport(format!("read from agent: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(AgentError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(AgentError::Transport("agent closed its output".into())),
        }
    }

    /// Sends `hello` and waits for `ready`. Done automatically before the
    /// first item.
    pub fn handshake(&mut self) -> Result<(), AgentError> {
        if self.greeted {
            return Ok(());
        }
        self.send(&ToAgent::hello())?;
        let deadline = Instant::now() + self.timeout;
        match self.recv(deadline)? {
            FromAgent::Ready => {
                self.greeted = true;
                Ok(())
            }
            other => Err(AgentError::MalformedReply(format!("expected ready, got {other:?}"))),
        }
    }

    /// Poses one item and waits for its answer. Late answers to earlier
    /// items are discarded.
    pub fn ask(&mut self, session_id: &str, item: &QuestionItem, png: &[u8]) -> Result<usize, AgentError> {
        self.handshake()?;
        self.send(&ToAgent::item(session_id, item, png))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.recv(deadline)? {
                FromAgent::Answer { item_id, choice } if item_id == item.item_id => {
                    if choice >= item.k {
                        return Err(AgentError::MalformedReply(format!("choice {choice} out of range")));
                    }
                    return Ok(choice);
                }
                FromAgent::Answer { .. } => continue,
                FromAgent::Ready => return Err(AgentError::MalformedReply("unexpected ready".into())),
            }
        }
    }

    pub fn send_verdict(&mut self, verdict: &Verdict) -> Result<(), AgentError> {
        self.send(&ToAgent::verdict(verdict))
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        // Closing stdin is the agent's cue to exit.
        self.writer = None;
        if let Some(mut child) = self.child.take() {
            let until = Instant::now() + Duration::from_secs(2);
            while Instant::now() < until {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
