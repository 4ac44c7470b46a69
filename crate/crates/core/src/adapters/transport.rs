//! Single-attempt transports. Retries live one level up in [`super::Adapter`].

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::protocol::{Request, Response};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptError {
    Timeout,
    Io(String),
}

pub trait Transport: Send + Sync {
    /// Send one serialized request and return the raw response line.
    fn send(&self, request: &Request, body: &str) -> Result<String, AttemptError>;
}

/// Something that answers protocol requests. Implemented by the synthetic
/// oracles and usable both in-process and behind a stdio loop.
pub trait Handler: Send + Sync {
    fn handle(&self, request: Request) -> Response;
}

/// Runs a [`Handler`] in-process. Payloads still go through JSON so the
/// same parsing and validation paths are exercised as with real adapters.
pub struct InProcess<H> {
    handler: H,
}

impl<H: Handler> InProcess<H> {
    pub fn new(handler: H) -> Self {
        InProcess { handler }
    }
}

impl<H: Handler> Transport for InProcess<H> {
    fn send(&self, _request: &Request, body: &str) -> Result<String, AttemptError> {
        let response = match serde_json::from_str::<Request>(body) {
            Ok(request) => self.handler.handle(request),
            Err(e) => Response::error(format!("bad request: {e}")),
        };
        serde_json::to_string(&response).map_err(|e| AttemptError::Io(e.to_string()))
    }
}

/// Serve a [`Handler`] over a line-oriented stream until EOF.
pub fn serve_lines<H: Handler, R: BufRead, W: Write>(handler: &H, input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(request) => handler.handle(request),
            Err(e) => Response::error(format!("bad request: {e}")),
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn spawn(command: &str) -> Result<Self, AttemptError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AttemptError::Io(format!("cannot spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exit_message(&mut self) -> String {
        match self.child.wait() {
            Ok(status) => format!("adapter exited ({status})"),
            Err(e) => format!("adapter exited: {e}"),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A long-running child process speaking one JSON object per line. Each
/// slot is one process; requests on a slot are serialized on its pipe.
pub struct SubprocessTransport {
    command: String,
    timeout: Duration,
    slots: Vec<Mutex<Option<Session>>>,
    next: AtomicUsize,
}

impl SubprocessTransport {
    pub fn new(command: impl Into<String>, timeout: Duration, processes: usize) -> Self {
        SubprocessTransport {
            command: command.into(),
            timeout,
            slots: (0..processes.max(1)).map(|_| Mutex::new(None)).collect(),
            next: AtomicUsize::new(0),
        }
    }
}

impl Transport for SubprocessTransport {
    fn send(&self, _request: &Request, body: &str) -> Result<String, AttemptError> {
        let slot = self.next.fetch_add(1, Ordering::Relaxed) % self.slots.len();
        let mut guard = self.slots[slot].lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Session::spawn(&self.command)?);
        }
        let session = guard.as_mut().expect("session present");

        let written = session
            .stdin
            .write_all(body.as_bytes())
            .and_then(|_| session.stdin.write_all(b"\n"))
            .and_then(|_| session.stdin.flush());
        if let Err(e) = written {
            let msg = format!("write to adapter failed: {e}; {}", session.exit_message());
            *guard = None;
            return Err(AttemptError::Io(msg));
        }

        match session.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                *guard = None;
                Err(AttemptError::Io(format!("read from adapter failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                *guard = None;
                Err(AttemptError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let msg = session.exit_message();
                *guard = None;
                Err(AttemptError::Io(msg))
            }
        }
    }
}

/// POSTs each request body to `{base_url}/{route}`.
pub struct HttpTransport {
    base_url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &Request, body: &str) -> Result<String, AttemptError> {
        let url = format!("{}/{}", self.base_url, request.route());
        let mut response = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AttemptError::Timeout,
                other => AttemptError::Io(format!("POST {url}: {other}")),
            })?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError::Io(format!("POST {url}: {e}")))?;
        if status.is_server_error() {
            return Err(AttemptError::Io(format!("POST {url}: HTTP {status}")));
        }
        Ok(text)
    }
}
