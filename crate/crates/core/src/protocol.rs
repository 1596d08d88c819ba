//! Line-delimited JSON protocol for classifiers running as child processes.
//!
//! The child prints `gestalt-proto 1 <class_count>` on startup, then answers
//! every request line on stdin with one response line on stdout:
//!
//! ```text
//! > {"id":1,"width":28,"height":28,"channels":1,"pixels":"<base64>"}
//! < {"id":1,"scores":[0.01, ...]}
//! ```
//!
//! A child may answer `{"id":1,"error":"..."}` instead of scores.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::engine::{Classifier, ConfidenceVector};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const HANDSHAKE_PREFIX: &str = "gestalt-proto";
pub const PROTOCOL_VERSION: u32 = 1;
/// Score sums inside this range are renormalized to 1.
pub const SUM_TOLERANCE: (f64, f64) = (0.9, 1.1);
const STDERR_TAIL: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub handshake_timeout: Duration,
    pub inference_timeout: Duration,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            handshake_timeout: Duration::from_secs(10),
            inference_timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceRequest {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Base64 of the raw row-major samples.
    pub pixels: String,
}

impl InferenceRequest {
    pub fn encode(id: u64, img: &Raster) -> Self {
        Self {
            id,
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
            pixels: B64.encode(img.data()),
        }
    }

    pub fn decode(&self) -> Result<Raster> {
        let data = B64
            .decode(&self.pixels)
            .map_err(|e| Error::Protocol(format!("request {}: bad base64: {e}", self.id)))?;
        let want = self.width * self.height * self.channels;
        if data.len() != want {
            return Err(Error::Protocol(format!(
                "request {}: {} pixel bytes, expected {want}",
                self.id,
                data.len()
            )));
        }
        Raster::new(self.width, self.height, self.channels, data)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InferenceResponse {
    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Protocol(format!("malformed response `{}`: {e}", abbreviate(line))))
    }
}

fn abbreviate(s: &str) -> String {
    let s = s.trim_end();
    if s.chars().count() > 120 {
        format!("{}…", s.chars().take(120).collect::<String>())
    } else {
        s.to_string()
    }
}

pub fn handshake_line(class_count: usize) -> String {
    format!("{HANDSHAKE_PREFIX} {PROTOCOL_VERSION} {class_count}")
}

/// Class count announced by a handshake line.
pub fn parse_handshake(line: &str) -> Result<usize> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [HANDSHAKE_PREFIX, version, count] => {
            if version.parse::<u32>().ok() != Some(PROTOCOL_VERSION) {
                return Err(Error::Protocol(format!("unsupported protocol version `{version}`")));
            }
            match count.parse::<usize>() {
                Ok(c) if c >= 2 => Ok(c),
                _ => Err(Error::Protocol(format!("bad class count `{count}` in handshake"))),
            }
        }
        _ => Err(Error::Protocol(format!("garbled handshake `{}`", abbreviate(line)))),
    }
}

/// Validate a response against the expected id and class count and
/// renormalize its scores.
pub fn check_response(resp: &InferenceResponse, expected_id: u64, class_count: usize) -> Result<ConfidenceVector> {
    if resp.id != expected_id {
        return Err(Error::Protocol(format!(
            "response id {} does not match request id {expected_id}",
            resp.id
        )));
    }
    if let Some(err) = &resp.error {
        return Err(Error::Protocol(format!("classifier reported: {err}")));
    }
    let scores = resp
        .scores
        .as_ref()
        .ok_or_else(|| Error::Protocol(format!("response {} has neither scores nor error", resp.id)))?;
    if scores.len() != class_count {
        return Err(Error::Protocol(format!(
            "response {} has {} scores, expected {class_count}",
            resp.id,
            scores.len()
        )));
    }
    normalize_scores(scores)
}

/// Scale scores to sum to 1 when their sum is within [`SUM_TOLERANCE`].
pub fn normalize_scores(scores: &[f64]) -> Result<ConfidenceVector> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Protocol(format!("score {bad} is not finite and non-negative")));
    }
    let sum: f64 = scores.iter().sum();
    if !(SUM_TOLERANCE.0..=SUM_TOLERANCE.1).contains(&sum) {
        return Err(Error::Protocol(format!(
            "scores sum to {sum}, outside [{}, {}]",
            SUM_TOLERANCE.0, SUM_TOLERANCE.1
        )));
    }
    let scores = if sum == 1.0 {
        scores.to_vec()
    } else {
        scores.iter().map(|s| s / sum).collect()
    };
    ConfidenceVector::new(scores)
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    dead: Option<String>,
}

/// A classifier behind a child process. Requests are serialized per handle.
pub struct RemoteClassifier {
    session: Mutex<Session>,
    class_count: usize,
    stderr: Arc<Mutex<Vec<u8>>>,
    opts: ProtocolOptions,
    program: String,
}

impl std::fmt::Debug for RemoteClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClassifier")
            .field("program", &self.program)
            .field("class_count", &self.class_count)
            .finish()
    }
}

fn collect_tail(mut r: impl Read, sink: Arc<Mutex<Vec<u8>>>) {
    let mut buf = [0u8; 1024];
    while let Ok(n) = r.read(&mut buf) {
        if n == 0 {
            break;
        }
        let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
        s.extend_from_slice(&buf[..n]);
        if s.len() > STDERR_TAIL {
            let cut = s.len() - STDERR_TAIL;
            s.drain(..cut);
        }
    }
}

/// Start `argv` and wait for its handshake.
pub fn spawn_classifier(argv: &[String], opts: ProtocolOptions) -> Result<RemoteClassifier> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty classifier command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io(program, e))?;
    let stdin = child.stdin.take().expect("stdin piped");
    let stdout = child.stdout.take().expect("stdout piped");
    let stderr_pipe = child.stderr.take().expect("stderr piped");

    let stderr = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&stderr);
    thread::spawn(move || collect_tail(stderr_pipe, sink));

    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });

    let mut remote = RemoteClassifier {
        session: Mutex::new(Session {
            child,
            stdin,
            lines: rx,
            next_id: 1,
            dead: None,
        }),
        class_count: 0,
        stderr,
        opts,
        program: program.clone(),
    };
    let first = {
        let session = remote.session.get_mut().unwrap_or_else(|e| e.into_inner());
        session.lines.recv_timeout(opts.handshake_timeout)
    };
    let line = match first {
        Ok(Ok(line)) => line,
        Ok(Err(e)) => return Err(remote.startup_error(format!("reading handshake: {e}"))),
        Err(RecvTimeoutError::Timeout) => {
            return Err(remote.startup_error(format!(
                "no handshake within {:.1}s",
                opts.handshake_timeout.as_secs_f64()
            )))
        }
        Err(RecvTimeoutError::Disconnected) => {
            return Err(remote.startup_error("exited before handshake".into()))
        }
    };
    match parse_handshake(&line) {
        Ok(c) => {
            remote.class_count = c;
            Ok(remote)
        }
        Err(e) => Err(remote.startup_error(e.to_string())),
    }
}

impl RemoteClassifier {
    fn stderr_tail(&self) -> String {
        // give the reader thread a moment to drain a dying child
        thread::sleep(Duration::from_millis(20));
        let s = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        String::from_utf8_lossy(&s).trim().to_string()
    }

    fn startup_error(&self, what: String) -> Error {
        let tail = self.stderr_tail();
        if tail.is_empty() {
            Error::Protocol(format!("{}: {what}", self.program))
        } else {
            Error::Protocol(format!("{}: {what}; stderr: {tail}", self.program))
        }
    }

    pub fn options(&self) -> ProtocolOptions {
        self.opts
    }

    fn exchange(&self, session: &mut Session, img: &Raster) -> Result<ConfidenceVector> {
        let id = session.next_id;
        session.next_id += 1;
        let mut line = InferenceRequest::encode(id, img).to_line();
        line.push('\n');
        session
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| session.stdin.flush())
            .map_err(|e| Error::Protocol(format!("writing request {id}: {e}")))?;
        let reply = match session.lines.recv_timeout(self.opts.inference_timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(Error::Protocol(format!("reading response {id}: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!(
                    "no response to request {id} within {:.1}s",
                    self.opts.inference_timeout.as_secs_f64()
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = session.child.wait().map(|s| s.to_string()).unwrap_or_default();
                let tail = self.stderr_tail();
                return Err(Error::Protocol(format!(
                    "classifier exited ({status}) before answering request {id}{}",
                    if tail.is_empty() { String::new() } else { format!("; stderr: {tail}") }
                )));
            }
        };
        check_response(&InferenceResponse::parse(&reply)?, id, self.class_count)
    }
}

impl Classifier for RemoteClassifier {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn classify(&self, img: &Raster) -> Result<ConfidenceVector> {
        let mut session = self.session.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &session.dead {
            return Err(Error::Protocol(format!("classifier unusable after earlier failure: {reason}")));
        }
        let out = self.exchange(&mut session, img);
        if let Err(e) = &out {
            // the stream may be out of step; refuse further requests
            session.dead = Some(e.to_string());
        }
        out
    }
}

impl Drop for RemoteClassifier {
    fn drop(&mut self) {
        let session = self.session.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = session.child.kill();
        let _ = session.child.wait();
    }
}

/// Several child processes serving requests round-robin.
#[derive(Debug)]
pub struct RemotePool {
    handles: Vec<RemoteClassifier>,
    next: AtomicUsize,
}

impl RemotePool {
    pub fn spawn(argv: &[String], workers: usize, opts: ProtocolOptions) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParameter("worker count must be ≥ 1".into()));
        }
        let handles = (0..workers)
            .map(|_| spawn_classifier(argv, opts))
            .collect::<Result<Vec<_>>>()?;
        let c = handles[0].class_count();
        if let Some(h) = handles.iter().find(|h| h.class_count() != c) {
            return Err(Error::Protocol(format!(
                "workers disagree on class count: {c} vs {}",
                h.class_count()
            )));
        }
        Ok(Self {
            handles,
            next: AtomicUsize::new(0),
        })
    }
}

impl Classifier for RemotePool {
    fn class_count(&self) -> usize {
        self.handles[0].class_count()
    }

    fn classify(&self, img: &Raster) -> Result<ConfidenceVector> {
        let k = self.next.fetch_add(1, Ordering::Relaxed) % self.handles.len();
        self.handles[k].classify(img)
    }
}
