//! External scorer client.
//!
//! Speaks the line-delimited JSON scorer protocol: one request object per
//! line on the child's stdin (or an HTTP POST body), one response object per
//! line on its stdout (or the HTTP response body). Requests carry an id;
//! responses must echo it in order. Every response is validated against the
//! ScoreTriple invariants before it reaches the pipeline, and violations
//! carry the raw response text.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};
use crate::surrogate::{ScoreTriple, SurrogateModel};

#[derive(Serialize)]
struct ScoreRequest<'a> {
    id: u64,
    text: &'a str,
    aspect: Option<&'a str>,
    labels: &'a [String],
}

#[derive(Deserialize)]
struct ScoreResponse {
    id: u64,
    perplexity: f64,
    confidence: Vec<f64>,
    label: String,
}

fn parse_response(raw: &str, expected_id: u64, labels: &LabelSet) -> Result<ScoreTriple> {
    let protocol = |msg: String| Error::Protocol {
        msg,
        raw: raw.to_string(),
    };
    let resp: ScoreResponse =
        serde_json::from_str(raw).map_err(|e| protocol(format!("invalid response ({e})")))?;
    if resp.id != expected_id {
        return Err(protocol(format!(
            "response id {} does not match request id {expected_id}",
            resp.id
        )));
    }
    ScoreTriple::with_declared_label(resp.perplexity, resp.confidence, &resp.label, labels)
        .map_err(|e| protocol(e.to_string()))
}

fn encode_request(id: u64, text: &str, aspect: Option<&str>, labels: &LabelSet) -> String {
    let mut line = serde_json::to_string(&ScoreRequest {
        id,
        text,
        aspect,
        labels: labels.as_slice(),
    })
    .expect("request serializes");
    line.push('\n');
    line
}

struct ExecInner {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl Drop for ExecInner {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Scorer served by a child process. Requests are serialized through one
/// connection; a reader thread feeds responses so timeouts fire even when
/// the child never writes.
pub struct ExecScorer {
    labels: LabelSet,
    timeout: Duration,
    inner: Mutex<ExecInner>,
}

impl ExecScorer {
    /// Spawns `command` (split on whitespace; no shell quoting) and wires
    /// the protocol to its standard streams. Stderr passes through.
    pub fn spawn(command: &str, labels: LabelSet, timeout: Duration) -> Result<ExecScorer> {
        let parts: Vec<&str> = command.split_whitespace().collect();
        if parts.is_empty() {
            return Err(Error::config("external scorer command is empty"));
        }
        let mut child = Command::new(parts[0])
            .args(&parts[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Scorer(format!("failed to spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExecScorer {
            labels,
            timeout,
            inner: Mutex::new(ExecInner {
                child,
                stdin,
                lines: rx,
                next_id: 0,
            }),
        })
    }
}

impl SurrogateModel for ExecScorer {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn score(&self, text: &str, aspect: Option<&str>) -> Result<ScoreTriple> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut inner = self
            .inner
            .lock()
            .map_err(|_| Error::Scorer("scorer connection poisoned".into()))?;
        let id = inner.next_id;
        inner.next_id += 1;
        let request = encode_request(id, text, aspect, &self.labels);
        inner
            .stdin
            .write_all(request.as_bytes())
            .and_then(|_| inner.stdin.flush())
            .map_err(|e| Error::Scorer(format!("failed writing to scorer: {e}")))?;
        let deadline = Instant::now() + self.timeout;
        let raw = loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(Error::Timeout(self.timeout));
            }
            match inner.lines.recv_timeout(remaining) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => break line,
                Ok(Err(e)) => {
                    return Err(Error::Scorer(format!("failed reading from scorer: {e}")))
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(Error::Timeout(self.timeout))
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(Error::Scorer("scorer closed its output".into()))
                }
            }
        };
        parse_response(&raw, id, &self.labels)
    }
}

/// Scorer behind an HTTP endpoint accepting the same request bodies.
/// Stateless per request, so calls may fan out concurrently.
pub struct HttpScorer {
    labels: LabelSet,
    endpoint: String,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl HttpScorer {
    pub fn connect(endpoint: &str, labels: LabelSet, timeout: Duration) -> Result<HttpScorer> {
        if endpoint.trim().is_empty() {
            return Err(Error::config("external scorer endpoint is empty"));
        }
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Ok(HttpScorer {
            labels,
            endpoint: endpoint.to_string(),
            agent: config.new_agent(),
            next_id: AtomicU64::new(0),
        })
    }
}

impl SurrogateModel for HttpScorer {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn score(&self, text: &str, aspect: Option<&str>) -> Result<ScoreTriple> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = encode_request(id, text, aspect, &self.labels);
        let mut response = self
            .agent
            .post(&self.endpoint)
            .content_type("application/json")
            .send(body.as_bytes())
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => Error::Timeout(Duration::ZERO),
                other => Error::Scorer(format!("http scorer request failed: {other}")),
            })?;
        let raw = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Scorer(format!("failed reading http scorer response: {e}")))?;
        parse_response(raw.trim(), id, &self.labels)
    }
}

/// Parsed external scorer location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExternalScorerSpec {
    /// Command line to spawn, split on whitespace.
    Exec(String),
    /// HTTP(S) endpoint URL.
    Http(String),
}

impl ExternalScorerSpec {
    /// Recognizes `exec:<command>` and `http(s)://<endpoint>`. Returns
    /// `None` for anything else (such as the `lightweight` scorer name).
    pub fn parse(spec: &str) -> Option<ExternalScorerSpec> {
        if let Some(command) = spec.strip_prefix("exec:") {
            return Some(ExternalScorerSpec::Exec(command.trim().to_string()));
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Some(ExternalScorerSpec::Http(spec.to_string()));
        }
        None
    }
}

/// Connects to an external scorer. The returned model delegates `score()`
/// over the wire and never proposes substitutions.
pub fn connect_external_scorer(
    spec: &ExternalScorerSpec,
    labels: LabelSet,
    timeout: Duration,
) -> Result<Arc<dyn SurrogateModel>> {
    match spec {
        ExternalScorerSpec::Exec(command) => {
            Ok(Arc::new(ExecScorer::spawn(command, labels, timeout)?))
        }
        ExternalScorerSpec::Http(endpoint) => {
            Ok(Arc::new(HttpScorer::connect(endpoint, labels, timeout)?))
        }
    }
}
