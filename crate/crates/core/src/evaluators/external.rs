//! Evaluation by a child process speaking line-delimited JSON.
//!
//! Request:  `{"id": 7, "genome": {...}, "epochs": 60, "num_classes": 4}`
//! Response: `{"id": 7, "mc_dice_train": 3.1, "mc_dice_val": 2.9, "e_max": 41}`
//!
//! A worker may instead answer `{"id": 7, "error": "..."}`. Responses are
//! matched by id; lines for ids other than the pending request are dropped.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator};
use crate::genome::Genome;
use crate::objectives::{ObjectiveConfig, TrainingMetrics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub genome: Genome,
    pub epochs: u32,
    pub num_classes: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    pub mc_dice_train: f64,
    pub mc_dice_val: f64,
    pub e_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub error: String,
}

/// Any line a worker may emit.
#[derive(Clone, Debug, PartialEq)]
pub enum WireReply {
    Metrics(WireResponse),
    Error(WireError),
}

impl WireReply {
    pub fn parse(line: &str) -> Result<Self, EvalError> {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| EvalError::Protocol(format!("malformed line `{line}`: {e}")))?;
        if value.get("error").is_some() {
            serde_json::from_value(value)
                .map(WireReply::Error)
                .map_err(|e| EvalError::Protocol(format!("malformed error line `{line}`: {e}")))
        } else {
            serde_json::from_value(value)
                .map(WireReply::Metrics)
                .map_err(|e| EvalError::Protocol(format!("malformed response `{line}`: {e}")))
        }
    }

    fn id(&self) -> Option<u64> {
        match self {
            WireReply::Metrics(r) => Some(r.id),
            WireReply::Error(e) => e.id,
        }
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
}

impl Worker {
    fn spawn(command: &str, args: &[String]) -> Result<Self, EvalError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| EvalError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker { child, stdin, lines })
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct Session {
    worker: Option<Worker>,
    next_id: u64,
    /// The last exchange found the worker gone before it said anything.
    lost: bool,
}

/// Evaluator delegating to one child process, spawned lazily and respawned
/// after a timeout or crash. Calls are serialized.
pub struct ExternalEvaluator {
    command: String,
    args: Vec<String>,
    timeout: Duration,
    session: Mutex<Session>,
}

impl ExternalEvaluator {
    pub fn new(command: String, args: Vec<String>, timeout_secs: f64) -> Self {
        ExternalEvaluator {
            command,
            args,
            timeout: Duration::from_secs_f64(timeout_secs),
            session: Mutex::new(Session {
                worker: None,
                next_id: 0,
                lost: false,
            }),
        }
    }

    /// Sends `request`, respawning once if a worker left over from an earlier
    /// call turns out to have exited.
    fn exchange(&self, session: &mut Session, request: &WireRequest) -> Result<WireResponse, EvalError> {
        let reused = session.worker.is_some();
        match self.try_exchange(session, request) {
            Err(EvalError::Protocol(_)) if reused && session.lost => self.try_exchange(session, request),
            other => other,
        }
    }

    fn try_exchange(&self, session: &mut Session, request: &WireRequest) -> Result<WireResponse, EvalError> {
        session.lost = false;
        if session.worker.is_none() {
            session.worker = Some(Worker::spawn(&self.command, &self.args)?);
        }
        let worker = session.worker.as_mut().expect("worker just spawned");
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        if let Err(e) = worker
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| worker.stdin.flush())
        {
            session.worker = None;
            session.lost = true;
            return Err(EvalError::Protocol(format!("worker stdin closed: {e}")));
        }

        let deadline = Instant::now() + self.timeout;
        let mut heard = false;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match worker.lines.recv_timeout(left) {
                Ok(Ok(text)) => {
                    if text.trim().is_empty() {
                        continue;
                    }
                    heard = true;
                    let reply = WireReply::parse(&text)?;
                    match (reply.id(), reply) {
                        (Some(id), _) if id != request.id => continue,
                        (_, WireReply::Error(e)) => return Err(EvalError::Worker(e.error)),
                        (_, WireReply::Metrics(r)) => return Ok(r),
                    }
                }
                Ok(Err(e)) => {
                    session.worker = None;
                    return Err(EvalError::Protocol(format!("reading worker output: {e}")));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    session.worker = None;
                    session.lost = !heard;
                    return Err(EvalError::Protocol("worker exited".into()));
                }
                Err(RecvTimeoutError::Timeout) => {
                    session.worker = None;
                    return Err(EvalError::Timeout(self.timeout.as_secs_f64()));
                }
            }
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, g: &Genome, cfg: &ObjectiveConfig) -> Result<TrainingMetrics, EvalError> {
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let id = session.next_id;
        session.next_id += 1;
        let request = WireRequest {
            id,
            genome: *g,
            epochs: cfg.total_epochs,
            num_classes: cfg.num_classes,
        };
        let r = self.exchange(&mut session, &request)?;
        let m = TrainingMetrics {
            mc_dice_train: r.mc_dice_train,
            mc_dice_val: r.mc_dice_val,
            e_max: r.e_max,
            total_epochs: cfg.total_epochs,
        };
        m.check(cfg)
            .map_err(|e| EvalError::Protocol(format!("response {id}: {e}")))?;
        Ok(m)
    }
}

/// Worker-side request loop: answers every request line through `handler`
/// until end of input. Malformed lines get an error reply carrying the id
/// when one can be recovered.
pub fn serve<R, W, F>(input: R, mut output: W, mut handler: F) -> io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&WireRequest) -> Result<TrainingMetrics, String>,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<WireRequest>(&line) {
            Ok(req) => match handler(&req) {
                Ok(m) => serde_json::to_string(&WireResponse {
                    id: req.id,
                    mc_dice_train: m.mc_dice_train,
                    mc_dice_val: m.mc_dice_val,
                    e_max: m.e_max,
                }),
                Err(error) => serde_json::to_string(&WireError {
                    id: Some(req.id),
                    error,
                }),
            },
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
                serde_json::to_string(&WireError {
                    id,
                    error: format!("protocol-error: {e}"),
                })
            }
        }
        .expect("reply serializes");
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
