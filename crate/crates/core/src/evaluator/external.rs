//! Client for out-of-process evaluators speaking newline-delimited JSON.
//!
//! Framing: UTF-8, one JSON object per LF-terminated line. The evaluator
//! opens with `{"type":"hello","protocol":1,"deterministic":..,"concurrent_safe":..}`.
//! Requests carry `id`, `architecture` and `budget`; responses echo the `id`
//! with either `reward` (plus optional `metrics`) or `error`. Lines whose
//! `type` is `"log"` are collected and otherwise ignored. The engine ends the
//! session with `{"type":"shutdown"}`.
//!
//! A background thread reads the evaluator's output and routes responses to
//! waiting requests by id, so pipelined requests work when the evaluator
//! declares itself `concurrent_safe`. Otherwise requests are serialized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Budget, Evaluator};
use crate::error::EvaluatorError;
use crate::space::ArchitectureSpec;

pub const PROTOCOL_VERSION: u32 = 1;

/// Relative tolerance for the `reward == exp(-val_loss)` cross-check.
pub const REWARD_CONSISTENCY_TOL: f64 = 1e-9;

const SHUTDOWN_GRACE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub deterministic: bool,
    pub concurrent_safe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalOptions {
    pub timeout: Duration,
    pub retries: u32,
}

impl Default for ExternalOptions {
    fn default() -> Self {
        ExternalOptions {
            timeout: Duration::from_secs(600),
            retries: 1,
        }
    }
}

#[derive(Serialize)]
struct RewardRequest<'a> {
    id: u64,
    architecture: &'a ArchitectureSpec,
    budget: &'a Budget,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RewardResponse {
    pub id: i64,
    #[serde(default)]
    pub reward: Option<f64>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub error: Option<String>,
}

impl RewardResponse {
    /// Applies the reward contract: positive finite reward, consistent with
    /// `metrics.val_loss` when present.
    pub fn validated_reward(&self) -> Result<f64, EvaluatorError> {
        if let Some(msg) = &self.error {
            return Err(EvaluatorError::Remote(msg.clone()));
        }
        let reward = self.reward.ok_or_else(|| EvaluatorError::Protocol {
            message: format!("response {} has neither reward nor error", self.id),
            raw: String::new(),
        })?;
        if !(reward.is_finite() && reward > 0.0) {
            return Err(EvaluatorError::ContractViolation(format!(
                "reward {reward} is not finite and positive"
            )));
        }
        if let Some(&val_loss) = self.metrics.get("val_loss") {
            let expected = (-val_loss).exp();
            if !((reward - expected).abs() <= REWARD_CONSISTENCY_TOL * expected) {
                return Err(EvaluatorError::ContractViolation(format!(
                    "reward {reward} differs from exp(-val_loss) = {expected} (val_loss {val_loss})"
                )));
            }
        }
        Ok(reward)
    }
}

type Reply = Result<RewardResponse, EvaluatorError>;

#[derive(Default)]
struct Router {
    pending: HashMap<u64, mpsc::Sender<Reply>>,
    abandoned: HashSet<u64>,
    closed: Option<String>,
}

impl Router {
    fn fail_all(&mut self, err: EvaluatorError) {
        for (_, tx) in self.pending.drain() {
            let _ = tx.send(Err(err.clone()));
        }
    }
}

#[derive(Default)]
struct Shared {
    router: Mutex<Router>,
    logs: Mutex<Vec<String>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

enum Line {
    Log(String),
    Hello(Hello),
    Response(RewardResponse),
}

fn protocol(message: impl Into<String>, raw: &str) -> EvaluatorError {
    EvaluatorError::Protocol {
        message: message.into(),
        raw: raw.to_string(),
    }
}

fn parse_line(raw: &str) -> Result<Line, EvaluatorError> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| protocol(format!("malformed line: {e}"), raw))?;
    let Value::Object(obj) = &value else {
        return Err(protocol("line is not a JSON object", raw));
    };
    match obj.get("type") {
        Some(Value::String(t)) if t == "log" => Ok(Line::Log(raw.to_string())),
        Some(Value::String(t)) if t == "hello" => {
            let hello = Hello::deserialize(&value)
                .map_err(|e| protocol(format!("malformed hello: {e}"), raw))?;
            Ok(Line::Hello(hello))
        }
        Some(other) => Err(protocol(format!("unexpected message type {other}"), raw)),
        None => RewardResponse::deserialize(&value)
            .map(Line::Response)
            .map_err(|e| protocol(format!("malformed response: {e}"), raw)),
    }
}

fn read_frame(reader: &mut dyn BufRead) -> Result<Option<String>, EvaluatorError> {
    let mut buf = Vec::new();
    match reader.read_until(b'\n', &mut buf) {
        Ok(0) => Ok(None),
        Ok(_) => {
            if buf.last() == Some(&b'\n') {
                buf.pop();
            }
            String::from_utf8(buf)
                .map(Some)
                .map_err(|e| protocol("line is not valid UTF-8", &String::from_utf8_lossy(e.as_bytes())))
        }
        Err(e) => Err(EvaluatorError::Unavailable(format!("read failed: {e}"))),
    }
}

fn reader_loop(
    mut reader: Box<dyn BufRead + Send>,
    shared: Arc<Shared>,
    hello_tx: mpsc::Sender<Result<Hello, EvaluatorError>>,
) {
    let mut greeted = false;
    loop {
        let raw = match read_frame(reader.as_mut()) {
            Ok(Some(raw)) => raw,
            Ok(None) | Err(EvaluatorError::Unavailable(_)) => {
                let reason = "evaluator closed its output".to_string();
                if !greeted {
                    let _ = hello_tx.send(Err(EvaluatorError::Unavailable(reason.clone())));
                }
                let mut router = lock(&shared.router);
                router.closed = Some(reason.clone());
                router.fail_all(EvaluatorError::Unavailable(reason));
                return;
            }
            Err(e) => {
                if !greeted {
                    let _ = hello_tx.send(Err(e));
                    return;
                }
                lock(&shared.router).fail_all(e);
                continue;
            }
        };
        let parsed = parse_line(&raw);
        if !greeted {
            match parsed {
                Ok(Line::Log(line)) => lock(&shared.logs).push(line),
                Ok(Line::Hello(hello)) if hello.protocol == PROTOCOL_VERSION => {
                    greeted = true;
                    let _ = hello_tx.send(Ok(hello));
                }
                Ok(Line::Hello(hello)) => {
                    let _ = hello_tx.send(Err(protocol(
                        format!("unsupported protocol version {}", hello.protocol),
                        &raw,
                    )));
                    return;
                }
                Ok(Line::Response(_)) => {
                    let _ = hello_tx.send(Err(protocol("expected hello as first line", &raw)));
                    return;
                }
                Err(e) => {
                    let _ = hello_tx.send(Err(e));
                    return;
                }
            }
            continue;
        }
        let mut router = lock(&shared.router);
        match parsed {
            Ok(Line::Log(line)) => {
                drop(router);
                lock(&shared.logs).push(line);
            }
            Ok(Line::Response(resp)) => {
                let id = u64::try_from(resp.id).ok();
                match id.and_then(|id| router.pending.remove(&id)) {
                    Some(tx) => {
                        let _ = tx.send(Ok(resp));
                    }
                    None if id.is_some_and(|id| router.abandoned.remove(&id)) => {
                        drop(router);
                        lock(&shared.logs).push(format!("late response dropped: {raw}"));
                    }
                    None => router.fail_all(protocol(
                        format!("response id {} matches no outstanding request", resp.id),
                        &raw,
                    )),
                }
            }
            Ok(Line::Hello(_)) => router.fail_all(protocol("repeated hello", &raw)),
            Err(e) => {
                router.fail_all(e.clone());
                drop(router);
                lock(&shared.logs).push(format!("protocol error: {e}"));
            }
        }
    }
}

pub struct ExternalEvaluator {
    hello: Hello,
    options: ExternalOptions,
    writer: Mutex<Box<dyn Write + Send>>,
    serial: Mutex<()>,
    next_id: AtomicU64,
    shared: Arc<Shared>,
    child: Mutex<Option<Child>>,
    shut_down: AtomicBool,
}

impl std::fmt::Debug for ExternalEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEvaluator")
            .field("hello", &self.hello)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

impl ExternalEvaluator {
    /// Spawns `command` with piped stdin/stdout and waits for its hello.
    pub fn spawn(
        command: &str,
        args: &[String],
        options: ExternalOptions,
    ) -> Result<Self, EvaluatorError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvaluatorError::Unavailable(format!("cannot spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        match Self::connect(stdout, stdin, options) {
            Ok(eval) => {
                *lock(&eval.child) = Some(child);
                Ok(eval)
            }
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    /// Runs the protocol over arbitrary streams (the evaluator's output and input).
    pub fn connect(
        from_evaluator: impl Read + Send + 'static,
        to_evaluator: impl Write + Send + 'static,
        options: ExternalOptions,
    ) -> Result<Self, EvaluatorError> {
        let shared = Arc::new(Shared::default());
        let (hello_tx, hello_rx) = mpsc::channel();
        let reader: Box<dyn BufRead + Send> = Box::new(BufReader::new(from_evaluator));
        let thread_shared = Arc::clone(&shared);
        thread::Builder::new()
            .name("evaluator-reader".into())
            .spawn(move || reader_loop(reader, thread_shared, hello_tx))
            .map_err(|e| EvaluatorError::Unavailable(format!("cannot start reader: {e}")))?;
        let hello = match hello_rx.recv_timeout(options.timeout) {
            Ok(res) => res?,
            Err(_) => return Err(EvaluatorError::Timeout { attempts: 1 }),
        };
        Ok(ExternalEvaluator {
            hello,
            options,
            writer: Mutex::new(Box::new(to_evaluator)),
            serial: Mutex::new(()),
            next_id: AtomicU64::new(1),
            shared,
            child: Mutex::new(None),
            shut_down: AtomicBool::new(false),
        })
    }

    pub fn hello(&self) -> Hello {
        self.hello
    }

    fn send_line(&self, line: &str) -> Result<(), EvaluatorError> {
        let mut w = lock(&self.writer);
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| EvaluatorError::Unavailable(format!("write failed: {e}")))
    }

    /// Sends one request and waits for its response, without retries.
    fn attempt(&self, arch: &ArchitectureSpec, budget: &Budget) -> Result<Option<RewardResponse>, EvaluatorError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        {
            let mut router = lock(&self.shared.router);
            if let Some(reason) = &router.closed {
                return Err(EvaluatorError::Unavailable(reason.clone()));
            }
            router.pending.insert(id, tx);
        }
        let line = serde_json::to_string(&RewardRequest {
            id,
            architecture: arch,
            budget,
        })
        .expect("request serializes");
        if let Err(e) = self.send_line(&line) {
            lock(&self.shared.router).pending.remove(&id);
            return Err(e);
        }
        match rx.recv_timeout(self.options.timeout) {
            Ok(reply) => reply.map(Some),
            Err(RecvTimeoutError::Timeout) => {
                let mut router = lock(&self.shared.router);
                if router.pending.remove(&id).is_some() {
                    router.abandoned.insert(id);
                    return Ok(None);
                }
                drop(router);
                // the reply raced the timeout
                rx.try_recv()
                    .unwrap_or_else(|_| Err(EvaluatorError::Unavailable("reply lost".into())))
                    .map(Some)
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(EvaluatorError::Unavailable("reader stopped".into()))
            }
        }
    }

    /// Sends the shutdown message and waits for the child (if any) to exit.
    pub fn shutdown(&self) -> Result<Option<ExitStatus>, EvaluatorError> {
        if self.shut_down.swap(true, Ordering::SeqCst) {
            return Ok(None);
        }
        let sent = self.send_line(r#"{"type":"shutdown"}"#);
        let mut guard = lock(&self.child);
        let Some(child) = guard.as_mut() else {
            return sent.map(|_| None);
        };
        let deadline = Instant::now() + SHUTDOWN_GRACE.min(self.options.timeout);
        loop {
            match child.try_wait() {
                Ok(Some(status)) => return Ok(Some(status)),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                Ok(None) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(EvaluatorError::Unavailable(
                        "evaluator ignored shutdown and was killed".into(),
                    ));
                }
                Err(e) => return Err(EvaluatorError::Unavailable(format!("wait failed: {e}"))),
            }
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, arch: &ArchitectureSpec, budget: &Budget) -> Result<f64, EvaluatorError> {
        let _serial = (!self.hello.concurrent_safe).then(|| lock(&self.serial));
        let attempts = self.options.retries + 1;
        for _ in 0..attempts {
            if let Some(resp) = self.attempt(arch, budget)? {
                return resp.validated_reward();
            }
        }
        Err(EvaluatorError::Timeout { attempts })
    }

    fn deterministic(&self) -> bool {
        self.hello.deterministic
    }

    fn concurrent_safe(&self) -> bool {
        self.hello.concurrent_safe
    }

    fn drain_logs(&self) -> Vec<String> {
        std::mem::take(&mut *lock(&self.shared.logs))
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
