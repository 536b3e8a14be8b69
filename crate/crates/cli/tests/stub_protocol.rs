//! Wire-level checks of the stand-in evaluator binary.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use fwno_stub_evaluator::{pde_residual, OperatorDataset};
use serde_json::{json, Value};
use tempfile::TempDir;

const STUB: &str = env!("CARGO_BIN_EXE_fwno-stub-evaluator");

struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Session {
    fn start(args: &[&str]) -> Session {
        let mut child = Command::new(STUB)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let stdin = child.stdin.take().unwrap();
        let stdout = BufReader::new(child.stdout.take().unwrap());
        Session { child, stdin, stdout }
    }

    fn send(&mut self, line: &str) {
        writeln!(self.stdin, "{line}").unwrap();
        self.stdin.flush().unwrap();
    }

    fn recv(&mut self) -> Value {
        let mut line = String::new();
        self.stdout.read_line(&mut line).unwrap();
        assert!(line.ends_with('\n'), "unterminated line {line:?}");
        serde_json::from_str(&line).unwrap()
    }
}

fn request(id: i64, wavelet: &str, activation: &str, epochs: u32) -> String {
    json!({"id": id, "architecture": [{"wavelet": wavelet, "activation": activation}], "budget": {"epochs": epochs}}).to_string()
}

#[test]
fn hello_echo_and_shutdown() {
    let mut s = Session::start(&["--grid", "64", "--samples", "4"]);
    let hello = s.recv();
    assert_eq!(hello, json!({"type": "hello", "protocol": 1, "deterministic": true, "concurrent_safe": false}));

    let wavelets = ["db6", "coif6", "bior6.8", "rbio6.8", "sym6"];
    let activations = ["gelu", "relu", "tanh"];
    let mut state: u64 = 12345;
    for k in 0..100 {
        // xorshift for a reproducible spread of ids and architectures
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let id = (state % 1_000_000) as i64;
        let w = wavelets[(state >> 20) as usize % wavelets.len()];
        let a = activations[(state >> 30) as usize % activations.len()];
        s.send(&request(id, w, a, 20 + k % 3));
        let resp = s.recv();
        assert_eq!(resp["id"], id);
        let loss = resp["metrics"]["val_loss"].as_f64().unwrap();
        let reward = resp["reward"].as_f64().unwrap();
        assert!(reward > 0.0 && ((-loss).exp() - reward).abs() <= 1e-9 * reward);
    }

    s.send("{this is not json");
    let resp = s.recv();
    assert_eq!(resp["id"], -1);
    assert!(resp["error"].is_string());
    s.send(r#"{"id": 41, "architecture": "db6"}"#);
    assert_eq!(s.recv()["id"], 41);
    s.send(&request(42, "morlet", "gelu", 20));
    let resp = s.recv();
    assert_eq!(resp["id"], 42);
    assert!(resp["error"].as_str().unwrap().contains("morlet"));

    s.send(r#"{"type":"shutdown"}"#);
    assert_eq!(s.child.wait().unwrap().code(), Some(0));
}

#[test]
fn lower_loss_means_higher_reward() {
    let mut s = Session::start(&["--grid", "64", "--samples", "2"]);
    s.recv();
    let mut pairs = Vec::new();
    for (i, w) in ["db6", "coif6", "sym6", "bior6.8", "rbio6.8"].iter().enumerate() {
        s.send(&request(i as i64, w, "gelu", 20));
        let r = s.recv();
        pairs.push((r["metrics"]["val_loss"].as_f64().unwrap(), r["reward"].as_f64().unwrap()));
    }
    for a in &pairs {
        for b in &pairs {
            if a.0 < b.0 {
                assert!(a.1 > b.1);
            }
        }
    }
    // more epochs, lower loss
    s.send(&request(10, "db6", "gelu", 20));
    let short = s.recv()["metrics"]["val_loss"].as_f64().unwrap();
    s.send(&request(11, "db6", "gelu", 80));
    let long = s.recv()["metrics"]["val_loss"].as_f64().unwrap();
    assert!(long < short);
    s.send(r#"{"type":"shutdown"}"#);
    assert_eq!(s.child.wait().unwrap().code(), Some(0));
}

#[test]
fn eof_exits_cleanly() {
    let mut s = Session::start(&["--grid", "64", "--samples", "2"]);
    s.recv();
    drop(s.stdin);
    assert_eq!(s.child.wait().unwrap().code(), Some(0));
}

#[test]
fn dataset_cache_round_trip() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("data.npz");
    let p = path.to_str().unwrap();
    let mut s = Session::start(&["--grid", "96", "--samples", "6", "--seed", "4", "--dataset", p]);
    s.recv();
    s.send(r#"{"type":"shutdown"}"#);
    assert_eq!(s.child.wait().unwrap().code(), Some(0));

    let ds = OperatorDataset::load_npz(&path).unwrap();
    assert_eq!((ds.samples(), ds.grid()), (6, 96));
    for i in 0..6 {
        let a = ds.input.row(i).to_vec();
        let u = ds.output.row(i).to_vec();
        assert_eq!((u[0], u[95]), (0.0, 0.0));
        assert!(pde_residual(&a, &u) <= 1e-10);
    }
    let bytes = std::fs::read(&path).unwrap();

    // the cached file is reused as-is
    let mut s = Session::start(&["--grid", "96", "--samples", "6", "--seed", "9", "--dataset", p]);
    s.recv();
    s.send(r#"{"type":"shutdown"}"#);
    assert_eq!(s.child.wait().unwrap().code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), bytes);

    // a cache that disagrees with the flags is refused
    let out = Command::new(STUB).args(["--grid", "128", "--samples", "6", "--dataset", p]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(STUB).args(["--grid", "32"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
