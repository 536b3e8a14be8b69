use fwno_stub_evaluator::{generate_dataset, pde_residual, solve_diffusion, Action, OperatorDataset, ServeConfig, Server};
use serde_json::Value;

fn reply(server: &mut Server, line: &str) -> Vec<Value> {
    match server.handle(line) {
        Action::Reply(lines) => lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect(),
        Action::Shutdown => panic!("unexpected shutdown"),
    }
}

const REQ: &str = r#"{"id": 7, "architecture": [{"wavelet": "db6", "activation": "gelu"}, {"wavelet": "sym6", "activation": "tanh"}], "budget": {"epochs": 20}}"#;

#[test]
fn deterministic_server_repeats_itself() {
    let mut s = Server::new(ServeConfig::default());
    let a = reply(&mut s, REQ);
    let b = reply(&mut s, REQ);
    assert_eq!(a, b);
    assert_eq!(a[0]["id"], 7);
}

#[test]
fn nondeterministic_server_varies() {
    let mut s = Server::new(ServeConfig { deterministic: false, ..ServeConfig::default() });
    let a = reply(&mut s, REQ);
    let b = reply(&mut s, REQ);
    assert_ne!(a[0]["reward"], b[0]["reward"]);
}

#[test]
fn injected_failures_and_inconsistency() {
    let mut s = Server::new(ServeConfig { fail_every: Some(2), ..ServeConfig::default() });
    assert!(reply(&mut s, REQ)[0].get("error").is_none());
    assert!(reply(&mut s, REQ)[0]["error"].is_string());
    let mut s = Server::new(ServeConfig { inconsistent: true, ..ServeConfig::default() });
    let r = &reply(&mut s, REQ)[0];
    let loss = r["metrics"]["val_loss"].as_f64().unwrap();
    assert!(((-loss).exp() - r["reward"].as_f64().unwrap()).abs() > 1e-6);
}

#[test]
fn log_lines_precede_the_response() {
    let mut s = Server::new(ServeConfig { log_requests: true, ..ServeConfig::default() });
    let lines = reply(&mut s, REQ);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["type"], "log");
    assert_eq!(lines[1]["id"], 7);
}

#[test]
fn shutdown_is_recognized() {
    let mut s = Server::new(ServeConfig::default());
    assert_eq!(s.handle(r#"{"type": "shutdown"}"#), Action::Shutdown);
}

#[test]
fn npz_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.npz");
    let ds = generate_dataset(3, 64, 11).unwrap();
    ds.save_npz(&path).unwrap();
    let back = OperatorDataset::load_npz(&path).unwrap();
    assert_eq!(back, ds);
    for i in 0..3 {
        let a = back.input.row(i).to_vec();
        assert_eq!(solve_diffusion(&a), back.output.row(i).to_vec());
        assert!(pde_residual(&a, &solve_diffusion(&a)) <= 1e-10);
    }
}

#[test]
fn small_grids_are_rejected() {
    assert!(generate_dataset(2, 16, 0).is_err());
}
