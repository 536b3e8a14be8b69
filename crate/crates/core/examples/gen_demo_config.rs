//! Regenerates the shipped demo configs under `configs/`.
//!
//! `cargo run -p fwno-core --example gen_demo_config`

use std::collections::BTreeMap;
use std::path::Path;

use fwno_core::run::{EvaluatorConfig, RunConfig};
use fwno_core::{PolicyConfig, SearchSpace, TabularEvaluator, TrainConfig};

/// Seed of the log-uniform reward table in the tabular demo.
const TABLE_SEED: u64 = 2024;

fn write(path: &Path, cfg: &RunConfig) {
    let text = format!("{}\n", serde_json::to_string_pretty(cfg).unwrap());
    RunConfig::from_json_str(&text).expect("generated config validates");
    std::fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    std::fs::create_dir_all(&root).unwrap();
    let space = SearchSpace::new(["db6", "coif6", "sym6"], ["gelu", "relu", "tanh"], 2).unwrap();
    let training = TrainConfig {
        iterations: 5000,
        batch_size: 128,
        seed: 1,
        ..TrainConfig::default()
    };
    let policy = PolicyConfig {
        hidden_dim: 64,
        ..PolicyConfig::default()
    };

    let eval = TabularEvaluator::log_uniform(&space, 0.1, 10.0, TABLE_SEED).unwrap();
    let table: BTreeMap<String, f64> = space
        .enumerate_terminals()
        .unwrap()
        .iter()
        .map(|s| {
            let arch = space.decode(s).unwrap();
            let r = eval.get(&arch).unwrap();
            (arch.to_string(), r)
        })
        .collect();
    write(
        &root.join("demo_tabular.json"),
        &RunConfig {
            search_space: space.clone(),
            policy: policy.clone(),
            training: training.clone(),
            evaluator: EvaluatorConfig::Tabular { table },
            output_dir: Some("runs/demo_tabular".into()),
        },
    );

    // two modes that differ in the first wavelet, each with about 0.37 of the mass
    let peaked = vec![20.0, 1.0, 1.0];
    write(
        &root.join("demo_synthetic.json"),
        &RunConfig {
            search_space: space,
            policy,
            training,
            evaluator: EvaluatorConfig::Synthetic {
                weights: vec![vec![8.0, 0.2, 8.0], peaked.clone(), peaked.clone(), peaked],
            },
            output_dir: Some("runs/demo_synthetic".into()),
        },
    );
}
