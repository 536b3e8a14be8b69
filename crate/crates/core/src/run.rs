//! Run configuration and the on-disk artifacts of a training run.
//!
//! A run directory holds `config.json` (the effective config), `run.jsonl`
//! (one line per evaluated trajectory or skipped iteration),
//! `evaluator_log.jsonl`, `checkpoint.json` and `summary.json`. The summary
//! carries no wall-clock data or paths, so identical configs and seeds give
//! byte-identical summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluator::{
    Budget, Evaluator, ExternalEvaluator, ExternalOptions, SyntheticEvaluator, TabularEvaluator,
};
use crate::net::AdamState;
use crate::oracle::{empirical_distribution, exact_flows, policy_distribution, terminal_rewards, tv_distance};
use crate::space::{ArchitectureSpec, SearchSpace, State};
use crate::trainer::{rollout, PolicyConfig, PolicyPair, StepOutcome, TrainConfig, Trainer};

pub const VERSION: &str = concat!("fwno ", env!("CARGO_PKG_VERSION"));

/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "FWNO_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    /// Rewards keyed by slash-joined architecture, e.g. `"db6/gelu/sym6/elu"`.
    Tabular { table: BTreeMap<String, f64> },
    /// One preference table per slot.
    Synthetic { weights: Vec<Vec<f64>> },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        budget: Budget,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
        #[serde(default = "default_retries")]
        retries: u32,
        /// Overrides the evaluator's own determinism declaration.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache: Option<bool>,
    },
}

fn default_timeout_s() -> f64 {
    600.0
}

fn default_retries() -> u32 {
    1
}

impl EvaluatorConfig {
    pub fn is_external(&self) -> bool {
        matches!(self, EvaluatorConfig::External { .. })
    }

    pub fn budget(&self) -> Budget {
        match self {
            EvaluatorConfig::External { budget, .. } => *budget,
            _ => Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub search_space: SearchSpace,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub evaluator: EvaluatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Line of the first occurrence of `"key"` in `text`, 1-based.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn anchored(text: &str, key: &str, err: impl std::fmt::Display) -> Error {
    match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line}: {key}: {err}")),
        None => Error::Config(format!("{key}: {err}")),
    }
}

impl RunConfig {
    /// Parses and validates a config document; errors name the offending line.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.policy.validate().map_err(|e| anchored(text, "policy", e))?;
        cfg.training.validate().map_err(|e| anchored(text, "training", e))?;
        cfg.validate_evaluator().map_err(|(key, e)| anchored(text, key, e))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn validate_evaluator(&self) -> std::result::Result<(), (&'static str, String)> {
        let space = &self.search_space;
        match &self.evaluator {
            EvaluatorConfig::Tabular { table } => {
                let terminals = space.enumerate_terminals().map_err(|e| ("table", e.to_string()))?;
                for (key, r) in table {
                    let arch: ArchitectureSpec = key.parse().map_err(|e: Error| ("table", e.to_string()))?;
                    space.state_of(&arch).map_err(|e| ("table", format!("{key}: {e}")))?;
                    if !(r.is_finite() && *r > 0.0) {
                        return Err(("table", format!("{key}: reward {r} must be finite and > 0")));
                    }
                }
                if let Some(missing) = terminals
                    .iter()
                    .map(|s| space.decode(s).expect("enumerated terminals decode").to_string())
                    .find(|k| !table.contains_key(k))
                {
                    return Err(("table", format!("no reward for {missing}")));
                }
                Ok(())
            }
            EvaluatorConfig::Synthetic { weights } => SyntheticEvaluator::new(space.clone(), weights.clone())
                .map(|_| ())
                .map_err(|e| ("weights", e.to_string())),
            EvaluatorConfig::External {
                command,
                budget,
                timeout_s,
                ..
            } => {
                if command.is_empty() {
                    return Err(("command", "must not be empty".into()));
                }
                if budget.epochs == 0 {
                    return Err(("epochs", "must be at least 1".into()));
                }
                if !(timeout_s.is_finite() && *timeout_s > 0.0) {
                    return Err(("timeout_s", format!("{timeout_s} must be finite and > 0")));
                }
                Ok(())
            }
        }
    }

    /// The config with its output directory removed, as stored in summaries and checkpoints.
    pub fn portable(&self) -> RunConfig {
        RunConfig {
            output_dir: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the portable config's compact JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.portable()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Output directory: `override_dir`, else `output_dir`, else `runs/<hash prefix>`.
    /// Relative config paths are placed under `$FWNO_OUTPUT_ROOT` when it is set.
    pub fn resolve_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(dir) = override_dir {
            return dir.to_path_buf();
        }
        let dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.hash()[..12]));
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }
}

/// An evaluator built from config, with the caching decision it implies.
pub struct BuiltEvaluator {
    pub evaluator: Box<dyn Evaluator>,
    pub cache: bool,
    pub budget: Budget,
}

pub fn build_evaluator(cfg: &RunConfig) -> Result<BuiltEvaluator> {
    let space = &cfg.search_space;
    match &cfg.evaluator {
        EvaluatorConfig::Tabular { table } => {
            let pairs = table
                .iter()
                .map(|(k, &r)| k.parse::<ArchitectureSpec>().map(|a| (a, r)))
                .collect::<Result<Vec<_>>>()?;
            Ok(BuiltEvaluator {
                evaluator: Box::new(TabularEvaluator::new(pairs)?),
                cache: true,
                budget: Budget::default(),
            })
        }
        EvaluatorConfig::Synthetic { weights } => Ok(BuiltEvaluator {
            evaluator: Box::new(SyntheticEvaluator::new(space.clone(), weights.clone())?),
            cache: true,
            budget: Budget::default(),
        }),
        EvaluatorConfig::External {
            command,
            args,
            budget,
            timeout_s,
            retries,
            cache,
        } => {
            let options = ExternalOptions {
                timeout: Duration::from_secs_f64(*timeout_s),
                retries: *retries,
            };
            let eval = ExternalEvaluator::spawn(command, args, options)?;
            let cache = cache.unwrap_or(eval.hello().deterministic);
            Ok(BuiltEvaluator {
                evaluator: Box::new(eval),
                cache,
                budget: *budget,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub iterations_completed: usize,
    pub policy: PolicyPair,
    pub adam_wavelet: AdamState,
    pub adam_activation: AdamState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(path, text.as_bytes())
    }

    /// Loads and cross-checks a checkpoint; any defect is reported as [`Error::Checkpoint`].
    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| corrupt(e.to_string()))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if ckpt.config.hash() != ckpt.config_hash {
            return Err(corrupt("config hash does not match embedded config".into()));
        }
        let space = &ckpt.config.search_space;
        if !ckpt.policy.fits(space) {
            return Err(corrupt("network dimensions do not match the search space".into()));
        }
        for (name, net) in [("wavelet", &ckpt.policy.wavelet), ("activation", &ckpt.policy.activation)] {
            net.check().map_err(|e| corrupt(format!("{name} network: {e}")))?;
        }
        if !ckpt.adam_wavelet.matches(&ckpt.policy.wavelet) || !ckpt.adam_activation.matches(&ckpt.policy.activation) {
            return Err(corrupt("optimizer state does not match the networks".into()));
        }
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub architecture: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRow {
    pub architecture: String,
    pub visits: usize,
    pub best_reward: f64,
    pub last_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub iterations: usize,
    pub trajectories: usize,
    pub best: BestEntry,
    /// Ranked by best reward, then visits, then terminal order.
    pub visits: Vec<VisitRow>,
    pub reward_cache: bool,
    pub cache_hits: usize,
    pub evaluator_calls: usize,
    pub clamped_rewards: usize,
    pub skipped_iterations: usize,
    pub config: RunConfig,
}

impl Summary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// CSV with columns rank, architecture, visits, best_reward, last_reward.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,architecture,visits,best_reward,last_reward\n");
        for (i, row) in self.visits.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                row.architecture,
                row.visits,
                row.best_reward,
                row.last_reward
            ));
        }
        out
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SkipLine<'a> {
    iteration: usize,
    error: &'a str,
}

#[derive(Serialize)]
struct EvaluatorLogLine<'a> {
    iteration: usize,
    line: &'a str,
}

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: Summary,
    pub checkpoint: Checkpoint,
}

/// Trains per `cfg`, writing all artifacts into `out_dir`. `on_step` sees
/// every iteration as it completes.
pub fn execute_run(cfg: &RunConfig, out_dir: &Path, mut on_step: impl FnMut(&StepOutcome)) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_path = out_dir.join("config.json");
    write_atomic(&config_path, serde_json::to_string_pretty(cfg)?.as_bytes())?;

    let built = build_evaluator(cfg)?;
    let mut trainer = Trainer::new(
        cfg.search_space.clone(),
        &cfg.policy,
        cfg.training.clone(),
        built.budget,
        built.cache,
    )?;

    let log_path = out_dir.join("run.jsonl");
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(file);
    let mut logs_written = 0;
    let eval_log_path = out_dir.join("evaluator_log.jsonl");
    let mut eval_log = BufWriter::new(fs::File::create(&eval_log_path).map_err(|e| Error::io(&eval_log_path, e))?);

    let result = (|| -> Result<()> {
        while !trainer.is_finished() {
            let outcome = trainer.step(built.evaluator.as_ref());
            for (iteration, line) in &trainer.log().evaluator_logs[logs_written..] {
                serde_json::to_writer(&mut eval_log, &EvaluatorLogLine { iteration: *iteration, line })?;
                eval_log.write_all(b"\n").map_err(|e| Error::io(&eval_log_path, e))?;
            }
            logs_written = trainer.log().evaluator_logs.len();
            let outcome = outcome?;
            match &outcome {
                StepOutcome::Updated { records } => {
                    for r in records {
                        serde_json::to_writer(&mut log, r)?;
                        log.write_all(b"\n").map_err(|e| Error::io(&log_path, e))?;
                    }
                }
                StepOutcome::Skipped(s) => {
                    serde_json::to_writer(
                        &mut log,
                        &SkipLine {
                            iteration: s.iteration,
                            error: &s.error,
                        },
                    )?;
                    log.write_all(b"\n").map_err(|e| Error::io(&log_path, e))?;
                }
            }
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            on_step(&outcome);
        }
        Ok(())
    })();
    eval_log.flush().map_err(|e| Error::io(&eval_log_path, e))?;
    result?;
    drop(built);

    let iterations = trainer.iteration();
    let outcome = trainer.finish();
    let ranked = outcome.log.ranked();
    let top = ranked.first().ok_or(Error::EmptyLog)?;
    let summary = Summary {
        version: VERSION.into(),
        config_hash: cfg.hash(),
        iterations,
        trajectories: outcome.log.total_visits(),
        best: BestEntry {
            architecture: top.architecture.to_string(),
            reward: top.best_reward,
        },
        visits: ranked
            .iter()
            .map(|v| VisitRow {
                architecture: v.architecture.to_string(),
                visits: v.visits,
                best_reward: v.best_reward,
                last_reward: v.last_reward,
            })
            .collect(),
        reward_cache: outcome.log.reward_cache,
        cache_hits: outcome.log.cache_hits,
        evaluator_calls: outcome.log.evaluator_calls,
        clamped_rewards: outcome.log.clamped_rewards,
        skipped_iterations: outcome.log.skipped.len(),
        config: cfg.portable(),
    };
    let checkpoint = Checkpoint {
        version: VERSION.into(),
        config_hash: cfg.hash(),
        config: cfg.portable(),
        iterations_completed: iterations,
        policy: outcome.policy,
        adam_wavelet: outcome.adam_wavelet,
        adam_activation: outcome.adam_activation,
    };
    checkpoint.save(&out_dir.join("checkpoint.json"))?;
    write_atomic(
        &out_dir.join("summary.json"),
        format!("{}\n", serde_json::to_string_pretty(&summary)?).as_bytes(),
    )?;
    Ok(RunArtifacts {
        dir: out_dir.to_path_buf(),
        summary,
        checkpoint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub architecture: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub count: usize,
    pub seed: u64,
    /// Observed architectures in terminal order.
    pub samples: Vec<SampleRow>,
    /// Present when the checkpoint's evaluator is in-process and enumerable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_vs_oracle: Option<f64>,
}

fn draw(policy: &PolicyPair, space: &SearchSpace, count: usize, seed: u64) -> Result<Vec<State>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Ok(rollout(policy, space, 0.0, &mut rng)?.terminal().clone()))
        .collect()
}

/// Draws `count` epsilon-free rollouts from a checkpoint's networks.
pub fn sample_checkpoint(ckpt: &Checkpoint, count: usize, seed: u64) -> Result<SampleReport> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let space = &ckpt.config.search_space;
    let samples = draw(&ckpt.policy, space, count, seed)?;
    let mut counts: BTreeMap<State, usize> = BTreeMap::new();
    for s in &samples {
        *counts.entry(s.clone()).or_default() += 1;
    }
    let rows = counts
        .into_iter()
        .map(|(s, c)| {
            Ok(SampleRow {
                architecture: space.decode(&s)?.to_string(),
                count: c,
                frequency: c as f64 / count as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tv_vs_oracle = if ckpt.config.evaluator.is_external() || space.enumerate_terminals().is_err() {
        None
    } else {
        let built = build_evaluator(&ckpt.config)?;
        let rewards = terminal_rewards(space, built.evaluator.as_ref(), &built.budget)?;
        let target = exact_flows(space, &rewards)?.terminal_distribution();
        Some(tv_distance(&empirical_distribution(space, &samples)?, &target)?)
    };
    Ok(SampleReport {
        count,
        seed,
        samples: rows,
        tv_vs_oracle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub architecture: String,
    pub reward: f64,
    pub exact_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub partition: f64,
    pub terminals: Vec<OracleRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// TV between the networks' exact terminal distribution and `R/Z`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_policy: Option<f64>,
    /// TV between sampled frequencies and `R/Z`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_empirical: Option<f64>,
}

/// Exact reward-proportional distribution for `cfg`, compared against a
/// checkpoint's networks when one is given.
pub fn oracle_report(cfg: &RunConfig, ckpt: Option<&Checkpoint>, samples: usize, seed: u64) -> Result<OracleReport> {
    let space = &cfg.search_space;
    // fail on the cap before spawning anything
    let terminals = space.enumerate_terminals()?;
    if let Some(ckpt) = ckpt {
        if ckpt.config.search_space != *space {
            return Err(Error::Checkpoint {
                path: PathBuf::new(),
                reason: "checkpoint was trained on a different search space".into(),
            });
        }
    }
    let built = build_evaluator(cfg)?;
    let rewards = terminal_rewards(space, built.evaluator.as_ref(), &built.budget)?;
    drop(built);
    let target = exact_flows(space, &rewards)?.terminal_distribution();
    let (policy_p, empirical) = match ckpt {
        Some(ckpt) => {
            let p = policy_distribution(&ckpt.policy, space)?;
            let e = if samples > 0 {
                Some(empirical_distribution(space, &draw(&ckpt.policy, space, samples, seed)?)?)
            } else {
                None
            };
            (Some(p), e)
        }
        None => (None, None),
    };
    let rows = terminals
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(OracleRow {
                architecture: space.decode(s)?.to_string(),
                reward: rewards[i],
                exact_probability: target[i],
                policy_probability: policy_p.as_ref().map(|p| p[i]),
                empirical_frequency: empirical.as_ref().map(|e| e[i]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        partition: rewards.iter().sum(),
        terminals: rows,
        samples: empirical.as_ref().map(|_| samples),
        tv_policy: policy_p.as_ref().map(|p| tv_distance(p, &target)).transpose()?,
        tv_empirical: empirical.as_ref().map(|e| tv_distance(e, &target)).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
  "search_space": {"wavelets": ["w0", "w1"], "activations": ["a0", "a1"], "n_blocks": 1},
  "training": {"iterations": 30, "batch_size": 2, "seed": 3},
  "evaluator": {
    "kind": "tabular",
    "table": {"w0/a0": 1.0, "w0/a1": 2.0, "w1/a0": 3.0, "w1/a1": 4.0}
  }
}"#;

    fn temp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fwno-run-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_json_str(SMALL).unwrap();
        assert_eq!(cfg.policy, PolicyConfig::default());
        assert_eq!(cfg.training.iterations, 30);
        assert_eq!(cfg.training.exploration_epsilon, 0.0);
        assert!(cfg.output_dir.is_none());
        let back = RunConfig::from_json_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let missing = SMALL.replace(r#""wavelets": ["w0", "w1"], "#, "");
        let err = RunConfig::from_json_str(&missing).unwrap_err().to_string();
        assert!(err.contains("wavelets") && err.contains("line 2"), "{err}");

        let unknown = SMALL.replace(r#""seed": 3"#, r#""seed": 3, "lr": 1"#);
        let err = RunConfig::from_json_str(&unknown).unwrap_err().to_string();
        assert!(err.contains("lr") && err.contains("line 3"), "{err}");

        let bad_batch = SMALL.replace(r#""batch_size": 2"#, r#""batch_size": 0"#);
        let err = RunConfig::from_json_str(&bad_batch).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("batch_size"), "{err}");

        let incomplete = SMALL.replace(r#", "w1/a1": 4.0"#, "");
        let err = RunConfig::from_json_str(&incomplete).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("w1/a1"), "{err}");

        let negative = SMALL.replace("4.0", "-4.0");
        assert!(RunConfig::from_json_str(&negative).is_err());
        let foreign = SMALL.replace("w1/a1", "w9/a1");
        assert!(RunConfig::from_json_str(&foreign).is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::from_json_str(SMALL).unwrap();
        let h = a.hash();
        assert_eq!(h.len(), 64);
        a.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.training.seed = 4;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn run_directory_round_trip() {
        let cfg = RunConfig::from_json_str(SMALL).unwrap();
        let dir = temp_dir("roundtrip");
        let mut steps = 0;
        let art = execute_run(&cfg, &dir, |_| steps += 1).unwrap();
        assert_eq!(steps, 30);
        for f in ["config.json", "run.jsonl", "checkpoint.json", "summary.json", "evaluator_log.jsonl"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let lines = fs::read_to_string(dir.join("run.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 60);
        let ckpt = Checkpoint::load(&dir.join("checkpoint.json")).unwrap();
        assert_eq!(ckpt, art.checkpoint);
        let summary = Summary::load(&dir.join("summary.json")).unwrap();
        assert_eq!(summary, art.summary);
        assert_eq!(summary.trajectories, 60);
        assert!(summary.evaluator_calls <= 4);
        let csv = summary.to_csv();
        assert!(csv.starts_with("rank,architecture,visits,best_reward,last_reward\n"));
        let best: Vec<f64> = summary.visits.iter().map(|v| v.best_reward).collect();
        assert!(best.windows(2).all(|w| w[0] >= w[1]));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let cfg = RunConfig::from_json_str(SMALL).unwrap();
        let dir = temp_dir("corrupt");
        execute_run(&cfg, &dir, |_| {}).unwrap();
        let path = dir.join("checkpoint.json");
        let good = fs::read_to_string(&path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&good).unwrap();
        value["config"]["training"]["seed"] = 99.into();
        let cases = [
            good[..good.len() / 2].to_string(),
            serde_json::to_string(&value).unwrap(),
            good.replacen("\"w1\": [", "\"w1\": [1.0, ", 1),
        ];
        for (i, text) in cases.iter().enumerate() {
            fs::write(&path, text).unwrap();
            assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint { .. })), "case {i}");
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn oracle_and_sample_reports() {
        let cfg = RunConfig::from_json_str(SMALL).unwrap();
        let report = oracle_report(&cfg, None, 0, 0).unwrap();
        assert_eq!(report.partition, 10.0);
        let p: Vec<f64> = report.terminals.iter().map(|r| r.exact_probability).collect();
        assert_eq!(p, vec![0.1, 0.2, 0.3, 0.4]);
        assert!(report.tv_policy.is_none());

        let dir = temp_dir("oracle");
        let art = execute_run(&cfg, &dir, |_| {}).unwrap();
        let with = oracle_report(&cfg, Some(&art.checkpoint), 500, 1).unwrap();
        assert!(with.tv_policy.is_some() && with.tv_empirical.is_some());
        let s1 = sample_checkpoint(&art.checkpoint, 500, 1).unwrap();
        let s2 = sample_checkpoint(&art.checkpoint, 500, 1).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.samples.iter().map(|r| r.count).sum::<usize>(), 500);
        assert_eq!(s1.tv_vs_oracle, with.tv_empirical);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn oracle_cap() {
        let text = r#"{
  "search_space": {"wavelets": ["a","b","c","d","e","f","g","h","i","j"], "activations": ["x","y","z","u","v","w","p","q","r","s"], "n_blocks": 4},
  "evaluator": {"kind": "synthetic", "weights": [[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1,1,1]]}
}"#;
        let cfg = RunConfig::from_json_str(text).unwrap();
        assert!(matches!(oracle_report(&cfg, None, 0, 0), Err(Error::EnumerationTooLarge { .. })));
    }
}
