//! Browser demo: trains the flow networks on a random reward table over the
//! 81-architecture space and exposes the learned and exact distributions.

use fwno_core::oracle::{empirical_distribution, exact_policy_distribution, policy_distribution, tv_distance};
use fwno_core::trainer::{rollout, Trainer};
use fwno_core::{Budget, Evaluator, PolicyConfig, SearchSpace, TabularEvaluator, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const WAVELETS: [&str; 3] = ["db6", "coif6", "sym6"];
const ACTIVATIONS: [&str; 3] = ["gelu", "relu", "tanh"];

#[wasm_bindgen]
pub struct Demo {
    space: SearchSpace,
    evaluator: TabularEvaluator,
    labels: Vec<String>,
    rewards: Vec<f64>,
    target: Vec<f64>,
    trainer: Trainer,
}

#[wasm_bindgen]
impl Demo {
    /// Rewards are log-uniform in [0.1, 10] drawn from `reward_seed`.
    #[wasm_bindgen(constructor)]
    pub fn new(reward_seed: u32, train_seed: u32, hidden_dim: usize, batch_size: usize) -> Result<Demo, JsError> {
        let space = SearchSpace::new(WAVELETS, ACTIVATIONS, 2)?;
        let evaluator = TabularEvaluator::log_uniform(&space, 0.1, 10.0, reward_seed.into())?;
        let terminals = space.enumerate_terminals()?;
        let mut labels = Vec::with_capacity(terminals.len());
        let mut rewards = Vec::with_capacity(terminals.len());
        for s in &terminals {
            let arch = space.decode(s)?;
            rewards.push(evaluator.evaluate(&arch, &Budget::default())?);
            labels.push(arch.to_string());
        }
        let target = exact_policy_distribution(&space, &rewards)?;
        let cfg = TrainConfig {
            iterations: 1_000_000,
            batch_size,
            seed: train_seed.into(),
            ..TrainConfig::default()
        };
        let policy = PolicyConfig {
            hidden_dim,
            ..PolicyConfig::default()
        };
        let trainer = Trainer::new(space.clone(), &policy, cfg, Budget::default(), true)?;
        Ok(Demo {
            space,
            evaluator,
            labels,
            rewards,
            target,
            trainer,
        })
    }

    /// Runs `count` more iterations; returns the total so far.
    pub fn train(&mut self, count: usize) -> Result<usize, JsError> {
        for _ in 0..count {
            self.trainer.step(&self.evaluator)?;
        }
        Ok(self.trainer.iteration())
    }

    pub fn iterations(&self) -> usize {
        self.trainer.iteration()
    }

    /// Slash-joined architecture names in terminal order.
    pub fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rewards.clone()
    }

    /// `R(x) / Z`.
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }

    /// Exact terminal distribution of the current networks.
    pub fn learned(&self) -> Result<Vec<f64>, JsError> {
        Ok(policy_distribution(self.trainer.policy(), &self.space)?)
    }

    /// Frequencies of `count` rollouts from the current networks.
    pub fn sample(&self, count: usize, seed: u32) -> Result<Vec<f64>, JsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
        let samples = (0..count.max(1))
            .map(|_| Ok(rollout(self.trainer.policy(), &self.space, 0.0, &mut rng)?.terminal().clone()))
            .collect::<fwno_core::Result<Vec<_>>>()?;
        Ok(empirical_distribution(&self.space, &samples)?)
    }

    /// Total variation distance between `p` and `R(x) / Z`.
    pub fn tv(&self, p: &[f64]) -> Result<f64, JsError> {
        Ok(tv_distance(p, &self.target)?)
    }
}
