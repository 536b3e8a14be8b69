//! Reward sources.
//!
//! Every evaluator maps a complete architecture to a finite, strictly
//! positive reward and declares whether it is deterministic and whether it
//! can serve concurrent requests.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvaluatorError, Result};
use crate::space::{ArchitectureSpec, SearchSpace};

pub mod external;

pub use external::{ExternalEvaluator, ExternalOptions, Hello};

/// Training budget forwarded with every request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub epochs: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { epochs: 20 }
    }
}

pub trait Evaluator: Sync {
    fn evaluate(&self, arch: &ArchitectureSpec, budget: &Budget) -> Result<f64, EvaluatorError>;

    fn deterministic(&self) -> bool;

    fn concurrent_safe(&self) -> bool;

    /// Log lines produced by the evaluator since the last call.
    fn drain_logs(&self) -> Vec<String> {
        Vec::new()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, arch: &ArchitectureSpec, budget: &Budget) -> Result<f64, EvaluatorError> {
        (**self).evaluate(arch, budget)
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }

    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }

    fn drain_logs(&self) -> Vec<String> {
        (**self).drain_logs()
    }
}

fn check_reward(what: &str, reward: f64) -> Result<f64> {
    if reward.is_finite() && reward > 0.0 {
        Ok(reward)
    } else {
        Err(Error::Config(format!("{what}: reward {reward} must be finite and > 0")))
    }
}

/// Lookup table of rewards.
#[derive(Debug, Clone)]
pub struct TabularEvaluator {
    table: HashMap<ArchitectureSpec, f64>,
}

impl TabularEvaluator {
    pub fn new(table: impl IntoIterator<Item = (ArchitectureSpec, f64)>) -> Result<Self> {
        let table = table
            .into_iter()
            .map(|(arch, r)| check_reward(&arch.to_string(), r).map(|r| (arch, r)))
            .collect::<Result<_>>()?;
        Ok(TabularEvaluator { table })
    }

    /// Rewards listed in lexicographic terminal order.
    pub fn from_rewards(space: &SearchSpace, rewards: &[f64]) -> Result<Self> {
        let terminals = space.enumerate_terminals()?;
        if terminals.len() != rewards.len() {
            return Err(Error::Config(format!(
                "{} rewards for {} terminals",
                rewards.len(),
                terminals.len()
            )));
        }
        let pairs = terminals
            .iter()
            .zip(rewards)
            .map(|(s, &r)| space.decode(s).map(|a| (a, r)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn constant(space: &SearchSpace, reward: f64) -> Result<Self> {
        let n = space.enumerate_terminals()?.len();
        Self::from_rewards(space, &vec![reward; n])
    }

    /// Rewards drawn log-uniformly in `[low, high]`, in lexicographic terminal order.
    pub fn log_uniform(space: &SearchSpace, low: f64, high: f64, seed: u64) -> Result<Self> {
        if !(low > 0.0 && high >= low && high.is_finite()) {
            return Err(Error::Config(format!("bad log-uniform range [{low}, {high}]")));
        }
        let n = space.enumerate_terminals()?.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (low.ln(), high.ln());
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi).exp()).collect();
        Self::from_rewards(space, &rewards)
    }

    pub fn get(&self, arch: &ArchitectureSpec) -> Option<f64> {
        self.table.get(arch).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Evaluator for TabularEvaluator {
    fn evaluate(&self, arch: &ArchitectureSpec, _budget: &Budget) -> Result<f64, EvaluatorError> {
        self.get(arch)
            .ok_or_else(|| EvaluatorError::UnknownArchitecture(arch.to_string()))
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Product-form reward: one positive preference table per slot, the reward
/// of an architecture is the product of the chosen entries.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    space: SearchSpace,
    weights: Vec<Vec<f64>>,
}

impl SyntheticEvaluator {
    pub fn new(space: SearchSpace, weights: Vec<Vec<f64>>) -> Result<Self, EvaluatorError> {
        if weights.len() != space.depth() {
            return Err(EvaluatorError::ShapeMismatch(format!(
                "{} slot tables for {} slots",
                weights.len(),
                space.depth()
            )));
        }
        for (slot, table) in weights.iter().enumerate() {
            let want = if slot % 2 == 0 {
                space.wavelets().len()
            } else {
                space.activations().len()
            };
            if table.len() != want {
                return Err(EvaluatorError::ShapeMismatch(format!(
                    "slot {slot} table has {} entries, expected {want}",
                    table.len()
                )));
            }
            if let Some(w) = table.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(EvaluatorError::ShapeMismatch(format!(
                    "slot {slot} weight {w} must be finite and > 0"
                )));
            }
        }
        Ok(SyntheticEvaluator { space, weights })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&self, arch: &ArchitectureSpec, _budget: &Budget) -> Result<f64, EvaluatorError> {
        let state = self
            .space
            .state_of(arch)
            .map_err(|e| EvaluatorError::ShapeMismatch(e.to_string()))?;
        Ok(state
            .slots()
            .iter()
            .zip(&self.weights)
            .map(|(&idx, table)| table[idx])
            .product())
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}
