//! Exact flows and distributions for spaces small enough to enumerate.
//!
//! Terminals are always listed in lexicographic slot order, so the
//! terminals below any prefix of length `k` form one contiguous block and
//! subtree sums can be built level by level.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::evaluator::{Budget, Evaluator};
use crate::space::{Action, SearchSpace, State, DEFAULT_ENUMERATION_CAP};
use crate::trainer::PolicyPair;

/// Rewards of every terminal, in lexicographic order.
pub fn terminal_rewards(space: &SearchSpace, evaluator: &dyn Evaluator, budget: &Budget) -> Result<Vec<f64>> {
    if !evaluator.deterministic() {
        return Err(Error::NonDeterministicEvaluator(
            "exact distributions need a deterministic evaluator".into(),
        ));
    }
    space
        .enumerate_terminals()?
        .iter()
        .map(|s| {
            let arch = space.decode(s)?;
            Ok(evaluator.evaluate(&arch, budget)?)
        })
        .collect()
}

/// Edge flows that satisfy flow consistency exactly for a given reward table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactFlowTable {
    radix: Vec<usize>,
    /// `levels[k][i]`: total reward below the `i`-th prefix of length `k`.
    levels: Vec<Vec<f64>>,
}

/// Backward induction from terminal rewards to edge flows.
pub fn exact_flows(space: &SearchSpace, rewards: &[f64]) -> Result<ExactFlowTable> {
    let count = space.terminal_count();
    if count > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            count,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    if rewards.len() as u128 != count {
        return Err(Error::MismatchedSupport);
    }
    if let Some(r) = rewards.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Config(format!("reward {r} must be finite and >= 0")));
    }
    let depth = space.depth();
    let radix: Vec<usize> = (0..depth)
        .map(|pos| {
            if pos % 2 == 0 {
                space.wavelets().len()
            } else {
                space.activations().len()
            }
        })
        .collect();
    let mut levels = vec![Vec::new(); depth + 1];
    levels[depth] = rewards.to_vec();
    for k in (0..depth).rev() {
        levels[k] = levels[k + 1].chunks_exact(radix[k]).map(|c| c.iter().sum()).collect();
    }
    if levels[0][0] <= 0.0 {
        return Err(Error::ZeroPartition);
    }
    Ok(ExactFlowTable { radix, levels })
}

impl ExactFlowTable {
    fn index(&self, state: &State) -> Result<usize> {
        if state.len() >= self.levels.len() {
            return Err(Error::InvalidState(format!("length {} exceeds {}", state.len(), self.radix.len())));
        }
        let mut i = 0;
        for (pos, &idx) in state.slots().iter().enumerate() {
            if idx >= self.radix[pos] {
                return Err(Error::InvalidState(format!("slot {pos} holds index {idx}")));
            }
            i = i * self.radix[pos] + idx;
        }
        Ok(i)
    }

    /// Total reward reachable from `state`.
    pub fn state_flow(&self, state: &State) -> Result<f64> {
        Ok(self.levels[state.len()][self.index(state)?])
    }

    /// `F*(state, a)` for every action at a non-terminal `state`.
    pub fn edge_flows(&self, state: &State) -> Result<Vec<f64>> {
        let k = state.len();
        if k >= self.radix.len() {
            return Err(Error::NoActions);
        }
        let base = self.index(state)? * self.radix[k];
        Ok(self.levels[k + 1][base..base + self.radix[k]].to_vec())
    }

    pub fn edge_flow(&self, state: &State, action: Action) -> Result<f64> {
        self.edge_flows(state)?
            .get(action.0)
            .copied()
            .ok_or(Error::InvalidAction {
                index: action.0,
                kind: "action",
                available: self.radix.get(state.len()).copied().unwrap_or(0),
            })
    }

    /// `Z`, the sum of all terminal rewards.
    pub fn partition(&self) -> f64 {
        self.levels[0][0]
    }

    /// `R(x) / Z` in lexicographic terminal order.
    pub fn terminal_distribution(&self) -> Vec<f64> {
        let z = self.partition();
        self.levels[self.radix.len()].iter().map(|r| r / z).collect()
    }
}

/// Target distribution `π(x) = R(x) / Z`.
pub fn exact_policy_distribution(space: &SearchSpace, rewards: &[f64]) -> Result<Vec<f64>> {
    Ok(exact_flows(space, rewards)?.terminal_distribution())
}

/// Exact terminal distribution induced by the networks' forward policy.
pub fn policy_distribution(policy: &PolicyPair, space: &SearchSpace) -> Result<Vec<f64>> {
    let count = space.terminal_count();
    if count > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            count,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    // breadth-first over prefixes in lexicographic order
    let mut frontier: Vec<(State, f64)> = vec![(space.root(), 1.0)];
    while !space.is_terminal(&frontier[0].0) {
        let mut next = Vec::with_capacity(frontier.len() * 4);
        for (state, p) in &frontier {
            let probs = policy.action_probabilities(space, state)?;
            for (a, q) in probs.into_iter().enumerate() {
                next.push((space.apply(state, Action(a))?, p * q));
            }
        }
        frontier = next;
    }
    Ok(frontier.into_iter().map(|(_, p)| p).collect())
}

/// Empirical frequencies of `samples` over the lexicographic terminal order.
pub fn empirical_distribution(space: &SearchSpace, samples: &[State]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyLog);
    }
    let terminals = space.enumerate_terminals()?;
    let index: HashMap<&State, usize> = terminals.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut counts = vec![0usize; terminals.len()];
    for s in samples {
        let i = index
            .get(s)
            .ok_or_else(|| Error::InvalidState(format!("{:?} is not a terminal of this space", s.slots())))?;
        counts[*i] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Total variation distance `½ Σ |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::MismatchedSupport);
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::TabularEvaluator;
    use crate::trainer::rollout;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space22() -> SearchSpace {
        SearchSpace::new(["w0", "w1"], ["a0", "a1"], 1).unwrap()
    }

    #[test]
    fn two_by_two_flows() {
        let space = space22();
        let table = exact_flows(&space, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(table.partition(), 10.0);
        assert_eq!(table.edge_flows(&space.root()).unwrap(), vec![3.0, 7.0]);
        assert_eq!(table.edge_flows(&State::from_slots(vec![1])).unwrap(), vec![3.0, 4.0]);
        assert_eq!(table.edge_flow(&space.root(), Action(1)).unwrap(), 7.0);
        assert_eq!(table.terminal_distribution(), vec![0.1, 0.2, 0.3, 0.4]);
        assert!(matches!(
            table.edge_flows(&State::from_slots(vec![0, 0])),
            Err(Error::NoActions)
        ));
    }

    #[test]
    fn zero_rewards_rejected() {
        let space = space22();
        assert!(matches!(exact_flows(&space, &[0.0; 4]), Err(Error::ZeroPartition)));
        assert!(matches!(exact_flows(&space, &[1.0; 3]), Err(Error::MismatchedSupport)));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.25; 4], &[0.1, 0.2, 0.3, 0.4]).unwrap() - 0.2).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_policy_is_uniform() {
        let space = SearchSpace::new(["a", "b", "c"], ["x", "y", "z"], 2).unwrap();
        let policy = PolicyPair::zeros(&space, 4);
        let p = policy_distribution(&policy, &space).unwrap();
        assert_eq!(p.len(), 81);
        assert!(p.iter().all(|v| (v - 1.0 / 81.0).abs() < 1e-15));
    }

    #[test]
    fn empirical_matches_policy() {
        let space = space22();
        let policy = PolicyPair::init(&space, 8, 3);
        let exact = policy_distribution(&policy, &space).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<State> = (0..20_000)
            .map(|_| rollout(&policy, &space, 0.0, &mut rng).unwrap().terminal().clone())
            .collect();
        let emp = empirical_distribution(&space, &samples).unwrap();
        assert!(tv_distance(&exact, &emp).unwrap() < 0.02);
    }

    fn space_strategy() -> impl Strategy<Value = (SearchSpace, Vec<f64>)> {
        (1usize..4, 1usize..4, 1usize..3).prop_flat_map(|(nw, na, n)| {
            let space = SearchSpace::new(
                (0..nw).map(|i| format!("w{i}")),
                (0..na).map(|i| format!("a{i}")),
                n,
            )
            .unwrap();
            let count = space.terminal_count() as usize;
            (Just(space), prop::collection::vec(1e-3f64..1e3, count))
        })
    }

    proptest! {
        #[test]
        fn flows_are_consistent((space, rewards) in space_strategy()) {
            let table = exact_flows(&space, &rewards).unwrap();
            let terminals = space.enumerate_terminals().unwrap();
            let tol = 1e-9 * table.partition();
            // every non-terminal prefix: inflow equals outflow
            for t in &terminals {
                for k in 1..space.depth() {
                    let s = State::from_slots(t.slots()[..k].to_vec());
                    let inflow = table.edge_flow(&s.parent().unwrap(), Action(t.slots()[k - 1])).unwrap();
                    let outflow: f64 = table.edge_flows(&s).unwrap().iter().sum();
                    prop_assert!((inflow - outflow).abs() <= tol);
                }
            }
            // terminal inflow equals reward
            for (t, r) in terminals.iter().zip(&rewards) {
                let last = *t.slots().last().unwrap();
                let inflow = table.edge_flow(&t.parent().unwrap(), Action(last)).unwrap();
                prop_assert!((inflow - r).abs() <= 1e-12 * r.max(1.0));
            }
            let sum_root: f64 = table.edge_flows(&space.root()).unwrap().iter().sum();
            prop_assert!((sum_root - rewards.iter().sum::<f64>()).abs() <= tol);
        }

        #[test]
        fn target_distribution_normalized((space, rewards) in space_strategy(), scale in 1e-3f64..1e3) {
            let p = exact_policy_distribution(&space, &rewards).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let scaled: Vec<f64> = rewards.iter().map(|r| r * scale).collect();
            let q = exact_policy_distribution(&space, &scaled).unwrap();
            prop_assert!(tv_distance(&p, &q).unwrap() < 1e-12);
        }

        #[test]
        fn exact_flow_policy_is_reward_proportional((space, rewards) in space_strategy()) {
            // a forward policy that follows the exact edge flows reproduces R/Z
            let table = exact_flows(&space, &rewards).unwrap();
            let target = table.terminal_distribution();
            for (t, want) in space.enumerate_terminals().unwrap().iter().zip(&target) {
                let mut p = 1.0;
                for k in 0..space.depth() {
                    let s = State::from_slots(t.slots()[..k].to_vec());
                    let flows = table.edge_flows(&s).unwrap();
                    p *= flows[t.slots()[k]] / flows.iter().sum::<f64>();
                }
                prop_assert!((p - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rewards_from_evaluator() {
        let space = space22();
        let eval = TabularEvaluator::from_rewards(&space, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(terminal_rewards(&space, &eval, &Budget::default()).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
