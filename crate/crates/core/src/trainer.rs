//! Flow-matching training of the wavelet and activation policy networks.
//!
//! Each iteration rolls out trajectories from the root by sampling actions
//! proportionally to the exponentiated network outputs, obtains terminal
//! rewards from an evaluator, and takes one Adam step per network on the
//! summed flow-consistency loss. Because the state graph is a tree, each
//! state has a single incoming edge, so the inflow of `s_j` is just
//! `F(s_{j-1}, a_j)`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvaluatorError, Result};
use crate::evaluator::{Budget, Evaluator};
use crate::net::{AdamState, FlowNetwork, ForwardCache, Gradients, DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE};
use crate::space::{Action, ArchitectureSpec, SearchSpace, SlotKind, State, Trajectory};

/// Fraction of iterations that may be skipped before a run aborts.
pub const MAX_SKIP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// `(log F_in - log(R + F_out))^2` per state.
    #[default]
    LogScale,
    /// `(F_in - F_out - R)^2` per state.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden_dim: DEFAULT_HIDDEN,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::TrainConfig("hidden_dim must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::TrainConfig("learning_rate must be finite and > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub loss_mode: LossMode,
    pub exploration_epsilon: f64,
    pub batch_size: usize,
    pub reward_floor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 500,
            loss_mode: LossMode::LogScale,
            exploration_epsilon: 0.0,
            batch_size: 1,
            reward_floor: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::TrainConfig("iterations must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::TrainConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.exploration_epsilon) {
            return Err(Error::TrainConfig("exploration_epsilon must lie in [0, 1)".into()));
        }
        if !(self.reward_floor.is_finite() && self.reward_floor > 0.0) {
            return Err(Error::TrainConfig("reward_floor must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// The wavelet-choosing and activation-choosing networks for one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub wavelet: FlowNetwork,
    pub activation: FlowNetwork,
}

impl PolicyPair {
    pub fn init(space: &SearchSpace, hidden_dim: usize, seed: u64) -> Self {
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let input = space.encoding_len();
        PolicyPair {
            wavelet: FlowNetwork::init(input, hidden_dim, space.wavelets().len(), seeds.gen()),
            activation: FlowNetwork::init(input, hidden_dim, space.activations().len(), seeds.gen()),
        }
    }

    pub fn zeros(space: &SearchSpace, hidden_dim: usize) -> Self {
        let input = space.encoding_len();
        PolicyPair {
            wavelet: FlowNetwork::zeros(input, hidden_dim, space.wavelets().len()),
            activation: FlowNetwork::zeros(input, hidden_dim, space.activations().len()),
        }
    }

    pub fn fits(&self, space: &SearchSpace) -> bool {
        let input = space.encoding_len();
        self.wavelet.input_dim() == input
            && self.activation.input_dim() == input
            && self.wavelet.output_dim() == space.wavelets().len()
            && self.activation.output_dim() == space.activations().len()
    }

    fn net(&self, kind: SlotKind) -> &FlowNetwork {
        match kind {
            SlotKind::Wavelet => &self.wavelet,
            SlotKind::Activation => &self.activation,
            SlotKind::Terminal => unreachable!("no network acts at a terminal state"),
        }
    }

    /// Log-flows of every action at a non-terminal `state`.
    pub fn log_flows(&self, space: &SearchSpace, state: &State) -> Result<Vec<f64>> {
        let kind = space.next_slot_kind(state)?;
        if kind == SlotKind::Terminal {
            return Err(Error::NoActions);
        }
        let x = space.encode(state)?;
        Ok(self.net(kind).forward(&x)?.0)
    }

    /// Forward policy `π(·|state) = F(state, ·) / Σ F(state, ·)`.
    pub fn action_probabilities(&self, space: &SearchSpace, state: &State) -> Result<Vec<f64>> {
        let logits = self.log_flows(space, state)?;
        normalized_flows(&logits).ok_or_else(|| Error::NonFiniteFlow {
            state: state.slots().to_vec(),
            flows: logits,
        })
    }
}

/// `exp(l - max)` normalized to sum one; `None` if any logit is non-finite.
fn normalized_flows(logits: &[f64]) -> Option<Vec<f64>> {
    if logits.iter().any(|l| !l.is_finite()) {
        return None;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / total).collect())
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples one complete trajectory from the root.
///
/// With probability `epsilon` an action is drawn uniformly instead of from
/// the flows; the exploration coin is only drawn when `epsilon > 0`.
pub fn rollout(
    policy: &PolicyPair,
    space: &SearchSpace,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    if !policy.fits(space) {
        return Err(Error::DimensionMismatch {
            expected: space.encoding_len(),
            actual: policy.wavelet.input_dim(),
        });
    }
    let mut state = space.root();
    let mut states = vec![state.clone()];
    let mut actions = Vec::with_capacity(space.depth());
    while !space.is_terminal(&state) {
        let probs = policy.action_probabilities(space, &state)?;
        let explore = epsilon > 0.0 && rng.gen::<f64>() < epsilon;
        let index = if explore {
            rng.gen_range(0..probs.len())
        } else {
            sample_index(&probs, rng)
        };
        state = space.apply(&state, Action(index))?;
        states.push(state.clone());
        actions.push(Action(index));
    }
    Ok(Trajectory { states, actions })
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_wavelet: Gradients,
    pub grad_activation: Gradients,
    /// Terminal reward actually used (after flooring).
    pub reward: f64,
    pub clamped: bool,
}

/// `log(r + Σ exp(l))`, with `r = 0` meaning no reward term.
fn log_sum_exp_with(r: f64, logits: &[f64]) -> f64 {
    let mut max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if r > 0.0 {
        max = max.max(r.ln());
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    if r > 0.0 {
        total += (r.ln() - max).exp();
    }
    max + total.ln()
}

/// Flow-consistency loss of one trajectory and its exact gradients.
///
/// For `j = 1..=T`: `F_in = F(s_{j-1}, a_j)`, `F_out = Σ_a F(s_j, a)` (zero at
/// the terminal) and `R(s_j)` is the terminal reward at `j = T`, zero before.
pub fn trajectory_loss(
    policy: &PolicyPair,
    space: &SearchSpace,
    trajectory: &Trajectory,
    terminal_reward: f64,
    mode: LossMode,
    reward_floor: f64,
) -> Result<LossOutput> {
    trajectory.validate(space)?;
    if !policy.fits(space) {
        return Err(Error::DimensionMismatch {
            expected: space.encoding_len(),
            actual: policy.wavelet.input_dim(),
        });
    }
    let clamped = !(terminal_reward >= reward_floor);
    let reward = if clamped { reward_floor } else { terminal_reward };

    let depth = space.depth();
    // forward every non-terminal state once
    let mut x = vec![0.0; space.encoding_len()];
    let mut passes: Vec<(SlotKind, Vec<f64>, ForwardCache)> = Vec::with_capacity(depth);
    for state in &trajectory.states[..depth] {
        let kind = space.next_slot_kind(state)?;
        space.encode_unchecked(state, &mut x);
        let (logits, cache) = policy.net(kind).forward(&x)?;
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteFlow {
                state: state.slots().to_vec(),
                flows: logits,
            });
        }
        passes.push((kind, logits, cache));
    }
    let mut upstream: Vec<Vec<f64>> = passes.iter().map(|(_, l, _)| vec![0.0; l.len()]).collect();

    let mut loss = 0.0;
    for j in 1..=depth {
        let a = trajectory.actions[j - 1].0;
        let log_in = passes[j - 1].1[a];
        let terminal = j == depth;
        let r = if terminal { reward } else { 0.0 };
        match mode {
            LossMode::Raw => {
                let f_in = log_in.exp();
                let (f_out, out_flows) = if terminal {
                    (0.0, Vec::new())
                } else {
                    let flows: Vec<f64> = passes[j].1.iter().map(|l| l.exp()).collect();
                    (flows.iter().sum(), flows)
                };
                let residual = f_in - f_out - r;
                loss += residual * residual;
                upstream[j - 1][a] += 2.0 * residual * f_in;
                for (g, f) in upstream.get_mut(j).map(|u| u.iter_mut()).into_iter().flatten().zip(&out_flows) {
                    *g -= 2.0 * residual * f;
                }
            }
            LossMode::LogScale => {
                let out_logits: &[f64] = if terminal { &[] } else { &passes[j].1 };
                let log_out = log_sum_exp_with(r, out_logits);
                let diff = log_in - log_out;
                loss += diff * diff;
                upstream[j - 1][a] += 2.0 * diff;
                if !terminal {
                    for (g, l) in upstream[j].iter_mut().zip(out_logits) {
                        *g -= 2.0 * diff * (l - log_out).exp();
                    }
                }
            }
        }
    }

    let mut grad_wavelet = Gradients::zeros_like(&policy.wavelet);
    let mut grad_activation = Gradients::zeros_like(&policy.activation);
    for ((kind, _, cache), up) in passes.iter().zip(&upstream) {
        let net = policy.net(*kind);
        let (g, _) = net.backward(cache, up)?;
        match kind {
            SlotKind::Wavelet => grad_wavelet.add_assign(&g),
            SlotKind::Activation => grad_activation.add_assign(&g),
            SlotKind::Terminal => unreachable!(),
        }
    }
    Ok(LossOutput {
        loss,
        grad_wavelet,
        grad_activation,
        reward,
        clamped,
    })
}

/// Per-state raw flow residuals `F_in - F_out - R` along a trajectory.
pub fn flow_residuals(
    policy: &PolicyPair,
    space: &SearchSpace,
    trajectory: &Trajectory,
    terminal_reward: f64,
) -> Result<Vec<f64>> {
    trajectory.validate(space)?;
    let depth = space.depth();
    let mut out = Vec::with_capacity(depth);
    for j in 1..=depth {
        let a = trajectory.actions[j - 1].0;
        let f_in = policy.log_flows(space, &trajectory.states[j - 1])?[a].exp();
        let (f_out, r) = if j == depth {
            (0.0, terminal_reward)
        } else {
            let out: f64 = policy
                .log_flows(space, &trajectory.states[j])?
                .iter()
                .map(|l| l.exp())
                .sum();
            (out, 0.0)
        };
        out.push(f_in - f_out - r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Position within the iteration's batch.
    pub trajectory: usize,
    pub architecture: ArchitectureSpec,
    pub reward: f64,
    pub loss: f64,
    pub cached: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedIteration {
    pub iteration: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitStats {
    pub architecture: ArchitectureSpec,
    pub visits: usize,
    pub best_reward: f64,
    pub last_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    pub skipped: Vec<SkippedIteration>,
    /// Keyed by terminal state, so iteration order is lexicographic.
    pub visits: BTreeMap<State, VisitStats>,
    pub reward_cache: bool,
    pub cache_hits: usize,
    pub evaluator_calls: usize,
    pub clamped_rewards: usize,
    pub evaluator_logs: Vec<(usize, String)>,
}

impl RunLog {
    fn record_visit(&mut self, state: &State, arch: &ArchitectureSpec, reward: f64) {
        let entry = self.visits.entry(state.clone()).or_insert_with(|| VisitStats {
            architecture: arch.clone(),
            visits: 0,
            best_reward: reward,
            last_reward: reward,
        });
        entry.visits += 1;
        entry.best_reward = entry.best_reward.max(reward);
        entry.last_reward = reward;
    }

    pub fn total_visits(&self) -> usize {
        self.visits.values().map(|v| v.visits).sum()
    }

    /// Visit entries sorted by best reward (descending), then visits
    /// (descending), then terminal order.
    pub fn ranked(&self) -> Vec<&VisitStats> {
        let mut entries: Vec<&VisitStats> = self.visits.values().collect();
        entries.sort_by(|a, b| {
            b.best_reward
                .total_cmp(&a.best_reward)
                .then(b.visits.cmp(&a.visits))
        });
        entries
    }
}

/// Architecture with the highest observed reward.
pub fn best_observed(log: &RunLog) -> Result<ArchitectureSpec> {
    log.ranked()
        .first()
        .map(|v| v.architecture.clone())
        .ok_or(Error::EmptyLog)
}

/// Observed architectures with their sampling frequencies, in terminal order.
pub fn sample_terminals(
    policy: &PolicyPair,
    space: &SearchSpace,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(ArchitectureSpec, f64)>> {
    let mut counts: BTreeMap<State, usize> = BTreeMap::new();
    for _ in 0..count {
        let traj = rollout(policy, space, 0.0, rng)?;
        *counts.entry(traj.terminal().clone()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(s, c)| Ok((space.decode(&s)?, c as f64 / count as f64)))
        .collect()
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub struct Stopwatch(std::time::Instant);

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(std::time::Instant::now())
        }

        pub fn seconds(&self) -> f64 {
            self.0.elapsed().as_secs_f64()
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Stopwatch;

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }

        pub fn seconds(&self) -> f64 {
            0.0
        }
    }
}

/// Result of one [`Trainer::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Updated { records: Vec<IterationRecord> },
    Skipped(SkippedIteration),
}

/// Owns the networks, optimizer states and run log for one training run.
pub struct Trainer {
    space: SearchSpace,
    cfg: TrainConfig,
    budget: Budget,
    policy: PolicyPair,
    adam_wavelet: AdamState,
    adam_activation: AdamState,
    rng: ChaCha8Rng,
    cache: Option<HashMap<State, f64>>,
    log: RunLog,
    iteration: usize,
}

pub struct TrainOutcome {
    pub policy: PolicyPair,
    pub adam_wavelet: AdamState,
    pub adam_activation: AdamState,
    pub log: RunLog,
}

impl Trainer {
    /// `cache_rewards` memoizes rewards by architecture for the whole run.
    pub fn new(
        space: SearchSpace,
        policy_cfg: &PolicyConfig,
        cfg: TrainConfig,
        budget: Budget,
        cache_rewards: bool,
    ) -> Result<Self> {
        policy_cfg.validate()?;
        cfg.validate()?;
        let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
        let policy = PolicyPair::init(&space, policy_cfg.hidden_dim, seeds.gen());
        let rng = ChaCha8Rng::seed_from_u64(seeds.gen());
        Ok(Trainer {
            adam_wavelet: AdamState::new(&policy.wavelet, policy_cfg.learning_rate),
            adam_activation: AdamState::new(&policy.activation, policy_cfg.learning_rate),
            policy,
            rng,
            cache: cache_rewards.then(HashMap::new),
            log: RunLog {
                reward_cache: cache_rewards,
                ..RunLog::default()
            },
            space,
            cfg,
            budget,
            iteration: 0,
        })
    }

    pub fn policy(&self) -> &PolicyPair {
        &self.policy
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.cfg.iterations
    }

    fn evaluate_batch(
        &mut self,
        evaluator: &dyn Evaluator,
        terminals: &[State],
        archs: &[ArchitectureSpec],
    ) -> Result<Vec<(f64, bool)>, EvaluatorError> {
        // distinct architectures that need an evaluator call, in batch order
        let mut todo: Vec<usize> = Vec::new();
        for (i, s) in terminals.iter().enumerate() {
            let cached = self.cache.as_ref().is_some_and(|c| c.contains_key(s));
            let duplicate = self.cache.is_some() && todo.iter().any(|&k| terminals[k] == *s);
            if !cached && !duplicate {
                todo.push(i);
            }
        }
        let budget = self.budget;
        // wasm32 has no threads
        let parallel = cfg!(not(target_arch = "wasm32")) && evaluator.concurrent_safe() && todo.len() > 1;
        let results: Vec<Result<f64, EvaluatorError>> = if parallel {
            std::thread::scope(|scope| {
                let handles: Vec<_> = todo
                    .iter()
                    .map(|&i| {
                        let arch = &archs[i];
                        scope.spawn(move || evaluator.evaluate(arch, &budget))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(EvaluatorError::Unavailable("evaluator panicked".into()))))
                    .collect()
            })
        } else {
            todo.iter().map(|&i| evaluator.evaluate(&archs[i], &budget)).collect()
        };
        self.log.evaluator_calls += results.len();
        let mut fresh: HashMap<usize, f64> = HashMap::new();
        for (&i, res) in todo.iter().zip(results) {
            fresh.insert(i, res?);
        }
        if let Some(cache) = self.cache.as_mut() {
            for (&i, &r) in &fresh {
                cache.insert(terminals[i].clone(), r);
            }
        }
        Ok((0..terminals.len())
            .map(|i| match fresh.get(&i) {
                Some(&r) => (r, false),
                None => (self.cache.as_ref().expect("only cached entries are skipped")[&terminals[i]], true),
            })
            .collect())
    }

    /// Runs one iteration: `batch_size` rollouts, evaluation, one Adam step per network.
    pub fn step(&mut self, evaluator: &dyn Evaluator) -> Result<StepOutcome> {
        let clock = clock::Stopwatch::start();
        let iteration = self.iteration;
        self.iteration += 1;

        let mut trajectories = Vec::with_capacity(self.cfg.batch_size);
        for _ in 0..self.cfg.batch_size {
            trajectories.push(rollout(&self.policy, &self.space, self.cfg.exploration_epsilon, &mut self.rng)?);
        }
        let terminals: Vec<State> = trajectories.iter().map(|t| t.terminal().clone()).collect();
        let archs = terminals
            .iter()
            .map(|s| self.space.decode(s))
            .collect::<Result<Vec<_>>>()?;

        let evaluated = self.evaluate_batch(evaluator, &terminals, &archs);
        for line in evaluator.drain_logs() {
            self.log.evaluator_logs.push((iteration, line));
        }
        let rewards = match evaluated {
            Ok(r) => r,
            Err(e) => {
                let skipped = SkippedIteration {
                    iteration,
                    error: e.to_string(),
                };
                self.log.skipped.push(skipped.clone());
                let limit = (MAX_SKIP_FRACTION * self.cfg.iterations as f64).floor() as usize;
                if self.log.skipped.len() > limit {
                    return Err(Error::TooManyFailures {
                        skipped: self.log.skipped.len(),
                        iterations: self.cfg.iterations,
                        last: skipped.error,
                    });
                }
                return Ok(StepOutcome::Skipped(skipped));
            }
        };

        let mut grad_w = Gradients::zeros_like(&self.policy.wavelet);
        let mut grad_a = Gradients::zeros_like(&self.policy.activation);
        let mut records = Vec::with_capacity(trajectories.len());
        for (k, (traj, &(reward, cached))) in trajectories.iter().zip(&rewards).enumerate() {
            let out = trajectory_loss(
                &self.policy,
                &self.space,
                traj,
                reward,
                self.cfg.loss_mode,
                self.cfg.reward_floor,
            )?;
            grad_w.add_assign(&out.grad_wavelet);
            grad_a.add_assign(&out.grad_activation);
            if cached {
                self.log.cache_hits += 1;
            }
            if out.clamped {
                self.log.clamped_rewards += 1;
            }
            self.log.record_visit(traj.terminal(), &archs[k], reward);
            records.push(IterationRecord {
                iteration,
                trajectory: k,
                architecture: archs[k].clone(),
                reward,
                loss: out.loss,
                cached,
                wall_time_s: 0.0,
            });
        }
        self.adam_wavelet.step(&mut self.policy.wavelet, &grad_w)?;
        self.adam_activation.step(&mut self.policy.activation, &grad_a)?;
        let elapsed = clock.seconds();
        for r in &mut records {
            r.wall_time_s = elapsed;
        }
        self.log.records.extend(records.iter().cloned());
        Ok(StepOutcome::Updated { records })
    }

    pub fn run(mut self, evaluator: &dyn Evaluator) -> Result<TrainOutcome> {
        while !self.is_finished() {
            self.step(evaluator)?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            policy: self.policy,
            adam_wavelet: self.adam_wavelet,
            adam_activation: self.adam_activation,
            log: self.log,
        }
    }
}

/// Trains both networks against `evaluator`. Rewards are cached when the
/// evaluator declares itself deterministic.
pub fn train(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    policy_cfg: &PolicyConfig,
    cfg: &TrainConfig,
    budget: Budget,
) -> Result<TrainOutcome> {
    Trainer::new(space.clone(), policy_cfg, cfg.clone(), budget, evaluator.deterministic())?.run(evaluator)
}
