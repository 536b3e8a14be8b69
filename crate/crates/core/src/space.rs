//! The alternating wavelet/activation decision tree.
//!
//! A state is the sequence of slot indices chosen so far. Even slots index
//! into the wavelet list and odd slots index into the activation list; a
//! state of length `2 * n_blocks` is terminal. Every state has exactly one
//! parent (its prefix), so the state graph is a tree rooted at the empty
//! sequence.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of terminals `enumerate_terminals` will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    wavelets: Vec<String>,
    activations: Vec<String>,
    n_blocks: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    wavelets: Vec<String>,
    activations: Vec<String>,
    n_blocks: usize,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SearchSpace::new(raw.wavelets, raw.activations, raw.n_blocks)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(space: SearchSpace) -> Self {
        RawSpace {
            wavelets: space.wavelets,
            activations: space.activations,
            n_blocks: space.n_blocks,
        }
    }
}

fn check_identifiers(kind: &str, ids: &[String]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::InvalidSpace(format!("{kind} list is empty")));
    }
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() || id.contains(['/', ',']) || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSpace(format!(
                "{kind} identifier {id:?} must be non-empty without '/', ',' or whitespace"
            )));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidSpace(format!("duplicate {kind} identifier {id:?}")));
        }
    }
    Ok(())
}

impl SearchSpace {
    pub fn new(
        wavelets: impl IntoIterator<Item = impl Into<String>>,
        activations: impl IntoIterator<Item = impl Into<String>>,
        n_blocks: usize,
    ) -> Result<Self> {
        let wavelets: Vec<String> = wavelets.into_iter().map(Into::into).collect();
        let activations: Vec<String> = activations.into_iter().map(Into::into).collect();
        check_identifiers("wavelet", &wavelets)?;
        check_identifiers("activation", &activations)?;
        if n_blocks == 0 {
            return Err(Error::InvalidSpace("n_blocks must be at least 1".into()));
        }
        Ok(SearchSpace {
            wavelets,
            activations,
            n_blocks,
        })
    }

    pub fn wavelets(&self) -> &[String] {
        &self.wavelets
    }

    pub fn activations(&self) -> &[String] {
        &self.activations
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Number of actions in a complete trajectory.
    pub fn depth(&self) -> usize {
        2 * self.n_blocks
    }

    /// Width of the one-hot state encoding.
    pub fn encoding_len(&self) -> usize {
        self.n_blocks * (self.wavelets.len() + self.activations.len())
    }

    /// `(|W|·|A|)^n_blocks`, saturating at `u128::MAX`.
    pub fn terminal_count(&self) -> u128 {
        let per_block = (self.wavelets.len() as u128) * (self.activations.len() as u128);
        (0..self.n_blocks).fold(1u128, |acc, _| acc.saturating_mul(per_block))
    }

    /// Number of choices available at a slot of the given kind.
    pub fn choices(&self, kind: SlotKind) -> usize {
        match kind {
            SlotKind::Wavelet => self.wavelets.len(),
            SlotKind::Activation => self.activations.len(),
            SlotKind::Terminal => 0,
        }
    }

    pub fn root(&self) -> State {
        State::default()
    }

    fn validate(&self, state: &State) -> Result<()> {
        if state.len() > self.depth() {
            return Err(Error::InvalidState(format!(
                "length {} exceeds {}",
                state.len(),
                self.depth()
            )));
        }
        for (pos, &idx) in state.0.iter().enumerate() {
            let limit = if pos % 2 == 0 {
                self.wavelets.len()
            } else {
                self.activations.len()
            };
            if idx >= limit {
                return Err(Error::InvalidState(format!(
                    "slot {pos} holds index {idx}, only {limit} choices"
                )));
            }
        }
        Ok(())
    }

    pub fn next_slot_kind(&self, state: &State) -> Result<SlotKind> {
        self.validate(state)?;
        Ok(self.kind_at(state.len()))
    }

    fn kind_at(&self, len: usize) -> SlotKind {
        if len == self.depth() {
            SlotKind::Terminal
        } else if len % 2 == 0 {
            SlotKind::Wavelet
        } else {
            SlotKind::Activation
        }
    }

    pub fn is_terminal(&self, state: &State) -> bool {
        state.len() == self.depth()
    }

    /// Returns `state` with `action` appended; the input is left untouched.
    pub fn apply(&self, state: &State, action: Action) -> Result<State> {
        let kind = self.next_slot_kind(state)?;
        if kind == SlotKind::Terminal {
            return Err(Error::NoActions);
        }
        let available = self.choices(kind);
        if action.0 >= available {
            return Err(Error::InvalidAction {
                index: action.0,
                kind: kind.name(),
                available,
            });
        }
        let mut next = state.clone();
        next.0.push(action.0);
        Ok(next)
    }

    /// Positional one-hot encoding; unfilled segments stay zero.
    pub fn encode(&self, state: &State) -> Result<Vec<f64>> {
        self.validate(state)?;
        let mut out = vec![0.0; self.encoding_len()];
        self.encode_unchecked(state, &mut out);
        Ok(out)
    }

    pub(crate) fn encode_unchecked(&self, state: &State, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let block = self.wavelets.len() + self.activations.len();
        for (pos, &idx) in state.0.iter().enumerate() {
            let base = (pos / 2) * block;
            let offset = if pos % 2 == 0 {
                idx
            } else {
                self.wavelets.len() + idx
            };
            out[base + offset] = 1.0;
        }
    }

    pub fn enumerate_terminals(&self) -> Result<Vec<State>> {
        self.enumerate_terminals_capped(DEFAULT_ENUMERATION_CAP)
    }

    /// All terminal states in lexicographic order over slot indices.
    pub fn enumerate_terminals_capped(&self, cap: u128) -> Result<Vec<State>> {
        let count = self.terminal_count();
        if count > cap {
            return Err(Error::EnumerationTooLarge { count, cap });
        }
        let depth = self.depth();
        let radix: Vec<usize> = (0..depth).map(|pos| self.choices(self.kind_at(pos))).collect();
        let mut out = Vec::with_capacity(count as usize);
        let mut digits = vec![0usize; depth];
        loop {
            out.push(State(digits.clone()));
            // odometer increment, last slot fastest
            let mut pos = depth;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < radix[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    pub fn decode(&self, state: &State) -> Result<ArchitectureSpec> {
        self.validate(state)?;
        if !self.is_terminal(state) {
            return Err(Error::InvalidState(format!(
                "cannot decode non-terminal state of length {}",
                state.len()
            )));
        }
        let blocks = state
            .0
            .chunks_exact(2)
            .map(|pair| Block {
                wavelet: self.wavelets[pair[0]].clone(),
                activation: self.activations[pair[1]].clone(),
            })
            .collect();
        Ok(ArchitectureSpec { blocks })
    }

    /// Inverse of [`SearchSpace::decode`].
    pub fn state_of(&self, arch: &ArchitectureSpec) -> Result<State> {
        if arch.blocks.len() != self.n_blocks {
            return Err(Error::InvalidState(format!(
                "architecture has {} blocks, space has {}",
                arch.blocks.len(),
                self.n_blocks
            )));
        }
        let mut slots = Vec::with_capacity(self.depth());
        for block in &arch.blocks {
            let w = self
                .wavelets
                .iter()
                .position(|w| *w == block.wavelet)
                .ok_or_else(|| Error::InvalidState(format!("unknown wavelet {:?}", block.wavelet)))?;
            let a = self
                .activations
                .iter()
                .position(|a| *a == block.activation)
                .ok_or_else(|| {
                    Error::InvalidState(format!("unknown activation {:?}", block.activation))
                })?;
            slots.push(w);
            slots.push(a);
        }
        Ok(State(slots))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Wavelet,
    Activation,
    Terminal,
}

impl SlotKind {
    pub fn name(self) -> &'static str {
        match self {
            SlotKind::Wavelet => "wavelet",
            SlotKind::Activation => "activation",
            SlotKind::Terminal => "terminal",
        }
    }
}

/// Slot indices chosen so far. Ordering is lexicographic over the indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<usize>);

impl State {
    pub fn from_slots(slots: Vec<usize>) -> Self {
        State(slots)
    }

    pub fn slots(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<State> {
        if self.0.is_empty() {
            None
        } else {
            Some(State(self.0[..self.0.len() - 1].to_vec()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
}

impl Trajectory {
    pub fn terminal(&self) -> &State {
        self.states.last().expect("trajectory holds at least the root")
    }

    /// Checks the append chain from the root to a terminal of `space`.
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        let depth = space.depth();
        if self.actions.len() != depth || self.states.len() != depth + 1 {
            return Err(Error::IncompleteTrajectory(format!(
                "{} actions / {} states, expected {} / {}",
                self.actions.len(),
                self.states.len(),
                depth,
                depth + 1
            )));
        }
        if !self.states[0].is_empty() {
            return Err(Error::IncompleteTrajectory("does not start at the root".into()));
        }
        for (j, action) in self.actions.iter().enumerate() {
            let expected = space.apply(&self.states[j], *action)?;
            if expected != self.states[j + 1] {
                return Err(Error::IncompleteTrajectory(format!(
                    "state {} is not its parent plus action",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub wavelet: String,
    pub activation: String,
}

/// One (wavelet, activation) pair per wavelet integral block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchitectureSpec {
    pub blocks: Vec<Block>,
}

impl ArchitectureSpec {
    pub fn new(pairs: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>) -> Self {
        ArchitectureSpec {
            blocks: pairs
                .into_iter()
                .map(|(w, a)| Block {
                    wavelet: w.into(),
                    activation: a.into(),
                })
                .collect(),
        }
    }
}

/// Slash-joined form, e.g. `db6/gelu/sym6/elu`.
impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{}/{}", block.wavelet, block.activation)?;
        }
        Ok(())
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() % 2 != 0 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidState(format!(
                "{s:?} is not a slash-joined list of wavelet/activation pairs"
            )));
        }
        Ok(ArchitectureSpec::new(
            parts.chunks_exact(2).map(|pair| (pair[0], pair[1])),
        ))
    }
}
