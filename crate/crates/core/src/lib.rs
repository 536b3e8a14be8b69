//! Generative-flow search over wavelet neural operator architectures.
//!
//! An architecture is a stack of blocks, each pairing a wavelet with an
//! activation. Two small networks learn edge flows over the tree of partial
//! architectures so that complete ones are sampled in proportion to their
//! reward.

mod error;

pub mod evaluator;
pub mod net;
pub mod oracle;
pub mod run;
pub mod space;
pub mod trainer;

pub use error::{Error, EvaluatorError, Result};
pub use evaluator::{Budget, Evaluator, ExternalEvaluator, SyntheticEvaluator, TabularEvaluator};
pub use net::{AdamState, FlowNetwork, Gradients};
pub use space::{Action, ArchitectureSpec, Block, SearchSpace, SlotKind, State, Trajectory};
pub use trainer::{train, LossMode, PolicyConfig, PolicyPair, TrainConfig, Trainer};
