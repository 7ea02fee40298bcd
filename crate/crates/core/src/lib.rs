//! Decentralized stochastic optimization over directed networks with
//! column-stochastic mixing.
//!
//! The crate covers the network side (mixing-matrix builders, the
//! equilibrium vector, the generalized spectral gap `1 - beta_pi` and the
//! equilibrium skewness `kappa_pi`), the Push-Sum / Push-DIGing /
//! MG-Push-DIGing algorithms, a suite of stochastic test problems, the
//! zero-chain hard instance used for lower-bound experiments, and an
//! experiment harness that writes CSV traces.

pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod lowerbound;
pub mod optimizer;
pub mod problems;
pub mod pushsum;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Digraph, MixingMatrix};
pub use harness::{ExperimentConfig, RunTrace, TraceRow};
pub use optimizer::{DigingState, StepSizeParams};
pub use problems::StochasticProblem;
pub use pushsum::PushSumState;
pub use spectral::EquilibriumProfile;
