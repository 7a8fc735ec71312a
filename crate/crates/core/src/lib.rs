//! Semi-supervised node classification with pairwise Markov random fields.
//!
//! Beliefs come from linearized belief propagation, `P = Q + W P H`, where `Q`
//! holds centered node priors, `W` per-edge weights, and `H` a centered
//! coupling matrix shared by all edges. [`learn`] fits `W` and `H` to the
//! training labels by alternating single propagation steps with gradient
//! descent on a cross-entropy objective plus an optional regularizer.
//!
//! Modules, bottom up:
//!
//! * [`graph`]: compressed adjacency, edge weights, sparse propagation;
//! * [`priors`]: node priors from labels or a logistic-regression model;
//! * [`coupling`]: the coupling matrix and spectral diagnostics;
//! * [`linbp`]: propagation to a fixed point and argmax prediction;
//! * [`learn`]: the coupling/weight learner and its gradients;
//! * [`oracle`]: brute-force references used by the test suites;
//! * [`dataset`]: text formats, splits, block-model generator;
//! * [`experiment`]: runs, sweeps, reports; [`cli`] drives it from the shell.

pub mod cli;
pub mod coupling;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod learn;
pub mod linbp;
pub mod matrix;
pub mod oracle;
pub mod priors;

pub use coupling::CouplingMatrix;
pub use error::{Error, Result};
pub use graph::{EdgeWeights, SparseGraph};
pub use learn::{Hyperparams, Regularizer};
pub use linbp::BeliefMatrix;
pub use matrix::Dense;
pub use priors::PriorMatrix;
