//! Linear-probe benchmarking on frozen embeddings.
//!
//! The crate trains a class-weighted, L2-regularized multinomial logistic
//! regression on precomputed embedding vectors and measures how test-set
//! macro F1 evolves as the number of labeled examples per class grows.
//!
//! Layout:
//!
//! * [`store`]: the embedding dataset, its `EMB1` binary container, CSV
//!   ingest/export, manifests, and row normalization.
//! * [`sampling`]: seeded per-class budgets and stratified splits.
//! * [`optimizer`]: L-BFGS with a strong Wolfe line search.
//! * [`logreg`]: the probe objective, fitting and prediction.
//! * [`metrics`]: confusion matrices, per-class and macro summaries, ΔF1.
//! * [`runner`]: conditions × seeds sweeps, aggregation and report files.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the runner and
//! the command line tool use.

// `!(a <= b)` style checks are deliberate: NaN has to fail them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod logreg;
pub mod metrics;
pub mod optimizer;
pub mod runner;
pub mod sampling;
mod scalar;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Embedding dataset with 64-bit features.
pub type Dataset = store::EmbeddingDataset<f64>;
/// Fitted probe parameters with 64-bit weights.
pub type Model = logreg::ModelParams<f64>;
/// Fitted probe together with its optimizer report.
pub type FittedModel = logreg::FittedProbe<f64>;
/// Per-class loss weights in 64-bit precision.
pub type Weights = logreg::ClassWeights<f64>;
/// L-BFGS result in 64-bit precision.
pub type Outcome = optimizer::OptimizeOutcome<f64>;
