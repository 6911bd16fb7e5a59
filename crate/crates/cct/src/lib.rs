//! Consensual collaborative training of small dense classifiers under label
//! noise.
//!
//! M identically-shaped networks with different initializations are trained
//! jointly on a convex combination of a supervision loss (summed
//! cross-entropy against the observed labels) and a consistency loss (KL
//! divergence over every ordered pair of network predictions). A
//! Gaussian-like ramp-up shifts the weight from supervision early on to
//! consensus later, which keeps individual networks from memorizing
//! corrupted labels. Inference averages the M probability vectors.
//!
//! The crate also ships the surrounding desk-scale experiment kit: synthetic
//! Gaussian-cluster datasets with controlled label-noise injection,
//! stratified splits, oversampling, classification metrics (accuracy, macro
//! F1, and the combined `0.67*F1 + 0.33*Acc` score), JSON checkpoints, and a
//! deterministic training loop with per-epoch logging.
//!
//! With the default `parallel` feature, per-network batch work and dataset
//! evaluation run on rayon; results are bit-identical to the sequential
//! fallback (`--no-default-features`).

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod exec;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod train;

pub use data::{Dataset, LabeledSample, NoiseKind, NoiseSpec};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use loss::{BalanceSchedule, LossBreakdown};
pub use metrics::{ConfusionMatrix, MetricReport};
pub use net::{AdamState, ForwardTrace, Gradients, Network};
pub use train::{
    train, train_with, Ensemble, EpochRecord, TrainConfig, TrainHistory, TrainOutcome,
    TrainSession,
};
