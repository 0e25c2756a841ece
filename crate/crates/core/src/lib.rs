//! Lifting- and chaos-enhanced softmax classification.
//!
//! Samples of perturbed canonical basis vectors are classified by a linear softmax layer
//! trained with Adam, either directly (baseline), after a random lift to a higher
//! dimension, or after the lift has been evolved under the Lorenz 96 system. The crate also
//! provides the cluster-geometry diagnostics and the ratio-curve procedure used to choose
//! the chaotic evolution interval.
//!
//! All randomness flows from 64-bit seeds through [`seed::child_seed`], so every dataset,
//! lift, split and training run is reproducible and independent of thread count.

pub mod classifier;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod lifting;
pub mod matrix;
pub mod metrics;
pub mod seed;

pub use classifier::{
    adam_update, batch_loss, cross_entropy, loss_gradient, softmax_probs, train, AdamConfig,
    AdamState, Batch, EpochRecord, InitScheme, Termination, TrainConfig, TrainingTrace,
    WeightMatrix,
};
pub use dataset::{generate_dataset, split_stratified, DatasetSpec, LabeledDataset, SplitDataset};
pub use dynamics::{evolve_lifted, lorenz96_rhs, rk4_step, ChaosConfig};
pub use error::{Error, Result};
pub use experiment::{
    compare_models, run_model, select_interval, sweep_lift_dimensions, ComparisonReport,
    ExperimentConfig, SweepResult, Variant,
};
pub use geometry::{
    average_distance_from_centroid, centroid_distances, cluster_centroid,
    estimate_optimal_interval, intercluster_min_max, one_sided_derivative, ratio_curve, smooth3,
    weight_spread, ClusterSummary, IntervalEstimate, RatioCurve, RatioCurveConfig, TGrid,
    WeightSpreadReport,
};
pub use lifting::{lift_dataset, lift_vector, CoefficientSharing, LiftConfig, LiftedDataset};
pub use matrix::Matrix;
pub use metrics::{alignment_accuracy, proportion_accuracy, PredictionBatch};
