//! Training loop, optimizers, evaluation metrics and run reports.

pub mod metrics;
pub mod optim;
pub mod report;
pub mod trainer;

pub use metrics::{evaluate, ClassMetrics, MetricsReport};
pub use optim::{adam_update, sgd_update, AdamStep, Optimizer, OptimizerKind};
pub use report::{
    compare, comparison_table, rank, ComparisonRow, RankBy, RunRecord, WALL_CLOCK_PREFIX,
};
pub use trainer::{evaluate_model, predict_all, train, Example, Precision, TrainConfig};

/// Cross-entropy of one prediction, `-w * ln(max(p_gold, 1e-12))`.
pub fn cross_entropy(probs: &[f64], gold: usize, weight: f64) -> f64 {
    -weight * probs[gold].max(1e-12).ln()
}
