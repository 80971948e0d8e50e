//! Adaptive decoding controller: confidence features, the logistic filter,
//! threshold-stopped decoding, calibration and Bjøntegaard metrics.

pub mod adaptive;
pub mod bd;
pub mod calibration;
pub mod features;
pub mod filter;

pub use adaptive::{
    adaptive_decode, build_training_set, first_crossing, level_budgets, write_trace,
    AdaptiveOutcome, LevelGrid, Sample, TraceRow, TrainingRow,
};
pub use bd::{bd_accuracy, bd_rate, CurvePoint};
pub use calibration::ece;
pub use features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use filter::{train_filter, FilterModel, TrainOptions};
