//! Model selection, holdout prediction, and the experiment drivers that turn
//! repeated fits into [`ExperimentReport`]s.

mod experiments;
mod prediction;
mod report;
mod selection;

pub use experiments::{
    run_prediction_study, run_recovery_sweep, PredictionConfig, BASELINE_VARIANT, PredictionVariant, RecoveryConfig,
    RecoveryVariant, SweepAxis,
};
pub use prediction::{holdout_split, predict_scores, rmse, HoldoutSplit, PredictionRule};
pub use report::{ExperimentReport, MetricSummary, TrialFailure, TrialRecord};
pub use selection::{
    bic_score, cv_folds, numerical_rank, select_hyperparams, GridScore, HyperGrid, Selection, SelectionMode,
};

/// Mixes a base seed with a stream id and an index (splitmix64 finalizer), so
/// derived seeds for different purposes never collide in practice.
pub(crate) fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
