//! Selective prediction for text-to-SQL model outputs.
//!
//! Turns logged generations into abstention decisions: sequence-level
//! uncertainty scores ([`uncertainty`]), calibration maps ([`calibrate`]),
//! selective classifiers ([`select`]), evaluation metrics ([`metrics`]) and
//! distribution-shift dataset splits ([`splits`]).
//!
//! Labels use the error orientation everywhere: `1` means the predicted
//! query's execution result differs from the gold query's.

pub mod calibrate;
pub mod error;
pub mod float_serde;
pub mod io;
pub mod logistic;
pub mod metrics;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod records;
pub mod select;
pub mod splits;
pub mod synth;
pub mod uncertainty;

pub use calibrate::{
    isotonic_fit, minmax_fit, platt_fit, reliability_curve, Calibrator, CalibratorKind, ReliabilityBin,
};
pub use error::{Error, Result};
pub use metrics::{
    brier, complexity_features, f_beta, precision_recall_fdr, result_ex, risk_coverage_curve, roc_auc,
    ComplexityFeatures, ConfusionCounts, RiskCoveragePoint,
};
pub use records::{derive_label, load_log, write_log, LabeledScore, PredictionRecord, TokenInfo};
pub use select::{ClassifierKind, Decision, SelectiveClassifier};
pub use splits::{iid_split, length_split, mask_template, template_split, DatasetItem, Schema, SplitResult};
pub use synth::make_synthetic;
pub use uncertainty::{max_entropy_score, nsp_score, token_entropy, ScoreMethod, ScoreVector};
