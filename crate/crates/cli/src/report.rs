//! Report types, their published field lists, and the metric bundle shared
//! by `evaluate` and `pipeline`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use selsql::metrics::{self, operating_point, ConfusionCounts};
use selsql::{Calibrator, CalibratorKind, ClassifierKind, Decision, ScoreMethod, SelectiveClassifier};

use crate::error::{CliError, Stage, StageExt};

pub const FORMAT_VERSION: u32 = 1;

/// Keys of the top-level pipeline report object.
pub const REPORT_FIELDS: &[&str] = &[
    "format_version",
    "seed",
    "known_fraction",
    "n_records",
    "n_known",
    "n_unknown",
    "error_rate_unknown",
    "betas",
    "scores",
    "skipped",
];

/// Keys of each entry of `scores`.
pub const SCORE_FIELDS: &[&str] = &["score_method", "roc_auc", "calibration", "classifiers"];

/// Keys of each entry of `calibration`.
pub const CALIBRATION_FIELDS: &[&str] = &["calibrator", "params", "brier", "brier_sum", "n_eval"];

/// Keys of the selective-prediction metrics block.
pub const METRIC_FIELDS: &[&str] = &[
    "n_eval",
    "confusion",
    "precision",
    "recall",
    "fdr",
    "f_beta",
    "roc_auc",
    "abstention_rate",
    "result_ex",
    "result_ex_oracle",
    "result_ex_loss",
    "coverage_paper",
    "coverage_std",
    "risk_paper",
    "risk_selective",
    "risk_paper_no_abstention",
    "risk_reduction",
];

/// Keys of each entry of `classifiers`: the classifier, its fitted
/// parameters and every metric key.
pub const CLASSIFIER_FIELDS: &[&str] = &["classifier", "params"];

/// Keys of each entry of `skipped`.
pub const SKIPPED_FIELDS: &[&str] = &["score_method", "stage", "component", "reason"];

/// Keys of the report written by the `evaluate` subcommand (besides the
/// metric keys).
pub const EVALUATE_FIELDS: &[&str] = &[
    "format_version",
    "score_method",
    "score_roc_auc",
    "betas",
    "calibration",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FBetaEntry {
    pub beta: f64,
    pub value: f64,
    pub degenerate: bool,
}

/// Quality of one set of abstention decisions on the evaluation half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveMetrics {
    pub n_eval: usize,
    pub confusion: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fdr: Option<f64>,
    pub f_beta: Vec<FBetaEntry>,
    /// AUC of `p_error` against the error label; `None` with one class.
    pub roc_auc: Option<f64>,
    pub abstention_rate: f64,
    pub result_ex: f64,
    /// Result-EX when abstaining on exactly the wrong queries.
    pub result_ex_oracle: f64,
    pub result_ex_loss: f64,
    pub coverage_paper: f64,
    pub coverage_std: f64,
    pub risk_paper: f64,
    pub risk_selective: Option<f64>,
    pub risk_paper_no_abstention: f64,
    /// `1 - risk_paper / risk_paper_no_abstention`; `None` without errors.
    pub risk_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub calibrator: CalibratorKind,
    pub params: Calibrator,
    /// Mean Brier score against the correctness label.
    pub brier: f64,
    pub brier_sum: f64,
    pub n_eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub classifier: ClassifierKind,
    pub params: SelectiveClassifier,
    #[serde(flatten)]
    pub metrics: SelectiveMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score_method: ScoreMethod,
    /// AUC of the raw score against the error label.
    pub roc_auc: Option<f64>,
    pub calibration: Vec<CalibrationEntry>,
    pub classifiers: Vec<ClassifierReport>,
}

/// A calibrator or classifier that could not be fitted on the known half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub score_method: ScoreMethod,
    pub stage: String,
    pub component: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub seed: u64,
    pub known_fraction: f64,
    pub n_records: usize,
    pub n_known: usize,
    pub n_unknown: usize,
    pub error_rate_unknown: f64,
    pub betas: Vec<f64>,
    pub scores: Vec<ScoreReport>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub format_version: u32,
    pub score_method: Option<ScoreMethod>,
    pub score_roc_auc: Option<f64>,
    pub betas: Vec<f64>,
    pub calibration: Vec<CalibrationEntry>,
    #[serde(flatten)]
    pub metrics: SelectiveMetrics,
}

/// Metrics for `decisions`, whose ids must all carry a label.
pub fn selective_metrics(
    decisions: &[Decision],
    labels: &BTreeMap<String, u8>,
    betas: &[f64],
) -> Result<SelectiveMetrics, CliError> {
    let outcomes = metrics::join_labels(decisions, labels).stage(Stage::Evaluate)?;
    let n = outcomes.len();
    let confusion = ConfusionCounts::from_outcomes(&outcomes);
    let pr = metrics::precision_recall_fdr(confusion);
    let point = operating_point(&outcomes).stage(Stage::Evaluate)?;
    let baseline: Vec<(bool, u8)> = outcomes.iter().map(|&(_, y)| (false, y)).collect();
    let base = operating_point(&baseline).stage(Stage::Evaluate)?;
    let scored: Vec<(f64, u8)> = decisions
        .iter()
        .zip(&outcomes)
        .map(|(d, &(_, y))| (d.p_error, y))
        .collect();
    let roc_auc = match metrics::roc_auc(&scored) {
        Ok(a) => Some(a),
        Err(selsql::Error::SingleClass) => None,
        Err(e) => return Err(e).stage(Stage::Evaluate),
    };
    let abstained = outcomes.iter().filter(|(a, _)| *a).count();
    Ok(SelectiveMetrics {
        n_eval: n,
        confusion,
        precision: pr.precision,
        recall: pr.recall,
        fdr: pr.fdr,
        f_beta: betas
            .iter()
            .map(|&beta| {
                let f = metrics::f_beta(confusion, beta);
                FBetaEntry {
                    beta,
                    value: f.value,
                    degenerate: f.degenerate,
                }
            })
            .collect(),
        roc_auc,
        abstention_rate: abstained as f64 / n as f64,
        result_ex: point.coverage_paper,
        result_ex_oracle: base.coverage_paper,
        result_ex_loss: base.coverage_paper - point.coverage_paper,
        coverage_paper: point.coverage_paper,
        coverage_std: point.coverage_std,
        risk_paper: point.risk_paper,
        risk_selective: point.risk_selective,
        risk_paper_no_abstention: base.risk_paper,
        risk_reduction: (base.risk_paper > 0.0).then(|| 1.0 - point.risk_paper / base.risk_paper),
    })
}

fn check_keys(what: &str, value: &Value, expected: &[&str]) -> Result<(), String> {
    let obj = value
        .as_object()
        .ok_or_else(|| format!("{what} is not an object"))?;
    let mut want: Vec<&str> = expected.to_vec();
    want.sort_unstable();
    let mut got: Vec<&str> = obj.keys().map(String::as_str).collect();
    got.sort_unstable();
    if want == got {
        Ok(())
    } else {
        Err(format!("{what} has keys {got:?}, expected {want:?}"))
    }
}

fn each<'a>(what: &str, value: &'a Value, key: &str) -> Result<&'a Vec<Value>, String> {
    value[key]
        .as_array()
        .ok_or_else(|| format!("{what}.{key} is not an array"))
}

/// Checks a pipeline report against the published field lists.
pub fn validate_report(value: &Value) -> Result<(), String> {
    check_keys("report", value, REPORT_FIELDS)?;
    let classifier_fields: Vec<&str> = CLASSIFIER_FIELDS.iter().chain(METRIC_FIELDS).copied().collect();
    for score in each("report", value, "scores")? {
        check_keys("score entry", score, SCORE_FIELDS)?;
        for c in each("score entry", score, "calibration")? {
            check_keys("calibration entry", c, CALIBRATION_FIELDS)?;
        }
        for c in each("score entry", score, "classifiers")? {
            check_keys("classifier entry", c, &classifier_fields)?;
        }
    }
    for s in each("report", value, "skipped")? {
        check_keys("skipped entry", s, SKIPPED_FIELDS)?;
    }
    Ok(())
}

/// Checks an `evaluate` report against the published field lists.
pub fn validate_evaluate_report(value: &Value) -> Result<(), String> {
    let fields: Vec<&str> = EVALUATE_FIELDS.iter().chain(METRIC_FIELDS).copied().collect();
    check_keys("report", value, &fields)?;
    for c in each("report", value, "calibration")? {
        check_keys("calibration entry", c, CALIBRATION_FIELDS)?;
    }
    Ok(())
}
