//! Long-format CSV tables behind every plot of the report.

use selsql::metrics::{self, ComplexityFeatures};
use selsql::reliability_curve;

use crate::error::{CliError, Stage, StageExt};
use crate::report::SelectiveMetrics;
use crate::table::{num, opt, Table};

pub const RISK_COVERAGE: &str = "risk_coverage.csv";
pub const ROC: &str = "roc.csv";
pub const RELIABILITY: &str = "reliability.csv";
pub const FBETA_HEATMAP: &str = "fbeta_heatmap.csv";
pub const COMPLEXITY_SCATTER: &str = "complexity_scatter.csv";
pub const TRADEOFF: &str = "tradeoff.csv";

/// Every CSV the pipeline writes.
pub const CSV_FILES: [&str; 6] = [
    RISK_COVERAGE,
    ROC,
    RELIABILITY,
    FBETA_HEATMAP,
    COMPLEXITY_SCATTER,
    TRADEOFF,
];

pub fn risk_coverage_table() -> Table {
    Table::new(&[
        "score_method",
        "gamma",
        "coverage_paper",
        "coverage_std",
        "risk_paper",
        "risk_selective",
    ])
}

pub fn roc_table() -> Table {
    Table::new(&["score_method", "source", "threshold", "fpr", "tpr"])
}

pub fn reliability_table() -> Table {
    Table::new(&[
        "score_method",
        "calibrator",
        "bin_center",
        "mean_predicted",
        "empirical_frequency",
        "count",
    ])
}

pub fn fbeta_table() -> Table {
    Table::new(&["score_method", "classifier", "beta", "f_beta", "degenerate"])
}

pub fn complexity_table() -> Table {
    Table::new(&[
        "score_method",
        "classifier",
        "id",
        "p_error",
        "token_length",
        "unique_schema_elements",
        "y_error",
    ])
}

pub fn tradeoff_table() -> Table {
    Table::new(&["score_method", "calibrator", "classifier", "result_ex", "brier"])
}

/// Appends the risk/coverage sweep of `(u, y_error)` points.
pub fn push_risk_coverage(t: &mut Table, method: &str, points: &[(f64, u8)]) -> Result<(), CliError> {
    for p in metrics::risk_coverage_curve(points).stage(Stage::Evaluate)? {
        t.push(vec![
            method.into(),
            num(p.gamma),
            num(p.coverage_paper),
            num(p.coverage_std),
            num(p.risk_paper),
            opt(p.risk_selective),
        ]);
    }
    Ok(())
}

/// Appends the ROC curve of `(score, y_error)`; nothing when only one class
/// is present. Returns the `(fpr, tpr)` points written.
pub fn push_roc(
    t: &mut Table,
    method: &str,
    source: &str,
    points: &[(f64, u8)],
) -> Result<Vec<(f64, f64)>, CliError> {
    let curve = match metrics::roc_curve(points) {
        Ok(c) => c,
        Err(selsql::Error::SingleClass) => return Ok(Vec::new()),
        Err(e) => return Err(e).stage(Stage::Evaluate),
    };
    for p in &curve {
        t.push(vec![
            method.into(),
            source.into(),
            num(p.threshold),
            num(p.fpr),
            num(p.tpr),
        ]);
    }
    Ok(curve.iter().map(|p| (p.fpr, p.tpr)).collect())
}

/// Appends reliability bins of `(u^c, y_correct)`. Returns the non-empty
/// `(mean_predicted, empirical_frequency)` points.
pub fn push_reliability(
    t: &mut Table,
    method: &str,
    calibrator: &str,
    pairs: &[(f64, u8)],
    bins: usize,
) -> Result<Vec<(f64, f64)>, CliError> {
    let mut points = Vec::new();
    for b in reliability_curve(pairs, bins).stage(Stage::Evaluate)? {
        t.push(vec![
            method.into(),
            calibrator.into(),
            num(b.bin_center),
            opt(b.mean_predicted),
            opt(b.empirical_frequency),
            b.count.to_string(),
        ]);
        if let (Some(x), Some(y)) = (b.mean_predicted, b.empirical_frequency) {
            points.push((x, y));
        }
    }
    Ok(points)
}

pub fn push_fbeta(t: &mut Table, method: &str, classifier: &str, m: &SelectiveMetrics) {
    for f in &m.f_beta {
        t.push(vec![
            method.into(),
            classifier.into(),
            num(f.beta),
            num(f.value),
            f.degenerate.to_string(),
        ]);
    }
}

pub fn push_complexity(
    t: &mut Table,
    method: &str,
    classifier: &str,
    id: &str,
    p_error: f64,
    features: ComplexityFeatures,
    y_error: u8,
) {
    t.push(vec![
        method.into(),
        classifier.into(),
        id.into(),
        num(p_error),
        features.token_length.to_string(),
        features.unique_schema_elements.to_string(),
        y_error.to_string(),
    ]);
}
