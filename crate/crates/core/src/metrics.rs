//! Evaluation quantities for selective text-to-SQL prediction.
//!
//! The positive class throughout is "the query is wrong" (label 1), and a
//! classifier "predicts positive" when it abstains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_serde;
use crate::select::{threshold_candidates, Decision};
use crate::splits::lexer::{lex_sql, TokenKind};
use crate::splits::template::{classify_identifiers, IdentRole};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted_error: bool, is_error: bool) {
        match (predicted_error, is_error) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts from `(abstain, y_error)` outcomes.
    pub fn from_outcomes(outcomes: &[(bool, u8)]) -> Self {
        let mut c = Self::default();
        for &(abstain, y) in outcomes {
            c.record(abstain, y == 1);
        }
        c
    }
}

/// Pairs each decision with its error label.
pub fn join_labels(decisions: &[Decision], labels: &BTreeMap<String, u8>) -> Result<Vec<(bool, u8)>> {
    decisions
        .iter()
        .map(|d| {
            labels
                .get(&d.id)
                .map(|&y| (d.abstain, y))
                .ok_or_else(|| Error::MissingLabel(d.id.clone()))
        })
        .collect()
}

fn check_probability_pairs(pairs: &[(f64, u8)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    for &(p, y) in pairs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfUnitInterval { value: p });
        }
        if y > 1 {
            return Err(Error::InvalidParameter(format!("label {y} is not 0 or 1")));
        }
    }
    Ok(())
}

/// Sum of squared differences `Σ (y - p)²`.
pub fn brier_sum(pairs: &[(f64, u8)]) -> Result<f64> {
    check_probability_pairs(pairs)?;
    Ok(pairs.iter().map(|&(p, y)| (f64::from(y) - p).powi(2)).sum())
}

/// Mean Brier score.
pub fn brier(pairs: &[(f64, u8)]) -> Result<f64> {
    Ok(brier_sum(pairs)? / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FBeta {
    pub value: f64,
    /// `tp + fp + fn == 0`; value is reported as 0.
    pub degenerate: bool,
}

pub fn f_beta(c: ConfusionCounts, beta: f64) -> FBeta {
    let b2 = beta * beta;
    let num = (1.0 + b2) * c.tp as f64;
    let den = num + c.fp as f64 + b2 * c.fn_ as f64;
    if den == 0.0 {
        FBeta {
            value: 0.0,
            degenerate: true,
        }
    } else {
        FBeta {
            value: num / den,
            degenerate: false,
        }
    }
}

/// `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fdr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall_fdr(c: ConfusionCounts) -> PrecisionRecall {
    let precision = ratio(c.tp, c.tp + c.fp);
    PrecisionRecall {
        precision,
        recall: ratio(c.tp, c.tp + c.fn_),
        fdr: precision.map(|p| 1.0 - p),
    }
}

/// One operating point of a risk/coverage sweep.
///
/// `coverage_paper` and `risk_paper` divide by the whole evaluation set
/// (answered-and-correct and answered-and-wrong respectively);
/// `coverage_std` is the answered fraction and `risk_selective` the error
/// rate among answered records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCoveragePoint {
    #[serde(with = "float_serde")]
    pub gamma: f64,
    pub coverage_paper: f64,
    pub coverage_std: f64,
    pub risk_paper: f64,
    pub risk_selective: Option<f64>,
}

impl RiskCoveragePoint {
    fn from_counts(gamma: f64, answered_ok: u64, answered_err: u64, n: u64) -> Self {
        let n_f = n as f64;
        Self {
            gamma,
            coverage_paper: answered_ok as f64 / n_f,
            coverage_std: (answered_ok + answered_err) as f64 / n_f,
            risk_paper: answered_err as f64 / n_f,
            risk_selective: ratio(answered_err, answered_ok + answered_err),
        }
    }
}

/// Risk and coverage for a fixed set of `(abstain, y_error)` outcomes.
pub fn operating_point(outcomes: &[(bool, u8)]) -> Result<RiskCoveragePoint> {
    if outcomes.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let ok = outcomes.iter().filter(|(a, y)| !a && *y == 0).count() as u64;
    let err = outcomes.iter().filter(|(a, y)| !a && *y == 1).count() as u64;
    Ok(RiskCoveragePoint::from_counts(
        f64::NAN,
        ok,
        err,
        outcomes.len() as u64,
    ))
}

/// Sweeps γ over `-inf`, midpoints of unique scores and `+inf`, answering
/// records with `u < γ`. Points are in ascending γ.
pub fn risk_coverage_curve(points: &[(f64, u8)]) -> Result<Vec<RiskCoveragePoint>> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let us: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let n = sorted.len() as u64;

    let mut out = Vec::new();
    let (mut ok, mut err) = (0u64, 0u64);
    let mut i = 0;
    for gamma in threshold_candidates(&us) {
        while i < sorted.len() && sorted[i].0 < gamma {
            if sorted[i].1 == 1 {
                err += 1;
            } else {
                ok += 1;
            }
            i += 1;
        }
        out.push(RiskCoveragePoint::from_counts(gamma, ok, err, n));
    }
    Ok(out)
}

fn class_sizes(points: &[(f64, u8)]) -> Result<(u64, u64)> {
    let pos = points.iter().filter(|(_, y)| *y == 1).count() as u64;
    let neg = points.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if points.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann-Whitney rank-sum statistic, with
/// tied scores receiving half credit.
pub fn roc_auc(points: &[(f64, u8)]) -> Result<f64> {
    let (pos, neg) = class_sizes(points)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the positive rank sum stays integral under average ranks.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // Ranks i+1..=j averaged: (i + 1 + j) / 2.
        let positives = sorted[i..j].iter().filter(|(_, y)| *y == 1).count() as u64;
        twice_rank_sum += positives * (i as u64 + 1 + j as u64);
        i = j;
    }
    let twice_u = twice_rank_sum - pos * (pos + 1);
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "float_serde")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points for "positive when score >= threshold", from `(0, 0)` at
/// `+inf` down to `(1, 1)`.
pub fn roc_curve(points: &[(f64, u8)]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_sizes(points)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(out)
}

/// Fraction of `(abstain, y_error)` outcomes that are answered and correct.
pub fn result_ex_outcomes(outcomes: &[(bool, u8)]) -> Result<f64> {
    Ok(operating_point(outcomes)?.coverage_paper)
}

/// End-to-end execution accuracy after abstention.
pub fn result_ex(decisions: &[Decision], labels: &BTreeMap<String, u8>) -> Result<f64> {
    result_ex_outcomes(&join_labels(decisions, labels)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityFeatures {
    pub token_length: usize,
    pub unique_schema_elements: usize,
}

/// Lexer token count and the number of distinct (case-folded) identifiers
/// acting as tables or attributes.
pub fn complexity_features(sql: &str) -> Result<ComplexityFeatures> {
    let tokens = lex_sql(sql)?;
    let roles = classify_identifiers(&tokens, None);
    let mut names: Vec<String> = tokens
        .iter()
        .zip(&roles)
        .filter(|(t, r)| {
            t.kind == TokenKind::Identifier
                && matches!(r, Some(IdentRole::Table) | Some(IdentRole::Attribute))
        })
        .map(|(t, _)| t.text.to_lowercase())
        .collect();
    names.sort();
    names.dedup();
    Ok(ComplexityFeatures {
        token_length: tokens.len(),
        unique_schema_elements: names.len(),
    })
}
