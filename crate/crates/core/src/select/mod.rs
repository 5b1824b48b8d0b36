//! Selective classifiers: decide per record whether to answer or abstain.
//!
//! All classifiers treat a large uncertainty score as evidence of an error
//! and abstain when they predict the error class.

pub mod gmm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_serde;
use crate::logistic::{self, sigmoid};
use crate::metrics::{f_beta, ConfusionCounts};

pub use gmm::{gmm_fit, gmm_fit_with, Component, Gmm, GmmFit, GmmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Threshold,
    Logreg,
    Gmm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [Self::Threshold, Self::Logreg, Self::Gmm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Threshold => "threshold",
            Self::Logreg => "logreg",
            Self::Gmm => "gmm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Self::Threshold),
            "logreg" => Ok(Self::Logreg),
            "gmm" => Ok(Self::Gmm),
            other => Err(Error::InvalidParameter(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Answer-or-abstain outcome for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub abstain: bool,
    pub p_error: f64,
    /// Set when `p_error` is a 0/1 hard decision rather than a probability.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectiveClassifier {
    Threshold {
        #[serde(with = "float_serde")]
        gamma: f64,
    },
    Logreg {
        theta0: f64,
        theta1: f64,
    },
    Gmm(Gmm),
}

impl SelectiveClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Threshold { .. } => ClassifierKind::Threshold,
            Self::Logreg { .. } => ClassifierKind::Logreg,
            Self::Gmm(_) => ClassifierKind::Gmm,
        }
    }

    pub fn predict(&self, id: &str, u: f64) -> Decision {
        match self {
            Self::Threshold { gamma } => threshold_predict(id, *gamma, u),
            Self::Logreg { theta0, theta1 } => logreg_predict(id, [*theta0, *theta1], u),
            Self::Gmm(g) => gmm_predict(id, g, u),
        }
    }
}

/// Objective maximized when choosing a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdObjective {
    F1,
    FBeta(f64),
}

impl ThresholdObjective {
    pub fn beta(self) -> f64 {
        match self {
            Self::F1 => 1.0,
            Self::FBeta(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub gamma: f64,
    pub objective: f64,
}

/// Candidate thresholds: `-inf`, midpoints between sorted unique scores, `+inf`.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut uniq = scores.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut out = Vec::with_capacity(uniq.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(uniq.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(f64::INFINITY);
    out
}

/// Picks the threshold maximizing error-detection F-beta when predicting an
/// error for `u >= γ`. Ties go to the smaller γ.
pub fn threshold_fit(data: &[(f64, u8)], objective: ThresholdObjective) -> Result<ThresholdFit> {
    let errors = data.iter().filter(|(_, y)| *y == 1).count();
    if data.is_empty() || errors == 0 || errors == data.len() {
        return Err(Error::SingleClass);
    }
    let beta = objective.beta();
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sweep upward; below-γ items are answered. Start at γ = -inf: abstain on all.
    let total_pos = errors as u64;
    let total_neg = (data.len() - errors) as u64;
    let mut answered_pos = 0u64;
    let mut answered_neg = 0u64;
    let counts = |ap: u64, an: u64| ConfusionCounts {
        tp: total_pos - ap,
        fp: total_neg - an,
        fn_: ap,
        tn: an,
    };
    let mut best = ThresholdFit {
        gamma: f64::NEG_INFINITY,
        objective: f_beta(counts(0, 0), beta).value,
    };
    let mut i = 0;
    while i < sorted.len() {
        let u = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == u {
            if sorted[i].1 == 1 {
                answered_pos += 1;
            } else {
                answered_neg += 1;
            }
            i += 1;
        }
        let gamma = match sorted.get(i) {
            Some(&(next, _)) => u + (next - u) / 2.0,
            None => f64::INFINITY,
        };
        let value = f_beta(counts(answered_pos, answered_neg), beta).value;
        if value > best.objective {
            best = ThresholdFit {
                gamma,
                objective: value,
            };
        }
    }
    Ok(best)
}

/// Abstains iff `u >= γ`.
pub fn threshold_predict(id: &str, gamma: f64, u: f64) -> Decision {
    let abstain = u >= gamma;
    Decision {
        id: id.to_string(),
        abstain,
        p_error: if abstain { 1.0 } else { 0.0 },
        hard: true,
    }
}

/// Logistic regression of the error label on `u`.
pub fn logreg_fit(data: &[(f64, u8)]) -> Result<SelectiveClassifier> {
    let fit = logistic::fit(data, logistic::RIDGE)?;
    Ok(SelectiveClassifier::Logreg {
        theta0: fit.theta[0],
        theta1: fit.theta[1],
    })
}

/// Abstains iff `σ(θ0 + θ1 u) > 0.5`; exactly 0.5 answers.
pub fn logreg_predict(id: &str, theta: [f64; 2], u: f64) -> Decision {
    let p_error = sigmoid(theta[0] + theta[1] * u);
    Decision {
        id: id.to_string(),
        abstain: p_error > 0.5,
        p_error,
        hard: false,
    }
}

pub fn gmm_predict(id: &str, model: &Gmm, u: f64) -> Decision {
    Decision {
        id: id.to_string(),
        abstain: model.predicts_error(u),
        p_error: model.p_error(u),
        hard: false,
    }
}

/// Fits `kind` on `(u, y_error)` pairs. The mixture ignores the labels.
pub fn fit_classifier(
    kind: ClassifierKind,
    data: &[(f64, u8)],
    objective: ThresholdObjective,
    gmm_options: GmmOptions,
) -> Result<SelectiveClassifier> {
    match kind {
        ClassifierKind::Threshold => Ok(SelectiveClassifier::Threshold {
            gamma: threshold_fit(data, objective)?.gamma,
        }),
        ClassifierKind::Logreg => logreg_fit(data),
        ClassifierKind::Gmm => {
            let scores: Vec<f64> = data.iter().map(|p| p.0).collect();
            Ok(SelectiveClassifier::Gmm(
                gmm_fit_with(&scores, gmm_options)?.model,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pairs(u: &[f64], y: &[u8]) -> Vec<(f64, u8)> {
        u.iter().copied().zip(y.iter().copied()).collect()
    }

    /// Exhaustive oracle: evaluate every candidate directly from the definition.
    fn sweep_best(data: &[(f64, u8)], beta: f64) -> f64 {
        let us: Vec<f64> = data.iter().map(|p| p.0).collect();
        threshold_candidates(&us)
            .into_iter()
            .map(|g| {
                let mut c = ConfusionCounts::default();
                for &(u, y) in data {
                    c.record(u >= g, y == 1);
                }
                f_beta(c, beta).value
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn threshold_fit_examples() {
        let d = pairs(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let fit = threshold_fit(&d, ThresholdObjective::F1).unwrap();
        assert_eq!(fit.gamma, 2.5);
        assert_eq!(fit.objective, 1.0);

        let d = pairs(&[1.0, 2.0], &[1, 0]);
        let fit = threshold_fit(&d, ThresholdObjective::F1).unwrap();
        assert!(fit.objective < 1.0);
        assert_abs_diff_eq!(fit.objective, sweep_best(&d, 1.0), epsilon = 1e-15);

        let d = pairs(&[1.0, 2.0], &[1, 1]);
        assert!(matches!(
            threshold_fit(&d, ThresholdObjective::F1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn threshold_fit_matches_sweep_with_ties() {
        let d = pairs(
            &[0.1, 0.1, 0.5, 0.5, 0.5, 0.9, 1.3, 1.3],
            &[0, 1, 0, 1, 1, 0, 1, 1],
        );
        for beta in [0.25, 0.5, 1.0, 2.0, 5.0] {
            let fit = threshold_fit(&d, ThresholdObjective::FBeta(beta)).unwrap();
            assert_abs_diff_eq!(fit.objective, sweep_best(&d, beta), epsilon = 1e-15);
        }
    }

    #[test]
    fn threshold_predict_examples() {
        assert!(threshold_predict("a", 2.5, 3.0).abstain);
        assert!(threshold_predict("a", 2.5, 2.5).abstain);
        assert!(!threshold_predict("a", f64::INFINITY, 1e300).abstain);
        assert!(threshold_predict("a", 2.5, 3.0).hard);
    }

    #[test]
    fn logreg_examples() {
        let d = pairs(&[0.0, 0.0, 1.0, 1.0], &[0, 1, 0, 1]);
        let clf = logreg_fit(&d).unwrap();
        for u in [0.0, 1.0, 7.0] {
            let dec = clf.predict("x", u);
            assert_abs_diff_eq!(dec.p_error, 0.5, epsilon = 1e-9);
        }

        let mut d = vec![(0.0, 0u8); 10];
        d.extend(std::iter::repeat_n((10.0, 1u8), 10));
        let clf = logreg_fit(&d).unwrap();
        assert!(clf.predict("x", 10.0).abstain);
        assert!(!clf.predict("x", 0.0).abstain);

        assert!(logreg_fit(&[(0.0, 0), (1.0, 0)]).is_err());
    }

    #[test]
    fn logreg_predict_examples() {
        let d = logreg_predict("a", [0.0, 0.0], 3.0);
        assert_eq!(d.p_error, 0.5);
        assert!(!d.abstain);
        let d = logreg_predict("a", [0.0, 1.0], 2.0);
        assert_abs_diff_eq!(d.p_error, 0.8808, epsilon = 1e-4);
        assert!(d.abstain);
        let d = logreg_predict("a", [0.0, -1.0], 2.0);
        assert_abs_diff_eq!(d.p_error, 0.1192, epsilon = 1e-4);
        assert!(!d.abstain);
    }

    #[test]
    fn classifier_json_round_trip() {
        let c = SelectiveClassifier::Threshold { gamma: f64::INFINITY };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"threshold","gamma":"inf"}"#);
        assert_eq!(serde_json::from_str::<SelectiveClassifier>(&s).unwrap(), c);

        let g = SelectiveClassifier::Gmm(Gmm::new([
            Component {
                weight: 0.4,
                mean: 0.0,
                std: 1.0,
            },
            Component {
                weight: 0.6,
                mean: 3.0,
                std: 0.5,
            },
        ]));
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<SelectiveClassifier>(&s).unwrap(), g);
    }

    #[test]
    fn decision_line_shape() {
        let d = logreg_predict("q1", [0.0, 1.0], 2.0);
        let v: serde_json::Value = serde_json::to_value(&d).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["abstain", "id", "p_error"]);
    }
}
