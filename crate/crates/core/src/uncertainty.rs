//! Sequence-level uncertainty scores from token-level probability information.
//!
//! Every score produced here is oriented so that larger values mean a less
//! trustworthy generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{check_distribution, PredictionRecord, TokenInfo};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    /// Maximum per-token entropy over the sequence.
    MaxEntropy,
    /// Negated mean log-probability of the emitted tokens.
    Nsp,
}

impl ScoreMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMethod::MaxEntropy => "max-entropy",
            ScoreMethod::Nsp => "nsp",
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-entropy" | "max_entropy" => Ok(ScoreMethod::MaxEntropy),
            "nsp" => Ok(ScoreMethod::Nsp),
            other => Err(Error::InvalidParameter(format!("unknown score method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsUncertain,
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub id: String,
    pub u: f64,
    pub method: ScoreMethod,
}

/// Scores for a set of records, all computed with one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    entries: Vec<(String, f64)>,
    orientation: Orientation,
    method: ScoreMethod,
}

impl ScoreVector {
    pub fn new(method: ScoreMethod, entries: Vec<(String, f64)>) -> Result<Self> {
        if let Some((id, u)) = entries.iter().find(|(_, u)| !u.is_finite()) {
            return Err(Error::InvalidRecord {
                id: id.clone(),
                reason: format!("score {u} is not finite"),
            });
        }
        Ok(Self {
            entries,
            orientation: Orientation::HigherIsUncertain,
            method,
        })
    }

    /// Scores every record with `method`, stopping at the first failure.
    pub fn compute(method: ScoreMethod, records: &[PredictionRecord]) -> Result<Self> {
        let entries = records
            .iter()
            .map(|r| {
                score_record(method, r)
                    .map(|u| (r.id.clone(), u))
                    .map_err(|e| Error::InvalidRecord {
                        id: r.id.clone(),
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(method, entries)
    }

    pub fn from_lines(lines: &[ScoreLine]) -> Result<Self> {
        let method = lines
            .first()
            .map(|l| l.method)
            .ok_or_else(|| Error::InvalidParameter("empty score file".into()))?;
        if lines.iter().any(|l| l.method != method) {
            return Err(Error::InvalidParameter("score file mixes methods".into()));
        }
        Self::new(method, lines.iter().map(|l| (l.id.clone(), l.u)).collect())
    }

    pub fn to_lines(&self) -> Vec<ScoreLine> {
        self.entries
            .iter()
            .map(|(id, u)| ScoreLine {
                id: id.clone(),
                u: *u,
                method: self.method,
            })
            .collect()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn method(&self) -> ScoreMethod {
        self.method
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn token_entropy(dist: &[f64]) -> Result<f64> {
    check_distribution(dist)?;
    Ok(entropy_unchecked(dist))
}

fn entropy_unchecked(dist: &[f64]) -> f64 {
    let h: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.max(PROB_FLOOR).ln())
        .sum();
    h.max(0.0)
}

/// `u = max_l H(p_l)`: a sequence is scored by its least certain token.
pub fn max_entropy_score(record: &PredictionRecord) -> Result<f64> {
    let u = match &record.token_info {
        TokenInfo::FullDistributions(dists) => {
            let mut best = f64::NEG_INFINITY;
            for dist in dists {
                best = best.max(token_entropy(dist)?);
            }
            best
        }
        TokenInfo::TokenEntropies(ents) => ents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        TokenInfo::ChosenLogprobs(_) => {
            return Err(Error::MethodNotApplicable {
                method: "max-entropy",
                reason: "only chosen-token log-probabilities are available".into(),
            })
        }
    };
    if u == f64::NEG_INFINITY {
        return Err(Error::EmptySequence);
    }
    Ok(u)
}

/// `u = -(1/L) Σ ln p_l`. For full distributions the emitted token is taken
/// to be the most probable entry at each position.
pub fn nsp_score(record: &PredictionRecord) -> Result<f64> {
    let logprobs: Vec<f64> = match &record.token_info {
        TokenInfo::ChosenLogprobs(lps) => lps.clone(),
        TokenInfo::FullDistributions(dists) => dists
            .iter()
            .map(|d| {
                check_distribution(d)?;
                Ok(d.iter().copied().fold(0.0, f64::max).ln())
            })
            .collect::<Result<_>>()?,
        TokenInfo::TokenEntropies(_) => {
            return Err(Error::MethodNotApplicable {
                method: "nsp",
                reason: "token entropies carry no emitted-token probability".into(),
            })
        }
    };
    nsp_from_logprobs(&logprobs)
}

pub fn nsp_from_logprobs(logprobs: &[f64]) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(position) = logprobs.iter().position(|lp| !lp.is_finite()) {
        return Err(Error::ZeroProbability { position });
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).max(0.0))
}

pub fn score_record(method: ScoreMethod, record: &PredictionRecord) -> Result<f64> {
    match method {
        ScoreMethod::MaxEntropy => max_entropy_score(record),
        ScoreMethod::Nsp => nsp_score(record),
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(info: TokenInfo) -> PredictionRecord {
        PredictionRecord {
            id: "r".into(),
            question: String::new(),
            gold_sql: String::new(),
            pred_sql: String::new(),
            token_info: info,
            label: Some(0),
            exec_results: None,
        }
    }

    // Oracle: the entropy of a uniform distribution over k outcomes is ln k.
    #[test]
    fn token_entropy_examples() {
        assert_eq!(token_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(token_entropy(&[0.5, 0.5]).unwrap(), 0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(token_entropy(&[0.25; 4]).unwrap(), 1.386294, epsilon = 1e-6);
    }

    #[test]
    fn token_entropy_errors() {
        assert!(token_entropy(&[]).is_err());
        assert!(token_entropy(&[-0.1, 1.1]).is_err());
        assert!(token_entropy(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn max_entropy_examples() {
        let r = rec(TokenInfo::TokenEntropies(vec![0.0, 0.6931]));
        assert_eq!(max_entropy_score(&r).unwrap(), 0.6931);

        let r = rec(TokenInfo::FullDistributions(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(max_entropy_score(&r).unwrap(), 0.0);

        // Per-token entropies by hand: 0, ln 2, -(0.9 ln 0.9 + 0.1 ln 0.1) = 0.3251.
        let third = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert_abs_diff_eq!(third, 0.3251, epsilon = 1e-4);
        let r = rec(TokenInfo::FullDistributions(vec![
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.9, 0.1],
        ]));
        assert_abs_diff_eq!(max_entropy_score(&r).unwrap(), 0.693147, epsilon = 1e-6);
    }

    #[test]
    fn max_entropy_rejects_logprobs() {
        let r = rec(TokenInfo::ChosenLogprobs(vec![-0.1]));
        assert!(matches!(
            max_entropy_score(&r),
            Err(Error::MethodNotApplicable { .. })
        ));
        let r = rec(TokenInfo::TokenEntropies(vec![]));
        assert!(matches!(max_entropy_score(&r), Err(Error::EmptySequence)));
    }

    #[test]
    fn nsp_examples() {
        let r = rec(TokenInfo::ChosenLogprobs(vec![0.0, 0.0, 0.0]));
        assert_eq!(nsp_score(&r).unwrap(), 0.0);

        let r = rec(TokenInfo::ChosenLogprobs(vec![0.5f64.ln(), 0.5f64.ln()]));
        assert_abs_diff_eq!(nsp_score(&r).unwrap(), 0.693147, epsilon = 1e-6);

        let r = rec(TokenInfo::ChosenLogprobs(vec![0.1f64.ln()]));
        assert_abs_diff_eq!(nsp_score(&r).unwrap(), 2.302585, epsilon = 1e-6);
    }

    #[test]
    fn nsp_from_full_distributions_uses_argmax_token() {
        let r = rec(TokenInfo::FullDistributions(vec![vec![0.5, 0.5], vec![0.2, 0.8]]));
        let expected = -(0.5f64.ln() + 0.8f64.ln()) / 2.0;
        assert_abs_diff_eq!(nsp_score(&r).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn nsp_errors() {
        let r = rec(TokenInfo::ChosenLogprobs(vec![-0.1, f64::NEG_INFINITY]));
        assert!(matches!(
            nsp_score(&r),
            Err(Error::ZeroProbability { position: 1 })
        ));
        let r = rec(TokenInfo::ChosenLogprobs(vec![]));
        assert!(matches!(nsp_score(&r), Err(Error::EmptySequence)));
        let r = rec(TokenInfo::TokenEntropies(vec![0.1]));
        assert!(nsp_score(&r).is_err());
    }

    #[test]
    fn score_vector_rejects_non_finite() {
        assert!(ScoreVector::new(ScoreMethod::Nsp, vec![("a".into(), f64::INFINITY)]).is_err());
        let v = ScoreVector::new(ScoreMethod::Nsp, vec![("a".into(), 1.0)]).unwrap();
        assert_eq!(v.orientation(), Orientation::HigherIsUncertain);
        assert_eq!(ScoreVector::from_lines(&v.to_lines()).unwrap(), v);
    }
}
