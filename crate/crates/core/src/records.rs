//! Prediction-log data model, JSONL ingestion and execution-match labeling.
//!
//! A log holds one [`PredictionRecord`] per line. Labels follow the error
//! orientation: `1` means the predicted query's execution result differs from
//! the gold one, `0` means it matches.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Tolerance on the sum of a logged probability vector.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-6;

/// Per-token probability information attached to a generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenInfo {
    /// Full softmax distribution at every output position.
    FullDistributions(Vec<Vec<f64>>),
    /// Entropy (nats) at every output position.
    TokenEntropies(Vec<f64>),
    /// Natural-log probability of the emitted token at every position.
    ChosenLogprobs(Vec<f64>),
}

impl TokenInfo {
    pub fn len(&self) -> usize {
        match self {
            TokenInfo::FullDistributions(d) => d.len(),
            TokenInfo::TokenEntropies(e) => e.len(),
            TokenInfo::ChosenLogprobs(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            TokenInfo::FullDistributions(_) => "full_distributions",
            TokenInfo::TokenEntropies(_) => "token_entropies",
            TokenInfo::ChosenLogprobs(_) => "chosen_logprobs",
        }
    }
}

/// Gold and predicted execution results, already rendered to strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResults(pub String, pub String);

/// One logged model generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub question: String,
    pub gold_sql: String,
    pub pred_sql: String,
    pub token_info: TokenInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_results: Option<ExecResults>,
}

impl PredictionRecord {
    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidRecord {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks the structural invariants that hold for every stored record.
    pub fn validate(&self) -> Result<()> {
        if self.token_info.is_empty() {
            return Err(self.invalid(format!("{} is empty", self.token_info.variant_name())));
        }
        match &self.token_info {
            TokenInfo::FullDistributions(dists) => {
                for (pos, dist) in dists.iter().enumerate() {
                    check_distribution(dist).map_err(|e| self.invalid(format!("position {pos}: {e}")))?;
                }
            }
            TokenInfo::TokenEntropies(ents) => {
                if let Some(pos) = ents.iter().position(|h| !h.is_finite() || *h < 0.0) {
                    return Err(self.invalid(format!(
                        "token entropy at position {pos} is {} (must be finite and >= 0)",
                        ents[pos]
                    )));
                }
            }
            TokenInfo::ChosenLogprobs(lps) => {
                if let Some(pos) = lps.iter().position(|lp| lp.is_nan() || *lp > 0.0) {
                    return Err(self.invalid(format!(
                        "log-probability at position {pos} is {} (must be <= 0)",
                        lps[pos]
                    )));
                }
            }
        }
        if let Some(label) = self.label {
            if label > 1 {
                return Err(self.invalid(format!("label {label} is not 0 or 1")));
            }
        }
        Ok(())
    }
}

/// Validates a probability vector: non-empty, entries in [0,1], sum 1 ± 1e-6.
pub fn check_distribution(dist: &[f64]) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    if let Some(p) = dist.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidDistribution(format!("entry {p} outside [0, 1]")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// A scored record with both label orientations attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub id: String,
    pub u: f64,
    pub y_error: u8,
    pub y_correct: u8,
}

impl LabeledScore {
    pub fn new(id: impl Into<String>, u: f64, y_error: u8) -> Result<Self> {
        let id = id.into();
        if !u.is_finite() {
            return Err(Error::InvalidRecord {
                id,
                reason: format!("uncertainty {u} is not finite"),
            });
        }
        if y_error > 1 {
            return Err(Error::InvalidRecord {
                id,
                reason: format!("label {y_error} is not 0 or 1"),
            });
        }
        Ok(Self {
            id,
            u,
            y_error,
            y_correct: 1 - y_error,
        })
    }
}

/// Line of a label sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLine {
    pub id: String,
    pub label: u8,
}

/// Reads a prediction log and validates every record.
pub fn load_log(path: &Path) -> Result<Vec<PredictionRecord>> {
    let records: Vec<PredictionRecord> = io::read_jsonl(path)?;
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(records)
}

pub fn write_log(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    io::write_jsonl(path, records)
}

/// Reads a `{id, label}` sidecar into an id-keyed map.
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, u8>> {
    let lines: Vec<LabelLine> = io::read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for line in lines {
        if line.label > 1 {
            return Err(Error::InvalidRecord {
                id: line.id,
                reason: format!("label {} is not 0 or 1", line.label),
            });
        }
        if out.insert(line.id.clone(), line.label).is_some() {
            return Err(Error::DuplicateId(line.id));
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<String, u8>) -> Result<()> {
    let lines: Vec<LabelLine> = labels
        .iter()
        .map(|(id, &label)| LabelLine {
            id: id.clone(),
            label,
        })
        .collect();
    io::write_jsonl(path, &lines)
}

/// Overwrites `label` on every record whose id appears in `labels`.
/// Sidecar ids with no matching record are ignored.
pub fn merge_labels(records: &mut [PredictionRecord], labels: &BTreeMap<String, u8>) {
    for r in records.iter_mut() {
        if let Some(&label) = labels.get(&r.id) {
            r.label = Some(label);
        }
    }
}

/// Trim, case-fold, and sort the rows of a rendered result set.
pub fn normalize_result(result: &str) -> String {
    let mut rows: Vec<String> = result
        .trim()
        .lines()
        .map(|row| row.trim().to_lowercase())
        .collect();
    rows.sort();
    rows.join("\n")
}

/// Error label of a record: the stored label when present, otherwise
/// `0` iff the normalized gold and predicted execution results are equal.
pub fn derive_label(record: &PredictionRecord) -> Result<u8> {
    if let Some(label) = record.label {
        return Ok(label);
    }
    match &record.exec_results {
        Some(ExecResults(gold, pred)) => Ok(u8::from(normalize_result(gold) != normalize_result(pred))),
        None => Err(Error::MissingLabel(record.id.clone())),
    }
}

/// Derives labels for a whole log, keyed by id.
pub fn derive_labels(records: &[PredictionRecord]) -> Result<BTreeMap<String, u8>> {
    records
        .iter()
        .map(|r| derive_label(r).map(|l| (r.id.clone(), l)))
        .collect()
}
