use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use selsql::{CalibratorKind, ClassifierKind, ScoreMethod};

use crate::error::{CliError, Stage, StageExt};

/// β values of the F-beta sweep unless configured otherwise.
pub const DEFAULT_BETAS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 5.0];

/// Everything `run_pipeline` needs. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Optional `{id, label}` sidecar merged into the log by id.
    pub labels: Option<PathBuf>,
    pub score_methods: Vec<ScoreMethod>,
    pub calibrators: Vec<CalibratorKind>,
    pub classifiers: Vec<ClassifierKind>,
    /// Share of records in the fitting (known) half.
    pub known_fraction: f64,
    pub seed: u64,
    pub betas: Vec<f64>,
    /// β the threshold classifier maximizes on the known half.
    pub threshold_beta: f64,
    pub bins: usize,
    pub out_dir: PathBuf,
    pub invert_minmax: bool,
    pub gmm_restarts: usize,
    pub svg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            labels: None,
            score_methods: vec![ScoreMethod::MaxEntropy],
            calibrators: CalibratorKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            known_fraction: 0.5,
            seed: 1,
            betas: DEFAULT_BETAS.to_vec(),
            threshold_beta: 1.0,
            bins: 10,
            out_dir: PathBuf::from("out"),
            invert_minmax: false,
            gmm_restarts: 0,
            svg: false,
        }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::data(Stage::Config, message)
}

fn no_duplicates<T: Ord + Copy + std::fmt::Display>(what: &str, items: &[T]) -> Result<(), CliError> {
    if items.is_empty() {
        return Err(invalid(format!("{what} list is empty")));
    }
    let mut seen = BTreeSet::new();
    for &item in items {
        if !seen.insert(item) {
            return Err(invalid(format!("{what} {item} listed twice")));
        }
    }
    Ok(())
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        selsql::io::read_json(path).stage(Stage::Config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.input.as_os_str().is_empty() {
            return Err(invalid("no input log given"));
        }
        for path in std::iter::once(&self.input).chain(&self.labels) {
            if !path.is_file() {
                return Err(invalid(format!("file not found: {}", path.display())));
            }
        }
        if !(self.known_fraction > 0.0 && self.known_fraction < 1.0) {
            return Err(invalid(format!(
                "known_fraction {} must lie in (0, 1)",
                self.known_fraction
            )));
        }
        if self.betas.is_empty() {
            return Err(invalid("beta list is empty"));
        }
        for &b in self.betas.iter().chain([&self.threshold_beta]) {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid(format!("beta {b} must be finite and non-negative")));
            }
        }
        if self.bins == 0 {
            return Err(invalid("bins must be at least 1"));
        }
        no_duplicates("score method", &self.score_methods)?;
        no_duplicates("calibrator", &self.calibrators)?;
        no_duplicates("classifier", &self.classifiers)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.betas, DEFAULT_BETAS);
    }

    #[test]
    fn names_match_cli_spelling() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"score_methods": ["nsp", "max-entropy"], "calibrators": ["isotonic"], "classifiers": ["gmm"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.score_methods, [ScoreMethod::Nsp, ScoreMethod::MaxEntropy]);
        assert_eq!(cfg.calibrators, [CalibratorKind::Isotonic]);
        assert_eq!(cfg.classifiers, [ClassifierKind::Gmm]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn missing_input_is_a_config_error() {
        let cfg = PipelineConfig {
            input: "/nonexistent/log.jsonl".into(),
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Config));
        assert!(err.to_string().starts_with("[config]"));
    }

    #[test]
    fn duplicate_methods_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let cfg = PipelineConfig {
            input: f.path().into(),
            classifiers: vec![ClassifierKind::Gmm, ClassifierKind::Gmm],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
