//! End-to-end run: score, split into known/unknown halves, fit on known,
//! evaluate on unknown, write the report bundle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use selsql::calibrate::fit_calibrator;
use selsql::metrics::{self, ComplexityFeatures};
use selsql::records::{derive_labels, load_labels, merge_labels};
use selsql::select::{fit_classifier, GmmOptions, ThresholdObjective};
use selsql::{iid_split, load_log, Decision, PredictionRecord, ScoreVector};

use crate::config::PipelineConfig;
use crate::curves::{self, CSV_FILES};
use crate::error::{CliError, Stage, StageExt};
use crate::report::{
    selective_metrics, validate_report, CalibrationEntry, ClassifierReport, Report, ScoreReport, Skipped,
    FORMAT_VERSION,
};
use crate::svg::{Mark, Plot};
use crate::table::Table;

pub const REPORT_FILE: &str = "report.json";

/// What a pipeline run produced, in memory and on disk.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Fails with [`selsql::Error::LeakedIds`] when the two id sets intersect.
pub fn ensure_disjoint(fit: &[String], eval: &[String]) -> selsql::Result<()> {
    let fit: BTreeSet<&str> = fit.iter().map(String::as_str).collect();
    let shared = eval.iter().filter(|id| fit.contains(id.as_str())).count();
    if shared == 0 {
        Ok(())
    } else {
        Err(selsql::Error::LeakedIds(shared))
    }
}

struct Tables {
    risk_coverage: Table,
    roc: Table,
    reliability: Table,
    fbeta: Table,
    complexity: Table,
    tradeoff: Table,
}

#[derive(Default)]
struct Plots {
    risk_coverage: Vec<(String, Vec<(f64, f64)>)>,
    roc: Vec<(String, Vec<(f64, f64)>)>,
    reliability: Vec<(String, Vec<(f64, f64)>)>,
    complexity: Vec<(String, Vec<(f64, f64)>)>,
}

fn labelled(ids: &[String], u: &HashMap<&str, f64>, labels: &BTreeMap<String, u8>) -> Vec<(f64, u8)> {
    ids.iter().map(|id| (u[id.as_str()], labels[id])).collect()
}

fn flip(points: &[(f64, u8)]) -> Vec<(f64, u8)> {
    points.iter().map(|&(u, y)| (u, 1 - y)).collect()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::data(Stage::Report, format!("{}: {e}", path.display())))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, CliError> {
    cfg.validate()?;
    let mut records = load_log(&cfg.input).stage(Stage::Load)?;
    if let Some(path) = &cfg.labels {
        merge_labels(&mut records, &load_labels(path).stage(Stage::Labels)?);
    }
    let labels = derive_labels(&records).stage(Stage::Labels)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = iid_split(&ids, cfg.known_fraction, cfg.seed).stage(Stage::Split)?;
    let mut known = split.known_ids().to_vec();
    let mut unknown = split.unknown_ids().to_vec();
    known.sort();
    unknown.sort();
    ensure_disjoint(&known, &unknown).stage(Stage::Split)?;

    let by_id: HashMap<&str, &PredictionRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut features: BTreeMap<&str, ComplexityFeatures> = BTreeMap::new();
    for id in &unknown {
        let f = metrics::complexity_features(&by_id[id.as_str()].pred_sql)
            .map_err(|e| CliError::data(Stage::Complexity, format!("record {id}: {e}")))?;
        features.insert(id, f);
    }
    let unknown_errors = unknown.iter().filter(|id| labels[*id] == 1).count();

    let mut tables = Tables {
        risk_coverage: curves::risk_coverage_table(),
        roc: curves::roc_table(),
        reliability: curves::reliability_table(),
        fbeta: curves::fbeta_table(),
        complexity: curves::complexity_table(),
        tradeoff: curves::tradeoff_table(),
    };
    let mut plots = Plots::default();
    let mut scores = Vec::new();
    let mut skipped = Vec::new();

    for &method in &cfg.score_methods {
        let m = method.as_str();
        let sv = ScoreVector::compute(method, &records).stage(Stage::Score)?;
        let u: HashMap<&str, f64> = sv.entries().iter().map(|(id, u)| (id.as_str(), *u)).collect();
        let fit_err = labelled(&known, &u, &labels);
        let eval_err = labelled(&unknown, &u, &labels);
        let (fit_ok, eval_ok) = (flip(&fit_err), flip(&eval_err));

        curves::push_risk_coverage(&mut tables.risk_coverage, m, &eval_err)?;
        let rc = metrics::risk_coverage_curve(&eval_err).stage(Stage::Evaluate)?;
        plots.risk_coverage.push((
            m.to_string(),
            rc.iter()
                .filter_map(|p| p.risk_selective.map(|r| (p.coverage_std, r)))
                .collect(),
        ));
        let roc = curves::push_roc(&mut tables.roc, m, "score", &eval_err)?;
        plots.roc.push((format!("{m} score"), roc));
        let roc_auc = metrics::roc_auc(&eval_err).ok();

        let mut calibration = Vec::new();
        for &kind in &cfg.calibrators {
            let cal = match fit_calibrator(kind, &fit_ok, cfg.invert_minmax) {
                Ok(c) => c,
                Err(e) => {
                    skipped.push(Skipped {
                        score_method: method,
                        stage: Stage::Calibrate.to_string(),
                        component: kind.to_string(),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let pairs: Vec<(f64, u8)> = eval_ok.iter().map(|&(u, y)| (cal.apply(u), y)).collect();
            let brier_sum = metrics::brier_sum(&pairs).stage(Stage::Evaluate)?;
            let points =
                curves::push_reliability(&mut tables.reliability, m, kind.as_str(), &pairs, cfg.bins)?;
            plots.reliability.push((format!("{m} {kind}"), points));
            calibration.push(CalibrationEntry {
                calibrator: kind,
                params: cal,
                brier: brier_sum / pairs.len() as f64,
                brier_sum,
                n_eval: pairs.len(),
            });
        }

        let mut classifiers = Vec::new();
        let options = GmmOptions {
            seed: cfg.seed,
            restarts: cfg.gmm_restarts,
            ..GmmOptions::default()
        };
        for &kind in &cfg.classifiers {
            let clf = match fit_classifier(
                kind,
                &fit_err,
                ThresholdObjective::FBeta(cfg.threshold_beta),
                options,
            ) {
                Ok(c) => c,
                Err(e) => {
                    skipped.push(Skipped {
                        score_method: method,
                        stage: Stage::Classify.to_string(),
                        component: kind.to_string(),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let decisions: Vec<Decision> = unknown.iter().map(|id| clf.predict(id, u[id.as_str()])).collect();
            let metrics = selective_metrics(&decisions, &labels, &cfg.betas)?;
            let k = kind.as_str();
            curves::push_fbeta(&mut tables.fbeta, m, k, &metrics);
            let p_points: Vec<(f64, u8)> = decisions.iter().map(|d| (d.p_error, labels[&d.id])).collect();
            let roc = curves::push_roc(&mut tables.roc, m, k, &p_points)?;
            plots.roc.push((format!("{m} {k}"), roc));
            let mut scatter = Vec::new();
            for d in &decisions {
                let f = features[d.id.as_str()];
                curves::push_complexity(&mut tables.complexity, m, k, &d.id, d.p_error, f, labels[&d.id]);
                scatter.push((f.token_length as f64, d.p_error));
            }
            plots.complexity.push((format!("{m} {k}"), scatter));
            for c in &calibration {
                tables.tradeoff.push(vec![
                    m.into(),
                    c.calibrator.to_string(),
                    k.into(),
                    crate::table::num(metrics.result_ex),
                    crate::table::num(c.brier),
                ]);
            }
            classifiers.push(ClassifierReport {
                classifier: kind,
                params: clf,
                metrics,
            });
        }
        scores.push(ScoreReport {
            score_method: method,
            roc_auc,
            calibration,
            classifiers,
        });
    }

    let report = Report {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        known_fraction: cfg.known_fraction,
        n_records: records.len(),
        n_known: known.len(),
        n_unknown: unknown.len(),
        error_rate_unknown: unknown_errors as f64 / unknown.len() as f64,
        betas: cfg.betas.clone(),
        scores,
        skipped,
    };
    let value = serde_json::to_value(&report).map_err(|e| CliError::data(Stage::Report, e.to_string()))?;
    validate_report(&value).map_err(|e| CliError::data(Stage::Report, e))?;

    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(Stage::Report, format!("{}: {e}", out.display())))?;
    let mut files = Vec::new();
    let report_path = out.join(REPORT_FILE);
    selsql::io::write_json(&report_path, &report).stage(Stage::Report)?;
    files.push(report_path);
    let named = [
        &tables.risk_coverage,
        &tables.roc,
        &tables.reliability,
        &tables.fbeta,
        &tables.complexity,
        &tables.tradeoff,
    ];
    for (name, table) in CSV_FILES.iter().zip(named) {
        let path = out.join(name);
        table.write(&path)?;
        files.push(path);
    }
    if cfg.svg {
        for (name, svg) in render_plots(&plots) {
            let path = out.join(name);
            write_file(&path, &svg)?;
            files.push(path);
        }
    }
    Ok(PipelineOutput { report, files })
}

fn render_plots(plots: &Plots) -> Vec<(&'static str, String)> {
    let with = |mut plot: Plot, series: &[(String, Vec<(f64, f64)>)], mark: Mark| {
        for (name, points) in series {
            plot = plot.series(name.clone(), mark, points.clone());
        }
        plot.render()
    };
    let reliability = Plot::new("Reliability", "mean predicted P(correct)", "empirical frequency")
        .unit_square()
        .series("ideal", Mark::Line, vec![(0.0, 0.0), (1.0, 1.0)]);
    vec![
        (
            "risk_coverage.svg",
            with(
                Plot::new(
                    "Risk vs coverage",
                    "coverage (answered fraction)",
                    "selective risk",
                )
                .unit_square(),
                &plots.risk_coverage,
                Mark::Line,
            ),
        ),
        (
            "roc.svg",
            with(
                Plot::new("ROC", "false positive rate", "true positive rate").unit_square(),
                &plots.roc,
                Mark::Line,
            ),
        ),
        (
            "reliability.svg",
            with(reliability, &plots.reliability, Mark::Line),
        ),
        (
            "complexity_scatter.svg",
            with(
                Plot::new("Error probability vs query length", "SQL tokens", "p_error"),
                &plots.complexity,
                Mark::Points,
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_is_detected() {
        let a = vec!["x".to_string(), "y".to_string()];
        let b = vec!["y".to_string(), "z".to_string()];
        assert!(matches!(
            ensure_disjoint(&a, &b),
            Err(selsql::Error::LeakedIds(1))
        ));
        assert!(ensure_disjoint(&a, &["z".to_string()]).is_ok());
    }
}
