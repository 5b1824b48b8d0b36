//! Argument definitions and handlers for every `selsql` subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use selsql::calibrate::fit_calibrator;
use selsql::io::{read_json, read_jsonl, write_json, write_jsonl};
use selsql::metrics;
use selsql::records::{derive_labels, load_labels, merge_labels, write_labels};
use selsql::select::{fit_classifier, GmmOptions, ThresholdObjective};
use selsql::splits::load_dataset;
use selsql::uncertainty::ScoreLine;
use selsql::{
    iid_split, length_split, load_log, make_synthetic, template_split, write_log, Calibrator, CalibratorKind,
    ClassifierKind, Decision, Schema, ScoreMethod, ScoreVector, SplitResult,
};

use crate::config::{PipelineConfig, DEFAULT_BETAS};
use crate::curves;
use crate::error::{CliError, Stage, StageExt};
use crate::pipeline::{ensure_disjoint, run_pipeline};
use crate::report::{
    selective_metrics, validate_evaluate_report, CalibrationEntry, EvaluateReport, FORMAT_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "selsql", version, about = "Selective prediction for text-to-SQL logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one uncertainty score per logged prediction.
    Score(ScoreArgs),
    /// Fit a calibrator on one side of a split.
    Calibrate(CalibrateArgs),
    /// Map a score file through a saved calibrator.
    Apply(ApplyArgs),
    /// Fit a selective classifier and write abstention decisions.
    Classify(ClassifyArgs),
    /// Evaluate abstention decisions.
    Evaluate(EvaluateArgs),
    /// Split a text-to-SQL dataset.
    Split(SplitArgs),
    /// Write a synthetic prediction log.
    Synth(SynthArgs),
    /// Run scoring, fitting and evaluation end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Known,
    Unk,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitKindArg {
    Template,
    Length,
    Iid,
}

fn parse_score_method(s: &str) -> Result<ScoreMethod, String> {
    s.parse().map_err(|e: selsql::Error| e.to_string())
}

fn parse_calibrator(s: &str) -> Result<CalibratorKind, String> {
    s.parse().map_err(|e: selsql::Error| e.to_string())
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: selsql::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// max-entropy or nsp.
    #[arg(long, value_parser = parse_score_method)]
    pub method: ScoreMethod,
    #[arg(long)]
    pub input: PathBuf,
    /// Sidecar `{id, label}` file merged into the log.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the error labels of every record.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

/// Which records a model is fitted on or applied to.
#[derive(Debug, Args)]
pub struct SplitSelection {
    /// Saved split; its train ids are "known", test ids "unk".
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Known fraction of the i.i.d. split used when no --split is given.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// minmax, platt or isotonic.
    #[arg(long, value_parser = parse_calibrator)]
    pub method: CalibratorKind,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub selection: SplitSelection,
    #[arg(long, value_enum, default_value = "known")]
    pub fit_split: Side,
    /// MinMax outputs one minus the normalized score.
    #[arg(long)]
    pub invert: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub calibrator: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// threshold, logreg or gmm.
    #[arg(long, value_parser = parse_classifier)]
    pub method: ClassifierKind,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub selection: SplitSelection,
    #[arg(long, value_enum, default_value = "known")]
    pub fit_split: Side,
    #[arg(long, value_enum, default_value = "unk")]
    pub eval_split: Side,
    /// β maximized by the threshold classifier.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Extra randomly initialized mixture fits.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    #[arg(long)]
    pub output: PathBuf,
    /// Where to save the fitted classifier.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub decisions: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Report path; CSVs are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Split the decisions came from; evaluation refuses known ids.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Saved calibrators to score with Brier and reliability bins.
    #[arg(long = "calibrator")]
    pub calibrators: Vec<PathBuf>,
    /// Prediction log, for the complexity scatter.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BETAS)]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_enum)]
    pub kind: SplitKindArg,
    #[arg(long)]
    pub input: PathBuf,
    /// Test fraction (template, length) or known fraction (iid).
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.3)]
    pub error_rate: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON config; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prediction log (JSONL).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Optional `{id, label}` JSONL overriding logged labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score methods, comma separated: max-entropy, nsp.
    #[arg(long = "method", value_parser = parse_score_method, value_delimiter = ',')]
    pub methods: Vec<ScoreMethod>,
    /// Calibrators, comma separated: minmax, platt, isotonic.
    #[arg(long = "calibrators", value_parser = parse_calibrator, value_delimiter = ',')]
    pub calibrators: Vec<CalibratorKind>,
    /// Classifiers, comma separated: threshold, logreg, gmm.
    #[arg(long = "classifiers", value_parser = parse_classifier, value_delimiter = ',')]
    pub classifiers: Vec<ClassifierKind>,
    /// Share of records in the known (fitting) half.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Betas reported in the F-beta table.
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Beta the threshold classifier maximizes.
    #[arg(long)]
    pub threshold_beta: Option<f64>,
    /// Reliability bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Extra random GMM initializations.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// MinMax outputs one minus the normalized score.
    #[arg(long)]
    pub invert: bool,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

impl PipelineArgs {
    pub fn to_config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if let Some(v) = &self.labels {
            cfg.labels = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if !self.methods.is_empty() {
            cfg.score_methods = self.methods.clone();
        }
        if !self.calibrators.is_empty() {
            cfg.calibrators = self.calibrators.clone();
        }
        if !self.classifiers.is_empty() {
            cfg.classifiers = self.classifiers.clone();
        }
        if let Some(v) = self.fraction {
            cfg.known_fraction = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if !self.betas.is_empty() {
            cfg.betas = self.betas.clone();
        }
        if let Some(v) = self.threshold_beta {
            cfg.threshold_beta = v;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = self.restarts {
            cfg.gmm_restarts = v;
        }
        cfg.invert_minmax |= self.invert;
        cfg.svg |= self.svg;
        if cfg.input.as_os_str().is_empty() {
            return Err(CliError::Usage(
                "pipeline needs --input or a --config naming one".into(),
            ));
        }
        Ok(cfg)
    }
}

/// One line of `apply` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedLine {
    pub id: String,
    pub u: f64,
    pub u_c: f64,
}

/// One line of `decisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub id: String,
    pub abstain: bool,
    pub p_error: f64,
}

impl From<&Decision> for DecisionLine {
    fn from(d: &Decision) -> Self {
        Self {
            id: d.id.clone(),
            abstain: d.abstain,
            p_error: d.p_error,
        }
    }
}

fn load_scores(path: &Path) -> Result<ScoreVector, CliError> {
    let lines: Vec<ScoreLine> = read_jsonl(path).stage(Stage::Load)?;
    ScoreVector::from_lines(&lines).stage(Stage::Load)
}

fn resolve_split(selection: &SplitSelection, ids: &[String]) -> Result<SplitResult, CliError> {
    match &selection.split {
        Some(path) => read_json(path).stage(Stage::Split),
        None => iid_split(ids, selection.fraction, selection.seed).stage(Stage::Split),
    }
}

fn side_ids(split: &SplitResult, side: Side) -> Vec<String> {
    let mut ids = match side {
        Side::Known => split.known_ids().to_vec(),
        Side::Unk => split.unknown_ids().to_vec(),
        Side::All => [split.known_ids(), split.unknown_ids()].concat(),
    };
    ids.sort();
    ids
}

/// `(u, y_error)` for `ids`, failing on ids without a score or label.
fn gather(
    ids: &[String],
    scores: &BTreeMap<&str, f64>,
    labels: &BTreeMap<String, u8>,
    stage: Stage,
) -> Result<Vec<(f64, u8)>, CliError> {
    ids.iter()
        .map(|id| {
            let u = scores
                .get(id.as_str())
                .ok_or_else(|| CliError::data(stage, format!("no score for id {id}")))?;
            let y = labels
                .get(id)
                .ok_or_else(|| selsql::Error::MissingLabel(id.clone()))
                .stage(stage)?;
            Ok((*u, *y))
        })
        .collect()
}

fn score_map(sv: &ScoreVector) -> BTreeMap<&str, f64> {
    sv.entries().iter().map(|(id, u)| (id.as_str(), *u)).collect()
}

pub fn run_score(args: &ScoreArgs) -> Result<(), CliError> {
    let mut records = load_log(&args.input).stage(Stage::Load)?;
    if let Some(path) = &args.labels {
        merge_labels(&mut records, &load_labels(path).stage(Stage::Labels)?);
    }
    let sv = ScoreVector::compute(args.method, &records).stage(Stage::Score)?;
    write_jsonl(&args.output, &sv.to_lines()).stage(Stage::Report)?;
    if let Some(path) = &args.labels_out {
        write_labels(path, &derive_labels(&records).stage(Stage::Labels)?).stage(Stage::Report)?;
    }
    Ok(())
}

pub fn run_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let sv = load_scores(&args.scores)?;
    let labels = load_labels(&args.labels).stage(Stage::Labels)?;
    let ids: Vec<String> = sv.entries().iter().map(|(id, _)| id.clone()).collect();
    let split = resolve_split(&args.selection, &ids)?;
    let fit_ids = side_ids(&split, args.fit_split);
    let fit_err = gather(&fit_ids, &score_map(&sv), &labels, Stage::Calibrate)?;
    let fit_ok: Vec<(f64, u8)> = fit_err.iter().map(|&(u, y)| (u, 1 - y)).collect();
    let cal = fit_calibrator(args.method, &fit_ok, args.invert).stage(Stage::Calibrate)?;
    write_json(&args.output, &cal).stage(Stage::Report)
}

pub fn run_apply(args: &ApplyArgs) -> Result<(), CliError> {
    let cal: Calibrator = read_json(&args.calibrator).stage(Stage::Load)?;
    cal.validate().stage(Stage::Load)?;
    let sv = load_scores(&args.scores)?;
    let lines: Vec<CalibratedLine> = sv
        .entries()
        .iter()
        .map(|(id, u)| CalibratedLine {
            id: id.clone(),
            u: *u,
            u_c: cal.apply(*u),
        })
        .collect();
    write_jsonl(&args.output, &lines).stage(Stage::Report)
}

pub fn run_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let sv = load_scores(&args.scores)?;
    let labels = load_labels(&args.labels).stage(Stage::Labels)?;
    let ids: Vec<String> = sv.entries().iter().map(|(id, _)| id.clone()).collect();
    let split = resolve_split(&args.selection, &ids)?;
    let fit_ids = side_ids(&split, args.fit_split);
    let eval_ids = side_ids(&split, args.eval_split);
    ensure_disjoint(&fit_ids, &eval_ids).stage(Stage::Classify)?;
    let scores = score_map(&sv);
    let fit = gather(&fit_ids, &scores, &labels, Stage::Classify)?;
    let options = GmmOptions {
        seed: args.selection.seed,
        restarts: args.restarts,
        ..GmmOptions::default()
    };
    let clf = fit_classifier(args.method, &fit, ThresholdObjective::FBeta(args.beta), options)
        .stage(Stage::Classify)?;
    let mut lines = Vec::with_capacity(eval_ids.len());
    for id in &eval_ids {
        let u = scores
            .get(id.as_str())
            .ok_or_else(|| CliError::data(Stage::Classify, format!("no score for id {id}")))?;
        lines.push(DecisionLine::from(&clf.predict(id, *u)));
    }
    write_jsonl(&args.output, &lines).stage(Stage::Report)?;
    if let Some(path) = &args.params_out {
        write_json(path, &clf).stage(Stage::Report)?;
    }
    Ok(())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let lines: Vec<DecisionLine> = read_jsonl(&args.decisions).stage(Stage::Load)?;
    if lines.is_empty() {
        return Err(CliError::data(Stage::Load, "decision file is empty"));
    }
    let decisions: Vec<Decision> = lines
        .iter()
        .map(|l| Decision {
            id: l.id.clone(),
            abstain: l.abstain,
            p_error: l.p_error,
            hard: false,
        })
        .collect();
    let eval_ids: Vec<String> = decisions.iter().map(|d| d.id.clone()).collect();
    if let Some(path) = &args.split {
        let split: SplitResult = read_json(path).stage(Stage::Split)?;
        ensure_disjoint(split.known_ids(), &eval_ids).stage(Stage::Evaluate)?;
    }
    let sv = load_scores(&args.scores)?;
    let method = sv.method().as_str();
    let labels = load_labels(&args.labels).stage(Stage::Labels)?;
    let eval_err = gather(&eval_ids, &score_map(&sv), &labels, Stage::Evaluate)?;
    let eval_ok: Vec<(f64, u8)> = eval_err.iter().map(|&(u, y)| (u, 1 - y)).collect();
    let metrics = selective_metrics(&decisions, &labels, &args.betas)?;

    let dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(Stage::Report, format!("{}: {e}", dir.display())))?;

    let mut rc = curves::risk_coverage_table();
    curves::push_risk_coverage(&mut rc, method, &eval_err)?;
    rc.write(&dir.join(curves::RISK_COVERAGE))?;

    let mut roc = curves::roc_table();
    curves::push_roc(&mut roc, method, "score", &eval_err)?;
    let p_points: Vec<(f64, u8)> = decisions
        .iter()
        .zip(&eval_err)
        .map(|(d, &(_, y))| (d.p_error, y))
        .collect();
    curves::push_roc(&mut roc, method, "decisions", &p_points)?;
    roc.write(&dir.join(curves::ROC))?;

    let mut fbeta = curves::fbeta_table();
    curves::push_fbeta(&mut fbeta, method, "decisions", &metrics);
    fbeta.write(&dir.join(curves::FBETA_HEATMAP))?;

    let mut calibration = Vec::new();
    if !args.calibrators.is_empty() {
        let mut rel = curves::reliability_table();
        for path in &args.calibrators {
            let cal: Calibrator = read_json(path).stage(Stage::Load)?;
            cal.validate().stage(Stage::Load)?;
            let pairs: Vec<(f64, u8)> = eval_ok.iter().map(|&(u, y)| (cal.apply(u), y)).collect();
            let brier_sum = metrics::brier_sum(&pairs).stage(Stage::Evaluate)?;
            curves::push_reliability(&mut rel, method, cal.kind().as_str(), &pairs, args.bins)?;
            calibration.push(CalibrationEntry {
                calibrator: cal.kind(),
                params: cal,
                brier: brier_sum / pairs.len() as f64,
                brier_sum,
                n_eval: pairs.len(),
            });
        }
        rel.write(&dir.join(curves::RELIABILITY))?;
    }

    if let Some(path) = &args.input {
        let records = load_log(path).stage(Stage::Load)?;
        let sql: BTreeMap<&str, &str> = records
            .iter()
            .map(|r| (r.id.as_str(), r.pred_sql.as_str()))
            .collect();
        let mut scatter = curves::complexity_table();
        for (d, &(_, y)) in decisions.iter().zip(&eval_err) {
            let text = sql
                .get(d.id.as_str())
                .ok_or_else(|| CliError::data(Stage::Complexity, format!("id {} not in the log", d.id)))?;
            let f = metrics::complexity_features(text)
                .map_err(|e| CliError::data(Stage::Complexity, format!("record {}: {e}", d.id)))?;
            curves::push_complexity(&mut scatter, method, "decisions", &d.id, d.p_error, f, y);
        }
        scatter.write(&dir.join(curves::COMPLEXITY_SCATTER))?;
    }

    let report = EvaluateReport {
        format_version: FORMAT_VERSION,
        score_method: Some(sv.method()),
        score_roc_auc: metrics::roc_auc(&eval_err).ok(),
        betas: args.betas.clone(),
        calibration,
        metrics,
    };
    let value = serde_json::to_value(&report).map_err(|e| CliError::data(Stage::Report, e.to_string()))?;
    validate_evaluate_report(&value).map_err(|e| CliError::data(Stage::Report, e))?;
    write_json(&args.out, &report).stage(Stage::Report)
}

pub fn run_split(args: &SplitArgs) -> Result<(), CliError> {
    let items = load_dataset(&args.input).stage(Stage::Load)?;
    let schema: Option<Schema> = match &args.schema {
        Some(path) => Some(read_json(path).stage(Stage::Load)?),
        None => None,
    };
    let result = match args.kind {
        SplitKindArg::Template => template_split(&items, args.fraction, args.seed, schema.as_ref()),
        SplitKindArg::Length => length_split(&items, args.fraction),
        SplitKindArg::Iid => {
            let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
            iid_split(&ids, args.fraction, args.seed)
        }
    }
    .stage(Stage::Split)?;
    write_json(&args.out, &result).stage(Stage::Report)
}

pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let records = make_synthetic(args.n, args.separation, args.error_rate, args.seed).stage(Stage::Config)?;
    write_log(&args.output, &records).stage(Stage::Report)
}

pub fn run_pipeline_command(args: &PipelineArgs) -> Result<(), CliError> {
    let cfg = args.to_config()?;
    let out = run_pipeline(&cfg)?;
    for path in &out.files {
        println!("{}", path.display());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Score(a) => run_score(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Apply(a) => run_apply(a),
        Command::Classify(a) => run_classify(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Split(a) => run_split(a),
        Command::Synth(a) => run_synth(a),
        Command::Pipeline(a) => run_pipeline_command(a),
    }
}
