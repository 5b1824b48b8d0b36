//! Batch runner for `selsql`: the `selsql` command line, the end-to-end
//! pipeline and its report bundle (JSON report, CSV tables, optional SVG).

pub mod commands;
pub mod config;
pub mod curves;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod table;

pub use config::PipelineConfig;
pub use error::{CliError, Stage};
pub use pipeline::{run_pipeline, PipelineOutput, REPORT_FILE};
pub use report::{validate_report, Report, REPORT_FIELDS};
