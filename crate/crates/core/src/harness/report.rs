//! Experiment reports: per-cell results, per-stage summaries, and their
//! text and JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::ann::ModelKind;
use crate::error::{Error, Result};
use crate::labels::Stage;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Completed {
        /// Percent of the test set classified correctly.
        accuracy: f64,
        /// `confusion[true][predicted]`.
        confusion: Vec<Vec<u64>>,
        iterations: usize,
        final_loss: f64,
        /// Present only when timings were requested; wall time would
        /// otherwise break byte-for-byte reproducibility.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wall_time_ms: Option<f64>,
    },
    Failed {
        diagnostic: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub stage: Stage,
    /// `None` for the environment stage, which uses audio only.
    pub combination: Option<u8>,
    pub variant: Option<u8>,
    pub kind: ModelKind,
    pub normalized: bool,
    pub iteration_budget: u64,
    pub max_iterations: usize,
    pub outcome: CellOutcome,
}

impl CellReport {
    pub fn accuracy(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Completed { accuracy, .. } => Some(accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationBest {
    pub combination: u8,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    /// Index of the most accurate completed cell; ties keep the earliest.
    pub best_cell: Option<usize>,
    pub best_accuracy: Option<f64>,
    /// Best accuracy per combination. A stage without combinations (the
    /// environment stage) repeats its overall best in every column.
    pub by_combination: Vec<CombinationBest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub seed: u64,
    pub dataset_digest: String,
    pub cells: Vec<CellReport>,
    pub stages: Vec<StageSummary>,
    /// Plain mean of the stage bests.
    pub overall_average: Option<f64>,
}

impl ExperimentReport {
    pub(crate) fn assemble(seed: u64, dataset_digest: String, config: &ExperimentConfig, cells: Vec<CellReport>) -> Self {
        let combinations = &config.experiment.combinations;
        let stages: Vec<StageSummary> = config
            .experiment
            .stages
            .iter()
            .map(|&stage| summarize(stage, &cells, combinations))
            .collect();
        let bests: Vec<f64> = stages.iter().filter_map(|s| s.best_accuracy).collect();
        let overall_average = (!bests.is_empty()).then(|| bests.iter().sum::<f64>() / bests.len() as f64);
        ExperimentReport { schema_version: REPORT_SCHEMA_VERSION, seed, dataset_digest, cells, stages, overall_average }
    }
}

fn best_of<'a>(cells: impl Iterator<Item = &'a CellReport>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for c in cells {
        if let Some(a) = c.accuracy() {
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((c.index, a));
            }
        }
    }
    best
}

fn summarize(stage: Stage, cells: &[CellReport], combinations: &[u8]) -> StageSummary {
    let best = best_of(cells.iter().filter(|c| c.stage == stage));
    let by_combination = combinations
        .iter()
        .map(|&id| CombinationBest {
            combination: id,
            accuracy: if stage == Stage::Env {
                best.map(|b| b.1)
            } else {
                best_of(cells.iter().filter(|c| c.stage == stage && c.combination == Some(id))).map(|b| b.1)
            },
        })
        .collect();
    StageSummary { stage, best_cell: best.map(|b| b.0), best_accuracy: best.map(|b| b.1), by_combination }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format `{other}` (expected text or json)"))),
        }
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    let report: ExperimentReport =
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("malformed report: {e}")))?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "report schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    Ok(report)
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |a| format!("{a:.2}"))
}

fn render_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  dataset {}", report.seed, report.dataset_digest);
    for summary in &report.stages {
        let stage = summary.stage;
        let _ = writeln!(out, "\n{} stage", stage.name());
        let _ = writeln!(
            out,
            "{:<22} | {:<5} | {:<10} | {:>10} | {:>10} | {:>8}",
            "Dataset (Combination)", "Model", "Normalized", "Budget", "Iterations", "Accuracy"
        );
        let _ = writeln!(out, "{}", "-".repeat(82));
        for c in report.cells.iter().filter(|c| c.stage == stage) {
            let dataset = match (c.variant, c.combination) {
                (Some(v), Some(k)) => format!("{v} ({k})"),
                _ => "audio".to_string(),
            };
            let (iters, acc) = match &c.outcome {
                CellOutcome::Completed { accuracy, iterations, .. } => (iterations.to_string(), format!("{accuracy:.2}")),
                CellOutcome::Failed { .. } => ("-".to_string(), "failed".to_string()),
            };
            let _ = writeln!(
                out,
                "{:<22} | {:<5} | {:<10} | {:>10} | {:>10} | {:>8}",
                dataset,
                c.kind.as_str(),
                if c.normalized { "yes" } else { "no" },
                c.max_iterations,
                iters,
                acc
            );
            if let CellOutcome::Failed { diagnostic } = &c.outcome {
                let _ = writeln!(out, "    cell {}: {diagnostic}", c.index);
            }
        }
    }

    let combos: Vec<u8> = report.stages.first().map(|s| s.by_combination.iter().map(|b| b.combination).collect()).unwrap_or_default();
    let _ = writeln!(out, "\nSummary");
    let mut header = format!("{:<18}", "Stage");
    for k in &combos {
        let _ = write!(header, " | {:>13}", format!("Combination {k}"));
    }
    let _ = write!(header, " | {:>8}", "Best");
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));
    for s in &report.stages {
        let mut row = format!("{:<18}", s.stage.name());
        for b in &s.by_combination {
            let _ = write!(row, " | {:>13}", pct(b.accuracy));
        }
        let _ = write!(row, " | {:>8}", pct(s.best_accuracy));
        let _ = writeln!(out, "{row}");
    }
    let mut row = format!("{:<18}", "Average accuracy");
    for (i, _) in combos.iter().enumerate() {
        let col: Vec<f64> = report.stages.iter().filter_map(|s| s.by_combination[i].accuracy).collect();
        let mean = (!col.is_empty()).then(|| col.iter().sum::<f64>() / col.len() as f64);
        let _ = write!(row, " | {:>13}", pct(mean));
    }
    let _ = write!(row, " | {:>8}", pct(report.overall_average));
    let _ = writeln!(out, "{row}");
    out
}
