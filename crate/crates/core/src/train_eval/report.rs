use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::metrics::MetricsReport;
use crate::error::{Error, Result};

/// Everything needed to describe one training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub model: String,
    pub seed: u64,
    /// Flattened hyperparameter snapshot, `section.key -> value`.
    pub config: BTreeMap<String, String>,
    pub epoch_losses: Vec<f64>,
    pub train_metrics: MetricsReport,
    pub heldout_metrics: Option<MetricsReport>,
    /// Only field that differs between otherwise identical runs.
    pub wall_clock_seconds: f64,
}

pub const WALL_CLOCK_PREFIX: &str = "# nondeterministic: ";

fn metric_lines(out: &mut String, prefix: &str, m: &MetricsReport) {
    let _ = writeln!(out, "{}.accuracy = {}", prefix, m.accuracy);
    let _ = writeln!(out, "{}.macro_precision = {}", prefix, m.macro_p);
    let _ = writeln!(out, "{}.macro_recall = {}", prefix, m.macro_r);
    let _ = writeln!(out, "{}.macro_f1 = {}", prefix, m.macro_f1);
    let _ = writeln!(out, "{}.weighted_f1 = {}", prefix, m.weighted_f1);
    for (name, c) in ["clean", "offensive", "hate"].iter().zip(&m.per_class) {
        let _ = writeln!(
            out,
            "{}.{} = precision {} recall {} f1 {} support {}",
            prefix, name, c.precision, c.recall, c.f1, c.support
        );
    }
    let rows: Vec<String> = m
        .confusion
        .iter()
        .map(|r| format!("{} {} {}", r[0], r[1], r[2]))
        .collect();
    let _ = writeln!(out, "{}.confusion = {}", prefix, rows.join(" | "));
    for u in &m.undefined {
        let _ = writeln!(out, "{}.undefined = {}", prefix, u);
    }
}

impl RunRecord {
    /// Held-out metrics when present, otherwise training metrics.
    pub fn final_metrics(&self) -> &MetricsReport {
        self.heldout_metrics.as_ref().unwrap_or(&self.train_metrics)
    }

    /// `key = value` lines. Wall clock sits alone on the last line behind
    /// [`WALL_CLOCK_PREFIX`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model = {}", self.model);
        let _ = writeln!(out, "seed = {}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{} = {}", k, v);
        }
        let _ = writeln!(out, "epochs_run = {}", self.epoch_losses.len());
        for (i, l) in self.epoch_losses.iter().enumerate() {
            let _ = writeln!(out, "loss.{} = {}", i + 1, l);
        }
        metric_lines(&mut out, "train", &self.train_metrics);
        if let Some(h) = &self.heldout_metrics {
            metric_lines(&mut out, "heldout", h);
        }
        let _ = writeln!(
            out,
            "{}wall_clock_seconds = {:.3}",
            WALL_CLOCK_PREFIX, self.wall_clock_seconds
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let txt = dir.join("run_record.txt");
        std::fs::write(&txt, self.to_text()).map_err(|e| Error::io(&txt, e))?;
        let json = dir.join("run_record.json");
        std::fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankBy {
    #[default]
    MacroF1,
    WeightedF1,
}

/// One row of a comparison. `score` is `None` for a model that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub score: Option<f64>,
    pub note: Option<String>,
}

impl ComparisonRow {
    pub fn from_record(r: &RunRecord, by: RankBy) -> Self {
        let m = r.final_metrics();
        ComparisonRow {
            model: r.model.clone(),
            score: Some(match by {
                RankBy::MacroF1 => m.macro_f1,
                RankBy::WeightedF1 => m.weighted_f1,
            }),
            note: None,
        }
    }

    pub fn failed(model: &str, reason: impl Into<String>) -> Self {
        ComparisonRow {
            model: model.to_string(),
            score: None,
            note: Some(reason.into()),
        }
    }
}

/// Sort by score descending, ties by model name; failed rows go last.
pub fn rank(mut rows: Vec<ComparisonRow>) -> Vec<ComparisonRow> {
    rows.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.model.cmp(&b.model)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.cmp(&b.model),
    });
    rows
}

/// Fixed-width `Model | F1-Score` table, scores as percentages.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w$} | {:>8}", "Model", "F1-Score", w = width);
    let _ = writeln!(out, "{}-+-{}", "-".repeat(width), "-".repeat(8));
    for r in rows {
        match r.score {
            Some(s) => {
                let _ = writeln!(out, "{:<w$} | {:>8.2}", r.model, s * 100.0, w = width);
            }
            None => {
                let note = r.note.as_deref().unwrap_or("failed");
                let _ = writeln!(
                    out,
                    "{:<w$} | {:>8}  ({})",
                    r.model,
                    "failed",
                    note,
                    w = width
                );
            }
        }
    }
    out
}

pub fn compare(records: &[RunRecord], by: RankBy) -> String {
    comparison_table(&rank(
        records
            .iter()
            .map(|r| ComparisonRow::from_record(r, by))
            .collect(),
    ))
}
