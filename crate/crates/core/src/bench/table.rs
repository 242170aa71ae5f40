use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RunRecord, TargetSpec};
use crate::activation::ActivationKind;
use crate::datagen::{TargetKind, TransformKind};
use crate::error::{Error, Result};

/// Which per-run MAE a table aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Minimum test MAE over all epochs.
    #[default]
    Best,
    /// Test MAE after the last epoch.
    Final,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Self::Best),
            "final" => Ok(Self::Final),
            _ => Err(Error::Config(format!("unknown metric {s:?}; valid: best, final"))),
        }
    }
}

impl Metric {
    pub fn of(self, record: &RunRecord) -> Option<f64> {
        let report = record.train_report.as_ref()?;
        match self {
            Self::Best => report.best_test_mae,
            Self::Final => report.final_test_mae,
        }
    }
}

/// Aggregate over the completed runs of one variant of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    /// Completed runs entering the mean.
    pub runs: usize,
    /// Failed runs, excluded from the mean.
    pub failed: usize,
}

impl RunStats {
    pub fn from_values(values: &[f64], failed: usize) -> Option<Self> {
        if values.is_empty() && failed == 0 {
            return None;
        }
        let n = values.len();
        let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self {
            mean,
            std,
            runs: n,
            failed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub target: TargetSpec,
    pub activation: ActivationKind,
    pub baseline: Option<RunStats>,
    pub seagull: Option<RunStats>,
    /// Published (baseline, seagull) values for this cell, when known.
    pub reference: Option<(f64, f64)>,
}

impl ReportCell {
    /// True when both variants have at least one completed run and Seagull's
    /// mean is lower.
    pub fn seagull_wins(&self) -> Option<bool> {
        let (b, s) = (self.baseline?, self.seagull?);
        if b.runs == 0 || s.runs == 0 {
            return None;
        }
        Some(s.mean < b.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub metric: Metric,
    pub rows: Vec<TargetSpec>,
    pub columns: Vec<ActivationKind>,
    /// Row-major, `rows.len() * columns.len()` entries.
    pub cells: Vec<ReportCell>,
    pub noisy: bool,
    pub train_n: Option<usize>,
}

/// Groups records by cell. Rows and columns keep first-appearance order;
/// cells with no records are kept as explicit gaps.
pub fn emit_table(records: &[RunRecord], metric: Metric) -> ReportTable {
    let mut rows: Vec<TargetSpec> = Vec::new();
    let mut columns: Vec<ActivationKind> = Vec::new();
    for r in records {
        if !rows.contains(&r.cell.target) {
            rows.push(r.cell.target);
        }
        if !columns.contains(&r.cell.activation) {
            columns.push(r.cell.activation);
        }
    }
    let noisy = records.iter().any(|r| r.noise.enabled);
    let train_n = records.first().map(|r| r.train_n).filter(|n| records.iter().all(|r| r.train_n == *n));

    let stats_for = |target: TargetSpec, activation: ActivationKind, seagull: bool| {
        let mut values = Vec::new();
        let mut failed = 0;
        for r in records {
            if r.cell.target != target || r.cell.activation != activation || r.cell.seagull != seagull {
                continue;
            }
            match (r.is_completed(), metric.of(r)) {
                (true, Some(v)) => values.push(v),
                _ => failed += 1,
            }
        }
        RunStats::from_values(&values, failed)
    };

    let mut cells = Vec::with_capacity(rows.len() * columns.len());
    for &target in &rows {
        for &activation in &columns {
            cells.push(ReportCell {
                target,
                activation,
                baseline: stats_for(target, activation, false),
                seagull: stats_for(target, activation, true),
                reference: paper_reference(target, activation, noisy, train_n),
            });
        }
    }
    ReportTable {
        metric,
        rows,
        columns,
        cells,
        noisy,
        train_n,
    }
}

/// Published Tables 1 (clean) and 2 (noisy): rows are the five transforms,
/// columns ReLU, ELU, Sigmoid, Tanh, Softplus; entries (baseline, seagull).
#[derive(Debug, Clone, Copy)]
pub struct PaperTable {
    pub values: [[(f64, f64); 5]; 5],
}

pub const PAPER_TABLE_CLEAN: PaperTable = PaperTable {
    values: [
        [(0.105, 0.030), (0.059, 0.022), (0.172, 0.022), (0.205, 0.047), (0.047, 0.020)],
        [(0.032, 0.014), (0.024, 0.012), (0.048, 0.008), (0.076, 0.017), (0.018, 0.007)],
        [(0.137, 0.059), (0.092, 0.055), (0.254, 0.032), (0.225, 0.079), (0.069, 0.041)],
        [(0.082, 0.027), (0.042, 0.018), (0.106, 0.011), (0.169, 0.026), (0.030, 0.019)],
        [(0.024, 0.008), (0.015, 0.011), (0.072, 0.005), (0.054, 0.011), (0.011, 0.007)],
    ],
};

pub const PAPER_TABLE_NOISY: PaperTable = PaperTable {
    values: [
        [(0.126, 0.054), (0.078, 0.043), (0.159, 0.035), (0.236, 0.081), (0.059, 0.032)],
        [(0.041, 0.020), (0.027, 0.018), (0.042, 0.013), (0.087, 0.025), (0.022, 0.012)],
        [(0.160, 0.106), (0.123, 0.090), (0.185, 0.054), (0.266, 0.136), (0.094, 0.056)],
        [(0.092, 0.034), (0.056, 0.027), (0.271, 0.017), (0.174, 0.040), (0.032, 0.021)],
        [(0.026, 0.010), (0.018, 0.012), (0.038, 0.011), (0.054, 0.017), (0.013, 0.007)],
    ],
};

/// Published (baseline, seagull) MAE for a cell, if one exists.
pub fn paper_reference(target: TargetSpec, activation: ActivationKind, noisy: bool, train_n: Option<usize>) -> Option<(f64, f64)> {
    match target.target {
        TargetKind::TriangleArea => {
            let row = TransformKind::ALL.iter().position(|t| *t == target.transform)?;
            let col = ActivationKind::BASELINES.iter().position(|a| *a == activation)?;
            let table = if noisy { PAPER_TABLE_NOISY } else { PAPER_TABLE_CLEAN };
            Some(table.values[row][col])
        }
        TargetKind::SolidAnglePaper if !noisy && activation == ActivationKind::Relu && target.transform == TransformKind::Identity => {
            match train_n? {
                10_000 => Some((0.108, 0.080)),
                50_000 => Some((0.086, 0.043)),
                _ => None,
            }
        }
        _ => None,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stat_fields(s: Option<RunStats>) -> [String; 4] {
    match s {
        Some(s) if s.runs > 0 => [s.mean.to_string(), s.std.to_string(), s.runs.to_string(), s.failed.to_string()],
        Some(s) => [String::new(), String::new(), "0".into(), s.failed.to_string()],
        None => Default::default(),
    }
}

impl ReportTable {
    pub fn cell(&self, target: TargetSpec, activation: ActivationKind) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.target == target && c.activation == activation)
    }

    /// Number of cells where both variants have data, and how many of those
    /// Seagull wins.
    pub fn seagull_win_count(&self) -> (usize, usize) {
        let decided: Vec<bool> = self.cells.iter().filter_map(ReportCell::seagull_wins).collect();
        (decided.iter().filter(|w| **w).count(), decided.len())
    }

    /// One header line plus one line per cell.
    pub fn to_csv(&self, compare_paper: bool) -> String {
        let mut out = String::from(
            "target,transform,activation,baseline_mean,baseline_std,baseline_runs,baseline_failed,\
             seagull_mean,seagull_std,seagull_runs,seagull_failed",
        );
        if compare_paper {
            out.push_str(",paper_baseline,paper_seagull");
        }
        out.push('\n');
        for c in &self.cells {
            let mut fields = vec![c.target.target.to_string(), c.target.transform.to_string(), c.activation.to_string()];
            fields.extend(stat_fields(c.baseline));
            fields.extend(stat_fields(c.seagull));
            if compare_paper {
                fields.push(opt(c.reference.map(|r| r.0)));
                fields.push(opt(c.reference.map(|r| r.1)));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Mean MAE as `baseline (**seagull**)`, then a standard-deviation table
    /// and footnotes for failed runs.
    pub fn to_markdown(&self, compare_paper: bool) -> String {
        let mut out = String::new();
        let header = |out: &mut String| {
            out.push_str("| |");
            for a in &self.columns {
                let _ = write!(out, " {} |", column_label(*a));
            }
            out.push_str("\n|---|");
            for _ in &self.columns {
                out.push_str("---|");
            }
            out.push('\n');
        };
        let _ = writeln!(
            out,
            "{} test MAE{}. Outside parentheses: baseline network. Inside: first hidden activation replaced by Seagull.\n",
            match self.metric {
                Metric::Best => "Best-epoch",
                Metric::Final => "Final-epoch",
            },
            if self.noisy { ", 5% label noise" } else { "" }
        );
        header(&mut out);
        let mut footnotes = Vec::new();
        for &row in &self.rows {
            let _ = write!(out, "| {} |", row_label(row));
            for &a in &self.columns {
                let cell = self.cell(row, a).expect("rectangular layout");
                let mut text = format!("{} (**{}**)", mean_text(cell.baseline), mean_text(cell.seagull));
                let failed = cell.baseline.map_or(0, |s| s.failed) + cell.seagull.map_or(0, |s| s.failed);
                if failed > 0 {
                    footnotes.push(format!(
                        "{} / {}: {failed} diverged run(s) excluded from the mean.",
                        row_label(row),
                        column_label(a)
                    ));
                    let _ = write!(text, " [{}]", footnotes.len());
                }
                if compare_paper {
                    if let Some((b, s)) = cell.reference {
                        let _ = write!(text, " vs paper {b:.3} ({s:.3})");
                    }
                }
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        out.push_str("\nSample standard deviations:\n\n");
        header(&mut out);
        for &row in &self.rows {
            let _ = write!(out, "| {} |", row_label(row));
            for &a in &self.columns {
                let cell = self.cell(row, a).expect("rectangular layout");
                let _ = write!(out, " {} ({}) |", std_text(cell.baseline), std_text(cell.seagull));
            }
            out.push('\n');
        }
        if !footnotes.is_empty() {
            out.push('\n');
            for (i, f) in footnotes.iter().enumerate() {
                let _ = writeln!(out, "[{}] {f}", i + 1);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean_text(s: Option<RunStats>) -> String {
    match s {
        Some(s) if s.runs > 0 => format!("{:.3}", s.mean),
        _ => "n/a".into(),
    }
}

fn std_text(s: Option<RunStats>) -> String {
    match s {
        Some(s) if s.runs > 0 => format!("{:.3}", s.std),
        _ => "n/a".into(),
    }
}

fn row_label(t: TargetSpec) -> String {
    match t.target {
        TargetKind::TriangleArea => t.transform.formula().to_string(),
        _ => format!("{} {}", t.target, t.transform.formula()),
    }
}

fn column_label(a: ActivationKind) -> String {
    match a {
        ActivationKind::Relu => "ReLU".into(),
        ActivationKind::Elu { .. } => "ELU".into(),
        ActivationKind::Sigmoid => "Sigmoid".into(),
        ActivationKind::Tanh => "Tanh".into(),
        ActivationKind::Softplus => "SoftPlus".into(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_std() {
        let s = RunStats::from_values(&[0.25], 0).unwrap();
        assert_eq!((s.mean, s.std, s.runs), (0.25, 0.0, 1));
    }

    #[test]
    fn sample_std_by_hand() {
        let s = RunStats::from_values(&[1.0, 2.0, 4.0], 1).unwrap();
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-15);
        // deviations -4/3, -1/3, 5/3: squares sum to 42/9, over n-1 = 2
        assert!((s.std - (42.0f64 / 18.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.failed, 1);
    }

    #[test]
    fn reference_lookup() {
        let f = TargetSpec {
            target: TargetKind::TriangleArea,
            transform: TransformKind::Identity,
        };
        assert_eq!(paper_reference(f, ActivationKind::Relu, false, None), Some((0.105, 0.030)));
        assert_eq!(paper_reference(f, ActivationKind::Tanh, false, None), Some((0.205, 0.047)));
        assert_eq!(paper_reference(f, ActivationKind::Relu, true, None), Some((0.126, 0.054)));
        assert_eq!(paper_reference(f, ActivationKind::Sine, false, None), None);
        let sa = TargetSpec {
            target: TargetKind::SolidAnglePaper,
            transform: TransformKind::Identity,
        };
        assert_eq!(paper_reference(sa, ActivationKind::Relu, false, Some(50_000)), Some((0.086, 0.043)));
    }
}
