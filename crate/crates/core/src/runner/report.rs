//! Sweep report files and baseline comparison tables.
//!
//! Everything written here is a deterministic function of the sweep inputs,
//! except `timings.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{aggregate, AggregateResult, ConditionAggregate, ExperimentConfig, RunResult};
use crate::metrics::BaselineReference;
use crate::{Error, Result};

pub const REPORT_FILE: &str = "sweep_report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub classes: Vec<String>,
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub aggregates: AggregateResult,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl SweepReport {
    pub fn new(config: ExperimentConfig, classes: Vec<String>, runs: Vec<RunResult>) -> Result<Self> {
        let aggregates = aggregate(&runs)?;
        Ok(Self {
            classes,
            config,
            runs,
            aggregates,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Flat per-run table.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "condition,seed,macro_f1,overall_accuracy,macro_recall,macro_precision,status,iterations,objective",
        );
        for c in &self.classes {
            out.push_str(&format!(",{}", csv_field(&format!("f1_{c}"))));
        }
        out.push('\n');
        for r in &self.runs {
            let status = serde_json::to_value(r.fit.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                r.condition,
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.summary.macro_f1,
                r.summary.overall_accuracy,
                r.summary.macro_recall,
                r.summary.macro_precision,
                status,
                r.fit.iterations,
                r.fit.objective,
            ));
            for f in &r.class_metrics.f1 {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
        out
    }

    /// Learning-curve points: one row per condition.
    pub fn learning_curve_csv(&self) -> String {
        let mut out = String::from(
            "condition,budget,runs,mean_macro_f1,std_macro_f1,mean_overall_accuracy,std_overall_accuracy,mean_macro_recall,std_macro_recall\n",
        );
        for a in &self.aggregates.conditions {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                a.condition,
                a.condition.budget().map(|b| b.to_string()).unwrap_or_default(),
                a.runs,
                a.macro_f1.mean,
                a.macro_f1.std,
                a.overall_accuracy.mean,
                a.overall_accuracy.std,
                a.macro_recall.mean,
                a.macro_recall.std,
            ));
        }
        out
    }

    /// Mean row-normalized confusion matrix of one condition, with class headers.
    pub fn confusion_csv(&self, agg: &ConditionAggregate) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.classes.iter().zip(&agg.mean_confusion) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    fn timings_csv(&self) -> String {
        let mut out = String::from("condition,seed,duration_ms\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{:.3}\n",
                r.condition,
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.duration.as_secs_f64() * 1e3
            ));
        }
        out
    }

    /// Writes the JSON report, `runs.csv`, `learning_curve.csv`,
    /// `confusion_<condition>.csv` per condition and `timings.csv`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(REPORT_FILE), self.to_json()?.as_bytes())?;
        write_file(&dir.join("runs.csv"), self.runs_csv().as_bytes())?;
        write_file(&dir.join("learning_curve.csv"), self.learning_curve_csv().as_bytes())?;
        for agg in &self.aggregates.conditions {
            let name = format!("confusion_{}.csv", agg.condition.slug());
            write_file(&dir.join(name), self.confusion_csv(agg).as_bytes())?;
        }
        write_file(&dir.join("timings.csv"), self.timings_csv().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub class: String,
    pub test_support: u64,
    pub ours_mean: f64,
    pub ours_std: f64,
    pub baseline: f64,
    pub delta: f64,
    /// Strictly better than the baseline.
    pub outperforms: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline_name: String,
    pub condition: String,
    pub rows: Vec<ComparisonRow>,
    pub macro_row: ComparisonRow,
}

/// Per-class ours-vs-baseline table for one condition's aggregate.
pub fn compare(agg: &ConditionAggregate, classes: &[String], baseline: &BaselineReference) -> Result<Comparison> {
    let means: Vec<f64> = agg.per_class_f1.iter().map(|s| s.mean).collect();
    let deltas = crate::metrics::delta_f1(&means, classes, baseline)?;
    let reference = baseline.aligned_f1(classes)?;
    let rows = classes
        .iter()
        .enumerate()
        .map(|(c, name)| ComparisonRow {
            class: name.clone(),
            test_support: agg.test_support.get(c).copied().unwrap_or(0),
            ours_mean: means[c],
            ours_std: agg.per_class_f1[c].std,
            baseline: reference[c],
            delta: deltas[c],
            outperforms: deltas[c] > 0.0,
        })
        .collect();
    let macro_delta = agg.macro_f1.mean - baseline.macro_f1;
    Ok(Comparison {
        baseline_name: baseline.name.clone(),
        condition: agg.condition.to_string(),
        rows,
        macro_row: ComparisonRow {
            class: "macro_avg".into(),
            test_support: agg.test_support.iter().sum(),
            ours_mean: agg.macro_f1.mean,
            ours_std: agg.macro_f1.std,
            baseline: baseline.macro_f1,
            delta: macro_delta,
            outperforms: macro_delta > 0.0,
        },
    })
}

impl Comparison {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("class,test_support,ours_mean_f1,ours_std_f1,baseline_f1,delta_f1,outperforms\n");
        for r in self.rows.iter().chain(std::iter::once(&self.macro_row)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&r.class),
                r.test_support,
                r.ours_mean,
                r.ours_std,
                r.baseline,
                r.delta,
                r.outperforms
            ));
        }
        out
    }

    /// Bar-chart data sorted by ΔF1, largest gain first.
    pub fn delta_bars_csv(&self) -> String {
        let mut rows: Vec<&ComparisonRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.delta.total_cmp(&a.delta).then_with(|| a.class.cmp(&b.class)));
        let mut out = String::from("class,delta_f1,outperforms\n");
        for r in rows {
            out.push_str(&format!("{},{},{}\n", csv_field(&r.class), r.delta, r.outperforms));
        }
        out
    }

    /// Human-readable table with three decimals.
    pub fn render(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "condition {} vs {}", self.condition, self.baseline_name)?;
        writeln!(
            w,
            "{:<18} {:>6} {:>15} {:>9} {:>8}",
            "class", "n", "ours F1", "baseline", "ΔF1"
        )?;
        for r in self.rows.iter().chain(std::iter::once(&self.macro_row)) {
            writeln!(
                w,
                "{:<18} {:>6} {:>7.3} ± {:.3} {:>9.3} {:>+8.3}{}",
                r.class,
                r.test_support,
                r.ours_mean,
                r.ours_std,
                r.baseline,
                r.delta,
                if r.outperforms { " *" } else { "" }
            )?;
        }
        Ok(())
    }

    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("comparison.csv"), self.table_csv().as_bytes())?;
        write_file(&dir.join("delta_f1.csv"), self.delta_bars_csv().as_bytes())
    }
}
