//! Conditions × seeds → fits → test metrics, plus aggregation.

mod report;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logreg::{fit, FitReport, ProbeConfig};
use crate::metrics::{self, ClassMetrics, ConfusionMatrix, MacroSummary};
use crate::optimizer::Status;
use crate::sampling::{budget_sample, stratified_split, SampleSelection};
use crate::store::EmbeddingDataset;
use crate::{Error, Result, Scalar};

pub use report::{compare, Comparison, ComparisonRow, SweepReport};

/// Which training rows a run may use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Condition {
    /// `b` labeled rows per class.
    Budget(u32),
    /// Train side of a per-seed stratified split; the other side is unused.
    Fraction(f64),
    /// Every training row; independent of the seed.
    Full,
}

impl Condition {
    pub fn budget(&self) -> Option<u32> {
        match self {
            Condition::Budget(b) => Some(*b),
            _ => None,
        }
    }

    /// File-name friendly label.
    pub fn slug(&self) -> String {
        self.to_string().replace(['=', '.'], "_")
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Budget(b) => write!(f, "budget={b}"),
            Condition::Fraction(p) => write!(f, "fraction={p}"),
            Condition::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "cannot parse condition {s:?} (expected budget=B, fraction=P or full)"
            ))
        };
        match s.trim().split_once('=') {
            None if s.trim() == "full" => Ok(Condition::Full),
            Some(("budget", b)) => match b.trim().parse::<u32>() {
                Ok(b) if b > 0 => Ok(Condition::Budget(b)),
                _ => Err(bad()),
            },
            Some(("fraction", p)) => match p.trim().parse::<f64>() {
                Ok(p) if p > 0.0 && p < 1.0 => Ok(Condition::Fraction(p)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for Condition {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Inclusive seed range written `a..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("empty seed range {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, end: 99 }
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for SeedRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("cannot parse seed range {s:?} (expected a..b)")))
        };
        match s.split_once("..") {
            Some((a, b)) => SeedRange::new(parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                SeedRange::new(v, v)
            }
        }
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for SeedRange {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub seeds: SeedRange,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub emit_selections: bool,
    /// Worker threads; execution detail, kept out of reports.
    #[serde(skip, default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(conditions: Vec<Condition>, seeds: SeedRange) -> Self {
        Self {
            conditions,
            seeds,
            probe: ProbeConfig::default(),
            emit_selections: false,
            parallelism: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::Config("no conditions to run".into()));
        }
        if self.conditions.iter().filter(|c| matches!(c, Condition::Full)).count() > 1 {
            return Err(Error::Config("`full` may appear at most once".into()));
        }
        for (i, a) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(a) {
                return Err(Error::Config(format!("condition {a} is listed twice")));
            }
        }
        self.probe.validate()
    }

    /// `(condition, seed)` pairs in canonical order: condition-major, seed-minor.
    pub fn jobs(&self) -> Vec<(Condition, Option<u64>)> {
        self.conditions
            .iter()
            .flat_map(|&c| -> Vec<(Condition, Option<u64>)> {
                match c {
                    Condition::Full => vec![(c, None)],
                    _ => self.seeds.iter().map(|s| (c, Some(s))).collect(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub condition: Condition,
    /// `None` for the seed-independent `full` condition.
    pub seed: Option<u64>,
    pub effective_counts: Vec<usize>,
    pub fit: FitReport,
    pub confusion: ConfusionMatrix,
    pub class_metrics: ClassMetrics,
    pub summary: MacroSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<usize>>,
    #[serde(skip)]
    pub duration: Duration,
}

fn check_compatible<T: Scalar>(train: &EmbeddingDataset<T>, test: &EmbeddingDataset<T>) -> Result<()> {
    if train.classes() != test.classes() {
        return Err(Error::Consistency("train and test class catalogs differ".into()));
    }
    if train.dim() != test.dim() {
        return Err(Error::Consistency(format!(
            "train has dimension {}, test {}",
            train.dim(),
            test.dim()
        )));
    }
    Ok(())
}

/// Fits one probe and scores it on the test split.
pub fn run_single<T: Scalar>(
    train: &EmbeddingDataset<T>,
    test: &EmbeddingDataset<T>,
    condition: Condition,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<RunResult> {
    check_compatible(train, test)?;
    let started = Instant::now();
    let (selection, seed) = match condition {
        Condition::Budget(b) => (budget_sample(train, b, seed)?, Some(seed)),
        Condition::Fraction(p) => (stratified_split(train, p, seed)?.0, Some(seed)),
        Condition::Full => (
            SampleSelection {
                selected: (0..train.n_rows()).collect(),
                seed: 0,
                condition: crate::sampling::SampleCondition::Fraction { train_share: 1.0 },
                effective_counts: train.class_counts(),
            },
            None,
        ),
    };
    let fitted = fit(train, &selection, probe)?;
    if fitted.report.status == Status::LineSearchFailure {
        log::warn!(
            "{condition} seed {seed:?}: line search failed after {} iterations",
            fitted.report.iterations
        );
    }
    let predictions = fitted.model.predict(test.data())?;
    let (confusion, class_metrics, summary) = metrics::evaluate(test.labels(), &predictions, test.n_classes())?;
    Ok(RunResult {
        condition,
        seed,
        effective_counts: selection.effective_counts,
        fit: fitted.report,
        confusion,
        class_metrics,
        summary,
        selection: Some(selection.selected),
        duration: started.elapsed(),
    })
}

/// Runs every `(condition, seed)` pair. Results come back in canonical order
/// whatever the worker count; the first failing pair aborts the sweep.
pub fn run_sweep<T: Scalar>(
    cfg: &ExperimentConfig,
    train: &EmbeddingDataset<T>,
    test: &EmbeddingDataset<T>,
) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    check_compatible(train, test)?;
    let jobs = cfg.jobs();
    let run = |&(condition, seed): &(Condition, Option<u64>)| {
        run_single(train, test, condition, seed.unwrap_or(0), &cfg.probe)
            .map(|mut r| {
                if !cfg.emit_selections {
                    r.selection = None;
                }
                r
            })
            .map_err(|e| Error::Run {
                condition: condition.to_string(),
                seed: seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
                source: Box::new(e),
            })
    };
    let outcomes: Vec<Result<RunResult>> = if cfg.parallelism <= 1 {
        jobs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.parallelism)))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };
    outcomes.into_iter().collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        // summing n copies of v need not give n·v exactly
        if values.iter().all(|&v| v == values[0]) {
            return Self {
                mean: values[0],
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub converged: usize,
    pub iteration_cap: usize,
    pub line_search_failure: usize,
}

/// Summary of all runs of one condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub condition: Condition,
    pub runs: usize,
    /// False when only one run exists and the standard deviations are placeholders.
    pub std_defined: bool,
    pub macro_f1: Stat,
    pub overall_accuracy: Stat,
    pub macro_recall: Stat,
    pub macro_precision: Stat,
    pub per_class_f1: Vec<Stat>,
    pub test_support: Vec<u64>,
    /// Element-wise mean of the row-normalized confusion matrices.
    pub mean_confusion: Vec<Vec<f64>>,
    pub fit_status: StatusCounts,
}

/// Per-condition aggregates, in order of first appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub conditions: Vec<ConditionAggregate>,
}

impl AggregateResult {
    pub fn get(&self, condition: &Condition) -> Option<&ConditionAggregate> {
        self.conditions.iter().find(|a| a.condition == *condition)
    }
}

fn aggregate_group(condition: Condition, runs: &[&RunResult]) -> ConditionAggregate {
    let pick = |f: &dyn Fn(&RunResult) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
    let k = runs[0].class_metrics.f1.len();
    let per_class_f1 = (0..k).map(|c| Stat::of(&pick(&|r| r.class_metrics.f1[c]))).collect();

    let mut mean_confusion = vec![vec![0.0; k]; k];
    for run in runs {
        for (acc_row, row) in mean_confusion.iter_mut().zip(run.confusion.row_normalized()) {
            for (acc, v) in acc_row.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    for v in mean_confusion.iter_mut().flatten() {
        *v /= runs.len() as f64;
    }

    let mut fit_status = StatusCounts::default();
    for run in runs {
        match run.fit.status {
            Status::Converged => fit_status.converged += 1,
            Status::IterationCap => fit_status.iteration_cap += 1,
            Status::LineSearchFailure => fit_status.line_search_failure += 1,
        }
    }

    ConditionAggregate {
        condition,
        runs: runs.len(),
        std_defined: runs.len() > 1,
        macro_f1: Stat::of(&pick(&|r| r.summary.macro_f1)),
        overall_accuracy: Stat::of(&pick(&|r| r.summary.overall_accuracy)),
        macro_recall: Stat::of(&pick(&|r| r.summary.macro_recall)),
        macro_precision: Stat::of(&pick(&|r| r.summary.macro_precision)),
        per_class_f1,
        test_support: runs[0].class_metrics.support.clone(),
        mean_confusion,
        fit_status,
    }
}

/// Means and n − 1 standard deviations per condition.
pub fn aggregate(results: &[RunResult]) -> Result<AggregateResult> {
    if results.is_empty() {
        return Err(Error::Degenerate("no runs to aggregate".into()));
    }
    let k = results[0].class_metrics.f1.len();
    if results.iter().any(|r| r.class_metrics.f1.len() != k) {
        return Err(Error::Consistency("runs disagree on the number of classes".into()));
    }
    let mut order: Vec<Condition> = Vec::new();
    for r in results {
        if !order.contains(&r.condition) {
            order.push(r.condition);
        }
    }
    let conditions = order
        .into_iter()
        .map(|c| {
            let group: Vec<&RunResult> = results.iter().filter(|r| r.condition == c).collect();
            aggregate_group(c, &group)
        })
        .collect();
    Ok(AggregateResult { conditions })
}
