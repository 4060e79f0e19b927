use std::fs;
use std::io::{self, Write};
use std::path::Path;

use labelprobe::logreg::ProbeConfig;
use labelprobe::metrics::BaselineReference;
use labelprobe::runner::{compare, run_single, run_sweep, Condition, ExperimentConfig, SweepReport};
use labelprobe::store::{self, Manifest, SplitTag, UNIT_NORM_TOLERANCE};
use labelprobe::Dataset;

use crate::failure::{CliResult, Failure};
use crate::{
    ConditionArgs, DataArgs, ExportArgs, IngestArgs, ProbeArgs, ReportArgs, SweepArgs, TrainArgs, ValidateArgs,
};

fn load(path: &Path, split: SplitTag) -> CliResult<Dataset> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let loaded = if is_csv {
        store::load_csv(path)
    } else {
        store::load_binary(path)
    };
    loaded
        .map(|ds| ds.with_split(split))
        .map_err(|e| Failure::data(e).context(format!("cannot load {}", path.display())))
}

fn load_pair(data: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    Ok((load(&data.train, SplitTag::Train)?, load(&data.test, SplitTag::Test)?))
}

/// Row with the largest deviation from unit norm, if it exceeds the tolerance.
fn norm_violation(ds: &Dataset) -> Option<(usize, f64)> {
    ds.worst_norm_row()
        .filter(|&(_, norm)| !((norm - 1.0).abs() <= UNIT_NORM_TOLERANCE))
}

fn require_unit_norm(ds: &Dataset, name: &str) -> CliResult {
    match norm_violation(ds) {
        None => Ok(()),
        Some((row, norm)) => Err(Failure::data(anyhow::anyhow!(
            "{name} row {row} has norm {norm} (rows must be unit length; `ingest-csv --normalize` fixes CSV input)"
        ))),
    }
}

fn probe_config(base: ProbeConfig, args: &ProbeArgs) -> ProbeConfig {
    ProbeConfig {
        c: args.c.unwrap_or(base.c),
        class_weighting: args.weighting.unwrap_or(base.class_weighting),
        max_iterations: args.max_iterations.unwrap_or(base.max_iterations),
        grad_tolerance: args.grad_tolerance.unwrap_or(base.grad_tolerance),
    }
}

fn stdout_failure(e: io::Error) -> Failure {
    Failure::runtime(e).context("cannot write to stdout")
}

struct Checks {
    failed: usize,
}

impl Checks {
    fn record(&mut self, name: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) if detail.is_empty() => println!("ok    {name}"),
            Ok(detail) => println!("ok    {name}: {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

pub fn validate(args: ValidateArgs) -> CliResult {
    let mut checks = Checks { failed: 0 };
    let describe = |ds: &Dataset| format!("n={} d={} K={}", ds.n_rows(), ds.dim(), ds.n_classes());
    let train = load(&args.data.train, SplitTag::Train);
    let test = load(&args.data.test, SplitTag::Test);
    checks.record("load-train", train.as_ref().map(describe).map_err(|e| e.to_string()));
    checks.record("load-test", test.as_ref().map(describe).map_err(|e| e.to_string()));

    if let (Ok(train), Ok(test)) = (&train, &test) {
        let catalog = if train.classes() == test.classes() {
            Ok(String::new())
        } else {
            let missing: Vec<&String> = train.classes().iter().filter(|c| !test.classes().contains(c)).collect();
            let extra: Vec<&String> = test.classes().iter().filter(|c| !train.classes().contains(c)).collect();
            Err(if missing.is_empty() && extra.is_empty() {
                "same classes in a different order".to_string()
            } else {
                format!("test lacks {missing:?}, test adds {extra:?}")
            })
        };
        checks.record("catalog-match", catalog);
        let dims = if train.dim() == test.dim() {
            Ok(String::new())
        } else {
            Err(format!("train d={}, test d={}", train.dim(), test.dim()))
        };
        checks.record("dim-match", dims);
        let norms = match (norm_violation(train), norm_violation(test)) {
            (None, None) => Ok(format!("all rows within {UNIT_NORM_TOLERANCE:e} of 1")),
            (Some((row, norm)), _) => Err(format!("worst offender train row {row}, norm {norm}")),
            (None, Some((row, norm))) => Err(format!("worst offender test row {row}, norm {norm}")),
        };
        checks.record("row-norm", norms);

        println!("{:<24} {:>8} {:>8}", "class", "train", "test");
        let test_counts = test.class_counts();
        for (name, n) in train.classes().iter().zip(train.class_counts()) {
            let t = test
                .classes()
                .iter()
                .position(|x| x == name)
                .map_or(0, |i| test_counts[i]);
            println!("{name:<24} {n:>8} {t:>8}");
        }
    }

    if let Some(path) = &args.manifest {
        let base = path.parent().unwrap_or(Path::new("."));
        let outcome = Manifest::load(path).and_then(|m| m.verify(base).map(|problems| (m, problems)));
        let verdict = match outcome {
            Ok((m, problems)) if problems.is_empty() => Ok(format!(
                "{} ({}), {} files",
                m.dataset_name,
                m.backbone_id,
                m.files.len()
            )),
            Ok((_, problems)) => Err(problems.join("; ")),
            Err(e) => Err(e.to_string()),
        };
        checks.record("manifest", verdict);
    }

    if checks.failed == 0 {
        Ok(())
    } else {
        Err(Failure::data(anyhow::anyhow!("{} check(s) failed", checks.failed)))
    }
}

pub fn ingest_csv(args: IngestArgs) -> CliResult {
    let ds: Dataset = store::load_csv(&args.input)
        .map_err(|e| Failure::data(e).context(format!("cannot ingest {}", args.input.display())))?;
    let ds = if args.normalize { ds.normalize_rows()? } else { ds };
    store::save_binary(&ds, &args.out)?;
    println!(
        "wrote {}: n={} d={} K={}",
        args.out.display(),
        ds.n_rows(),
        ds.dim(),
        ds.n_classes()
    );
    Ok(())
}

pub fn export_embeddings(args: ExportArgs) -> CliResult {
    let ds = load(&args.data, SplitTag::Unsplit)?;
    store::export_csv(&ds, &args.out)?;
    println!("wrote {} rows to {}", ds.n_rows(), args.out.display());
    Ok(())
}

fn condition_of(args: &ConditionArgs) -> CliResult<Condition> {
    let text = match (args.budget, args.fraction, args.full) {
        (Some(b), None, false) => format!("budget={b}"),
        (None, Some(p), false) => format!("fraction={p}"),
        (None, None, true) => "full".into(),
        _ => {
            return Err(Failure::usage(anyhow::anyhow!(
                "give exactly one of --budget, --fraction, --full"
            )))
        }
    };
    Ok(text.parse()?)
}

pub fn train(args: TrainArgs) -> CliResult {
    let condition = condition_of(&args.condition)?;
    let probe = probe_config(ProbeConfig::default(), &args.probe);
    probe.validate()?;
    let (train, test) = load_pair(&args.data)?;
    require_unit_norm(&train, "train")?;
    require_unit_norm(&test, "test")?;

    let result = run_single(&train, &test, condition, args.seed, &probe)?;
    if let Some(path) = &args.save_model {
        // the run record keeps metrics only; refitting the same rows is deterministic
        let rows = result.selection.as_deref().unwrap_or_default();
        let (x, y) = train.gather(rows)?;
        let fitted = labelprobe::logreg::fit_rows(x.view(), &y, train.classes(), &probe)?;
        fs::write(path, fitted.model.to_json()?)
            .map_err(|e| Failure::runtime(e).context(format!("cannot write {}", path.display())))?;
    }

    let mut out = io::stdout().lock();
    if args.json {
        let text = serde_json::to_string_pretty(&result).map_err(Failure::runtime)?;
        writeln!(out, "{text}").map_err(stdout_failure)?;
        return Ok(());
    }
    let seed = result.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    let lines = [
        format!(
            "condition {condition}, seed {seed}, {} training rows",
            result.effective_counts.iter().sum::<usize>()
        ),
        format!(
            "fit: {:?} after {} iterations, objective {:.6}",
            result.fit.status, result.fit.iterations, result.fit.objective
        ),
        format!(
            "macro F1 {:.4}  overall accuracy {:.4}  macro recall {:.4}  macro precision {:.4}",
            result.summary.macro_f1,
            result.summary.overall_accuracy,
            result.summary.macro_recall,
            result.summary.macro_precision
        ),
    ];
    for line in lines {
        writeln!(out, "{line}").map_err(stdout_failure)?;
    }
    writeln!(out, "{:<24} {:>6} {:>6} {:>8}", "class", "train", "test", "F1").map_err(stdout_failure)?;
    for (c, name) in train.classes().iter().enumerate() {
        writeln!(
            out,
            "{name:<24} {:>6} {:>6} {:>8.4}",
            result.effective_counts[c], result.class_metrics.support[c], result.class_metrics.f1[c]
        )
        .map_err(stdout_failure)?;
    }
    Ok(())
}

fn sweep_config(args: &SweepArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(e).context(format!("cannot read config {}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Failure::usage(e).context(format!("invalid config {}", path.display())))?
        }
        None => ExperimentConfig::new(Vec::new(), Default::default()),
    };
    let mut inline: Vec<Condition> = args
        .budgets
        .iter()
        .map(|&b| format!("budget={b}").parse())
        .collect::<Result<_, _>>()?;
    if let Some(p) = args.fraction {
        inline.push(format!("fraction={p}").parse()?);
    }
    if args.full {
        inline.push(Condition::Full);
    }
    if !inline.is_empty() {
        cfg.conditions = inline;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    cfg.probe = probe_config(cfg.probe.clone(), &args.probe);
    cfg.emit_selections |= args.emit_selections;
    cfg.parallelism = match args.jobs {
        Some(0) => return Err(Failure::usage(anyhow::anyhow!("--jobs must be at least 1"))),
        Some(n) => n,
        None => 1,
    };
    if cfg.conditions.is_empty() {
        return Err(Failure::usage(anyhow::anyhow!(
            "no conditions: pass --budgets, --fraction, --full or a --config listing them"
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(args: SweepArgs) -> CliResult {
    let cfg = sweep_config(&args)?;
    let (train, test) = load_pair(&args.data)?;
    require_unit_norm(&train, "train")?;
    require_unit_norm(&test, "test")?;
    log::info!("{} runs on {} worker(s)", cfg.jobs().len(), cfg.parallelism);

    let runs = run_sweep(&cfg, &train, &test)?;
    let report = SweepReport::new(cfg, train.classes().to_vec(), runs)?;
    report.write_outputs(&args.out_dir)?;

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<16} {:>5} {:>17} {:>17}",
        "condition", "runs", "macro F1", "accuracy"
    )
    .map_err(stdout_failure)?;
    for agg in &report.aggregates.conditions {
        writeln!(
            out,
            "{:<16} {:>5} {:>8.4} ± {:.4} {:>8.4} ± {:.4}",
            agg.condition.to_string(),
            agg.runs,
            agg.macro_f1.mean,
            agg.macro_f1.std,
            agg.overall_accuracy.mean,
            agg.overall_accuracy.std
        )
        .map_err(stdout_failure)?;
    }
    writeln!(out, "reports written to {}", args.out_dir.display()).map_err(stdout_failure)?;
    Ok(())
}

pub fn report(args: ReportArgs) -> CliResult {
    let sweep = SweepReport::load(&args.runs)
        .map_err(|e| Failure::data(e).context(format!("cannot load {}", args.runs.display())))?;
    let baseline = BaselineReference::load(&args.baseline)
        .map_err(|e| Failure::data(e).context(format!("cannot load {}", args.baseline.display())))?;
    let available: Vec<String> = sweep
        .aggregates
        .conditions
        .iter()
        .map(|a| a.condition.to_string())
        .collect();
    let agg = match &args.condition {
        Some(text) => {
            let wanted: Condition = text.parse()?;
            sweep.aggregates.get(&wanted).ok_or_else(|| {
                Failure::usage(anyhow::anyhow!(
                    "condition {wanted} not in the sweep (have {})",
                    available.join(", ")
                ))
            })?
        }
        None if available.len() == 1 => &sweep.aggregates.conditions[0],
        None => {
            return Err(Failure::usage(anyhow::anyhow!(
                "the sweep has several conditions, pick one with --condition ({})",
                available.join(", ")
            )))
        }
    };
    let table = compare(agg, &sweep.classes, &baseline)?;
    table.render(io::stdout().lock()).map_err(stdout_failure)?;
    if let Some(dir) = &args.out_dir {
        table.write_outputs(dir)?;
    }
    Ok(())
}
