use std::fmt::Write as _;
use std::sync::mpsc;
use std::thread;

use anyhow::{Context, Result};

use crate::args::{ModelArgs, SweepArgs};
use crate::dataset::DatasetSpec;
use crate::error::CliError;
use crate::output::{csv_field, write_atomic};
use crate::train::run;

pub const SUMMARY_FILE: &str = "sweep.csv";
pub const RUNS_FILE: &str = "runs.csv";

/// Reported per run, in this column order.
pub const METRICS: [&str; 3] = ["micro_f1", "macro_f1", "final_loss"];

/// One `--grid` flag: a key and its values in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

pub fn parse_axis(flag: &str) -> Result<Axis> {
    let usage = |m: String| anyhow::Error::from(CliError::Usage(m));
    let (key, values) = flag
        .split_once('=')
        .ok_or_else(|| usage(format!("grid {flag:?} is not KEY=V1,V2,...")))?;
    let key = key.trim().to_string();
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err(usage(format!("grid key {key:?} has no values")));
    }
    let mut probe = ModelArgs::default();
    for v in &values {
        probe.set(&key, v).map_err(|e| usage(format!("grid {key}: {e}")))?;
    }
    Ok(Axis { key, values })
}

/// Cartesian product; the first axis varies slowest.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<&str>> {
    axes.iter().fold(vec![Vec::new()], |points, axis| {
        points
            .iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.as_str());
                    q
                })
            })
            .collect()
    })
}

/// Mean and population standard deviation; `None` for an empty sample.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

struct Task {
    point: usize,
    repeat: u64,
    seed: u64,
    model: ModelArgs,
}

type Outcome = Result<[f64; 3], String>;

fn run_task(spec: &DatasetSpec, task: &Task) -> Outcome {
    let config = task.model.config(task.seed);
    let source = spec.resolve(task.seed);
    let r = run(&source, &config).map_err(|e| format!("{e:#}"))?;
    let (micro, macro_) = r.test.map_or((f64::NAN, f64::NAN), |t| (t.micro_f1, t.macro_f1));
    let loss = r.outcome.history.epochs.last().map_or(f64::NAN, |e| e.loss);
    Ok([micro, macro_, loss])
}

/// Runs every (grid point, repeat) pair, `jobs` at a time, and writes the
/// per-run and aggregated CSVs. Runs that fail are recorded and skipped in
/// the aggregates; any failure makes the command fail after writing.
pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let axes = args.grid.iter().map(|g| parse_axis(g)).collect::<Result<Vec<_>>>()?;
    if axes.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --grid KEY=VALUES".into()).into());
    }
    let spec = DatasetSpec::from_args(&args.dataset)?;
    let base_seed = args.dataset.seed.unwrap_or(0);
    let points = grid_points(&axes);

    let mut tasks = Vec::new();
    for (p, values) in points.iter().enumerate() {
        let mut model = args.model.clone();
        for (axis, v) in axes.iter().zip(values) {
            model.set(&axis.key, v).map_err(CliError::Usage)?;
        }
        model.config(base_seed).validate()?;
        for r in 0..args.repeats {
            tasks.push(Task {
                point: p,
                repeat: r,
                seed: base_seed + r,
                model: model.clone(),
            });
        }
    }

    let jobs = args
        .jobs
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, tasks.len());
    let mut outcomes: Vec<Option<Outcome>> = (0..tasks.len()).map(|_| None).collect();
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for worker in 0..jobs {
            let tx = tx.clone();
            let (spec, tasks) = (&spec, &tasks);
            scope.spawn(move || {
                for (i, task) in tasks.iter().enumerate().skip(worker).step_by(jobs) {
                    if tx.send((i, run_task(spec, task))).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            let t = &tasks[i];
            match &outcome {
                Ok(m) => eprintln!("point {} repeat {}: micro_f1 {:.4}", t.point, t.repeat, m[0]),
                Err(e) => eprintln!("point {} repeat {}: failed: {e}", t.point, t.repeat),
            }
            outcomes[i] = Some(outcome);
        }
    });
    let outcomes: Vec<Outcome> = outcomes
        .into_iter()
        .map(|o| o.unwrap_or_else(|| Err("worker exited early".into())))
        .collect();

    let keys: String = axes.iter().map(|a| format!(",{}", csv_field(&a.key))).collect();
    let mut runs = format!("point{keys},repeat,seed,status,{}\n", METRICS.join(","));
    for (task, outcome) in tasks.iter().zip(&outcomes) {
        let vals: String = points[task.point].iter().map(|v| format!(",{}", csv_field(v))).collect();
        write!(runs, "{}{vals},{},{}", task.point, task.repeat, task.seed)?;
        match outcome {
            Ok(m) => writeln!(runs, ",ok,{},{},{}", m[0], m[1], m[2])?,
            Err(e) => writeln!(runs, ",{},,,", csv_field(&format!("error: {e}")))?,
        }
    }

    let mut summary = format!("point{keys},metric,mean,std,runs,failed,error\n");
    let mut failed_total = 0;
    for (p, values) in points.iter().enumerate() {
        let mine: Vec<&Outcome> = tasks
            .iter()
            .zip(&outcomes)
            .filter(|(t, _)| t.point == p)
            .map(|(_, o)| o)
            .collect();
        let ok: Vec<&[f64; 3]> = mine.iter().filter_map(|o| o.as_ref().ok()).collect();
        let failed = mine.len() - ok.len();
        failed_total += failed;
        let first_error = mine.iter().find_map(|o| o.as_ref().err()).map_or(String::new(), |e| csv_field(e));
        let vals: String = values.iter().map(|v| format!(",{}", csv_field(v))).collect();
        for (k, metric) in METRICS.iter().enumerate() {
            let sample: Vec<f64> = ok.iter().map(|m| m[k]).collect();
            let (mean, std) = mean_std(&sample).map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
            writeln!(summary, "{p}{vals},{metric},{mean},{std},{},{failed},{first_error}", ok.len())?;
        }
    }

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join(RUNS_FILE), runs.as_bytes())?;
    write_atomic(&args.out.join(SUMMARY_FILE), summary.as_bytes())?;
    print!("{summary}");
    if failed_total > 0 {
        return Err(CliError::SweepFailures {
            failed: failed_total,
            total: tasks.len(),
        }
        .into());
    }
    Ok(())
}
