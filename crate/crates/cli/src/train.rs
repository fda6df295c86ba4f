use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use mlgcn::eval::{evaluate, split_dataset};
use mlgcn::trainer::{train, Checkpoint};
use mlgcn::{DenseMatrix, EvaluationReport, MultiLabelGraph, TrainConfig, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::args::TrainArgs;
use crate::dataset::{DatasetSource, DatasetSpec};
use crate::output::write_atomic;

pub const MANIFEST_FORMAT: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub checkpoint: String,
    pub history: String,
    pub timing: String,
    pub embeddings: String,
}

impl Default for Artifacts {
    fn default() -> Self {
        Self {
            checkpoint: CHECKPOINT_FILE.into(),
            history: HISTORY_FILE.into(),
            timing: TIMING_FILE.into(),
            embeddings: EMBEDDINGS_FILE.into(),
        }
    }
}

/// Everything needed to repeat a run, plus its headline results. Artifact
/// paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub dataset: DatasetSource,
    pub fingerprint: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub artifacts: Artifacts,
    pub epochs_run: usize,
    pub final_loss: f64,
    /// True when the label-network loss was exactly zero at every epoch.
    pub label_loss_all_zero: bool,
    pub test: Option<EvaluationReport>,
    pub load_seconds: f64,
    pub train_seconds: f64,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(manifest)
    }
}

/// A finished run held in memory.
pub struct Run {
    pub graph: MultiLabelGraph,
    pub outcome: TrainOutcome,
    pub test: Option<EvaluationReport>,
    pub load_seconds: f64,
    pub train_seconds: f64,
}

/// Loads the dataset, splits it with the config's seed and trains.
pub fn run(source: &DatasetSource, config: &TrainConfig) -> Result<Run> {
    config.validate()?;
    let start = Instant::now();
    let graph = source.load(config.features, config.seed)?;
    let split = split_dataset(&graph, config.train_ratio, config.seed)?;
    let load_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let outcome = train(&graph, &split, config)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let test = if split.test.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.embeddings, &graph.label_matrix(), &split.test, config.rule)?)
    };
    Ok(Run {
        graph,
        outcome,
        test,
        load_seconds,
        train_seconds,
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<RunManifest> {
    let started = Instant::now();
    let (source, config) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            let mut config = m.config;
            args.model.apply(&mut config);
            config.seed = args.dataset.seed.unwrap_or(m.seed);
            (m.dataset, config)
        }
        None => {
            let spec = DatasetSpec::from_args(&args.dataset)?;
            let seed = args.dataset.seed.unwrap_or(0);
            (spec.resolve(seed), args.model.config(seed))
        }
    };
    println!("config: {}", config.summary());

    let run = run(&source, &config)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let artifacts = Artifacts::default();
    Checkpoint::from_outcome(&run.graph, &run.outcome).save(&out.join(&artifacts.checkpoint))?;
    let history = &run.outcome.history;
    let mut buf = Vec::new();
    history.write_csv(&mut buf)?;
    write_atomic(&out.join(&artifacts.history), &buf)?;
    buf.clear();
    history.write_timing_csv(&mut buf)?;
    write_atomic(&out.join(&artifacts.timing), &buf)?;
    buf.clear();
    write_embeddings(&mut buf, &run.graph, &run.outcome.embeddings)?;
    write_atomic(&out.join(&artifacts.embeddings), &buf)?;

    let manifest = RunManifest {
        format: MANIFEST_FORMAT,
        dataset: source,
        fingerprint: run.graph.fingerprint(),
        seed: config.seed,
        config,
        artifacts,
        epochs_run: history.len(),
        final_loss: history.epochs.last().map_or(f64::NAN, |e| e.loss),
        label_loss_all_zero: history.epochs.iter().all(|e| e.label_loss == 0.0),
        test: run.test,
        load_seconds: run.load_seconds,
        train_seconds: run.train_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    write_atomic(&out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    match &manifest.test {
        Some(t) => println!(
            "trained {} epochs: loss {} test micro_f1 {:.4} macro_f1 {:.4}",
            manifest.epochs_run, manifest.final_loss, t.micro_f1, t.macro_f1
        ),
        None => println!("trained {} epochs: loss {}", manifest.epochs_run, manifest.final_loss),
    }
    Ok(manifest)
}

/// Header `node` plus one column per label id, then one row per node.
pub fn write_embeddings<W: Write>(mut w: W, graph: &MultiLabelGraph, scores: &DenseMatrix) -> std::io::Result<()> {
    write!(w, "node")?;
    for id in graph.label_ids() {
        write!(w, "\t{id}")?;
    }
    writeln!(w)?;
    for (i, id) in graph.node_ids().iter().enumerate() {
        write!(w, "{id}")?;
        for v in scores.row(i) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
