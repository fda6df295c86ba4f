use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use mlgcn::eval::{evaluate, label_correlation_matrix};
use mlgcn::trainer::Checkpoint;
use mlgcn::{DataSplit, DecisionRule, DenseMatrix, EvaluationReport, MultiLabelGraph, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::{CaseStudyArgs, DatasetArgs, EvalArgs};
use crate::dataset::DatasetSpec;
use crate::error::CliError;
use crate::output::{csv_field, write_atomic};

/// A checkpoint matched against its dataset, with final node scores.
pub struct Scored {
    pub graph: MultiLabelGraph,
    pub config: TrainConfig,
    pub split: DataSplit,
    pub epochs: usize,
    pub scores: DenseMatrix,
}

/// Loads the checkpoint, rebuilds the dataset with the checkpoint's feature
/// setting and seed, and checks the fingerprint before scoring.
pub fn score_checkpoint(path: &Path, dataset: &DatasetArgs) -> Result<Scored> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let seed = dataset.seed.unwrap_or(ck.config.seed);
    let graph = DatasetSpec::from_args(dataset)?
        .resolve(seed)
        .load(ck.config.features, seed)?;
    Ok(scored(graph, ck)?)
}

fn scored(graph: MultiLabelGraph, ck: Checkpoint) -> mlgcn::Result<Scored> {
    let config = ck.config.clone();
    let split = ck.split.clone();
    let epochs = ck.epoch();
    let scores = ck.resume(&graph)?.finish()?.embeddings;
    Ok(Scored {
        graph,
        config,
        split,
        epochs,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub subset: String,
    pub rule: String,
    pub size: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: String,
    pub rule: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub fingerprint: String,
    pub epochs: usize,
    pub rules: Vec<String>,
    pub metrics: Vec<SubsetMetrics>,
    /// Per-label counts on the test subset, one row per (label, rule).
    pub per_label: Vec<LabelRow>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<MetricsDocument> {
    let rules = [DecisionRule::TopKTrue, DecisionRule::Threshold(args.threshold)];
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!("threshold must lie in [0,1], got {}", args.threshold)).into());
    }
    let s = score_checkpoint(&args.checkpoint, &args.dataset)?;
    let truth = s.graph.label_matrix();
    let mut metrics = Vec::new();
    let mut per_label = Vec::new();
    for (name, subset) in [("train", &s.split.train), ("val", &s.split.val), ("test", &s.split.test)] {
        if subset.is_empty() {
            continue;
        }
        for rule in rules {
            let r = evaluate(&s.scores, &truth, subset, rule)?;
            metrics.push(SubsetMetrics {
                subset: name.into(),
                rule: rule.to_string(),
                size: r.subset_size,
                micro_f1: r.micro_f1,
                macro_f1: r.macro_f1,
            });
            if name == "test" {
                per_label.extend(label_rows(&r, s.graph.label_ids(), rule));
            }
        }
    }
    per_label.sort_by_key(|row| s.graph.label_index(&row.label));
    let doc = MetricsDocument {
        fingerprint: s.graph.fingerprint(),
        epochs: s.epochs,
        rules: rules.iter().map(ToString::to_string).collect(),
        metrics,
        per_label,
    };
    write_atomic(&args.out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    for m in &doc.metrics {
        println!(
            "{:<5} {:<14} micro_f1 {:.4} macro_f1 {:.4} (n={})",
            m.subset, m.rule, m.micro_f1, m.macro_f1, m.size
        );
    }
    Ok(doc)
}

fn label_rows<'a>(
    report: &'a EvaluationReport,
    ids: &'a [String],
    rule: DecisionRule,
) -> impl Iterator<Item = LabelRow> + 'a {
    ids.iter().zip(&report.per_label).map(move |(id, s)| LabelRow {
        label: id.clone(),
        rule: rule.to_string(),
        tp: s.tp,
        fp: s.fp,
        fn_: s.fn_,
        f1: s.f1,
    })
}

pub const LABEL_F1_FILE: &str = "label_f1.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";

/// Per-label test F1 for the requested labels (in label-index order) and the
/// full correlation matrix.
pub fn cmd_case_study(args: &CaseStudyArgs) -> Result<()> {
    let s = score_checkpoint(&args.checkpoint, &args.dataset)?;
    let mut wanted = Vec::new();
    for id in &args.label_ids {
        let idx = s
            .graph
            .label_index(id)
            .ok_or_else(|| CliError::UnknownLabel(id.clone()))?;
        wanted.push(idx);
    }
    wanted.sort_unstable();
    wanted.dedup();
    if s.split.test.is_empty() {
        return Err(CliError::Usage("checkpoint has an empty test split".into()).into());
    }
    let report = evaluate(&s.scores, &s.graph.label_matrix(), &s.split.test, s.config.rule)?;
    let ids = s.graph.label_ids();

    let mut table = String::from("label,index,tp,fp,fn,f1\n");
    for &r in &wanted {
        let sc = &report.per_label[r];
        writeln!(table, "{},{r},{},{},{},{}", csv_field(&ids[r]), sc.tp, sc.fp, sc.fn_, sc.f1)?;
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join(LABEL_F1_FILE), table.as_bytes())?;

    let corr = label_correlation_matrix(s.graph.labels());
    let mut csv = String::from("label");
    for id in ids {
        write!(csv, ",{}", csv_field(id))?;
    }
    csv.push('\n');
    for (r, id) in ids.iter().enumerate() {
        csv.push_str(&csv_field(id));
        for v in corr.row(r) {
            write!(csv, ",{v}")?;
        }
        csv.push('\n');
    }
    write_atomic(&args.out.join(CORRELATION_FILE), csv.as_bytes())?;
    print!("{table}");
    Ok(())
}
