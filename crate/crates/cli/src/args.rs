use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlgcn::ingestion::Delimiter;
use mlgcn::trainer::{LabelExposure, OptimizerKind};
use mlgcn::{DecisionRule, FeatureInit, TrainConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "mlgcn", version, about = "Multi-label node classification with coupled label and node GCNs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print `nodes edges labels co-occurring-label-pairs`.
    Stats(DatasetArgs),
    /// Train one model and write its artifacts.
    Train(TrainArgs),
    /// Score a checkpoint under both decision rules.
    Eval(EvalArgs),
    /// Repeat training over a parameter grid and aggregate the metrics.
    Sweep(SweepArgs),
    /// Per-label F1 for chosen labels plus the label correlation matrix.
    CaseStudy(CaseStudyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DelimiterArg {
    Comma,
    Tab,
    Space,
}

impl From<DelimiterArg> for Delimiter {
    fn from(d: DelimiterArg) -> Self {
        match d {
            DelimiterArg::Comma => Delimiter::Comma,
            DelimiterArg::Tab => Delimiter::Tab,
            DelimiterArg::Space => Delimiter::Whitespace,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// Edge list, one `src dst [weight]` per line.
    #[arg(long, value_name = "PATH", requires = "labels")]
    pub edges: Option<PathBuf>,
    /// Label file, one `node label` per line.
    #[arg(long, value_name = "PATH", requires = "edges")]
    pub labels: Option<PathBuf>,
    /// Planted-partition graph instead of files, e.g.
    /// `k=2,size=100,p_in=0.1,p_out=0.02,rho=0.8`. Unset keys keep their defaults.
    #[arg(
        long,
        value_name = "SPEC",
        num_args = 0..=1,
        default_missing_value = "",
        conflicts_with_all = ["edges", "labels"]
    )]
    pub synthetic: Option<String>,
    /// Field separator; detected from the first data line when omitted.
    #[arg(long, value_enum)]
    pub delimiter: Option<DelimiterArg>,
    /// Seed for every random stream (graph generation, features, split, init, dropout).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: mlgcn::Error| e.to_string())
}

fn parse_rule(s: &str) -> Result<DecisionRule, String> {
    s.parse().map_err(|e: mlgcn::Error| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: mlgcn::Error| e.to_string())
}

/// Hyperparameters; anything left unset keeps the variant's default.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// full | node | 1n | 2l | gcn_baseline
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Hidden width d_h.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Training ratio.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Period N of node-feature injection into the label graph.
    #[arg(long)]
    pub freq_n: Option<usize>,
    /// Period M of label-feature injection into the node graph.
    #[arg(long)]
    pub freq_m: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// topk | threshold:T
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<DecisionRule>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub label_layers: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub node_layers: Option<u8>,
    /// Seeded Gaussian input features of this width instead of one-hot.
    #[arg(long, value_name = "D")]
    pub feature_dim: Option<usize>,
    /// gd | adam
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
    /// Do not inject at epoch 0.
    #[arg(long)]
    pub skip_epoch0_injection: bool,
    /// Use 0/1 co-occurrence instead of counts.
    #[arg(long)]
    pub binary_cooccurrence: bool,
    /// Wire every node's labels into the composite graphs, test nodes included.
    #[arg(long)]
    pub expose_all_labels: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Rerun exactly the run described by a manifest.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["edges", "labels", "synthetic"])]
    pub from_manifest: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Probability cut-off for the threshold rule.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Metrics file (JSON).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `KEY=V1,V2,...`; repeat for a Cartesian grid. Keys: alpha, hidden, lr,
    /// epochs, freq (both periods), freq-n, freq-m, dropout, decay, variant,
    /// label-layers, node-layers.
    #[arg(long = "grid", value_name = "KEY=VALUES")]
    pub grid: Vec<String>,
    /// Runs per grid point; run `r` uses seed `seed + r`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    /// Parallel workers (defaults to the available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CaseStudyArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Labels to report, by external id.
    #[arg(long = "label-ids", value_delimiter = ',', required = true)]
    pub label_ids: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

impl ModelArgs {
    /// Writes every given flag into `config`. Changing the variant first
    /// resets the layer counts to that variant's own.
    pub fn apply(&self, config: &mut TrainConfig) {
        if let Some(v) = self.variant {
            let (node_layers, label_layers) = v.default_layers();
            config.variant = v;
            config.node_layers = node_layers;
            config.label_layers = label_layers;
        }
        if let Some(v) = self.lr {
            config.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.hidden {
            config.hidden_dim = v;
        }
        if let Some(v) = self.alpha {
            config.train_ratio = v;
        }
        if let Some(v) = self.freq_n {
            config.update_freq_nodes = v;
        }
        if let Some(v) = self.freq_m {
            config.update_freq_labels = v;
        }
        if let Some(v) = self.dropout {
            config.dropout = v;
        }
        if let Some(v) = self.decay {
            config.weight_decay = v;
        }
        if let Some(v) = self.rule {
            config.rule = v;
        }
        if let Some(v) = self.label_layers {
            config.label_layers = v.into();
        }
        if let Some(v) = self.node_layers {
            config.node_layers = v.into();
        }
        if let Some(dim) = self.feature_dim {
            config.features = FeatureInit::Gaussian { dim };
        }
        if let Some(v) = self.optimizer {
            config.optimizer = v;
        }
        config.skip_epoch0_injection |= self.skip_epoch0_injection;
        config.binary_cooccurrence |= self.binary_cooccurrence;
        if self.expose_all_labels {
            config.label_exposure = LabelExposure::All;
        }
    }

    /// Defaults for the chosen variant with every flag applied.
    pub fn config(&self, seed: u64) -> TrainConfig {
        let mut config = TrainConfig::for_variant(self.variant.unwrap_or_default());
        self.apply(&mut config);
        config.seed = seed;
        config
    }

    /// Sets one sweepable hyperparameter from its grid spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value {v:?}"))
        }
        match key {
            "alpha" => self.alpha = Some(num(value)?),
            "hidden" => self.hidden = Some(num(value)?),
            "lr" => self.lr = Some(num(value)?),
            "epochs" => self.epochs = Some(num(value)?),
            "freq" => {
                self.freq_n = Some(num(value)?);
                self.freq_m = self.freq_n;
            }
            "freq-n" => self.freq_n = Some(num(value)?),
            "freq-m" => self.freq_m = Some(num(value)?),
            "dropout" => self.dropout = Some(num(value)?),
            "decay" => self.decay = Some(num(value)?),
            "variant" => self.variant = Some(parse_variant(value)?),
            "label-layers" => self.label_layers = Some(num(value)?),
            "node-layers" => self.node_layers = Some(num(value)?),
            _ => return Err(format!("unknown grid key {key:?}")),
        }
        Ok(())
    }
}
