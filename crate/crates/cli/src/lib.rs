//! Command implementations behind the `mlgcn` binary. Each `cmd_*` returns
//! an [`anyhow::Error`] whose cause chain [`exit_code`] maps onto the
//! process exit status.

pub mod args;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod output;
pub mod sweep;
pub mod train;

use anyhow::Result;
use mlgcn::ingestion::dataset_stats;
use mlgcn::{DatasetStats, FeatureInit};

pub use args::{Cli, Command};
pub use dataset::{DatasetSource, DatasetSpec};
pub use error::{exit_code, CliError};
pub use eval::{cmd_case_study, cmd_eval};
pub use sweep::cmd_sweep;
pub use train::{cmd_train, RunManifest};

/// Prints `nodes edges labels co-occurring-pairs`.
pub fn cmd_stats(args: &args::DatasetArgs) -> Result<DatasetStats> {
    let seed = args.seed.unwrap_or(0);
    let g = DatasetSpec::from_args(args)?.resolve(seed).load(FeatureInit::OneHot, seed)?;
    let s = dataset_stats(&g);
    println!("{} {} {} {}", s.node_count, s.edge_count, s.label_count, s.cooccurrence_count);
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Stats(a) => cmd_stats(a).map(drop),
        Command::Train(a) => cmd_train(a).map(drop),
        Command::Eval(a) => cmd_eval(a).map(drop),
        Command::Sweep(a) => cmd_sweep(a),
        Command::CaseStudy(a) => cmd_case_study(a),
    }
}
