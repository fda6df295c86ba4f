use std::path::PathBuf;

use anyhow::Result;
use mlgcn::ingestion::{generate_synthetic, load_dataset, Delimiter};
use mlgcn::{FeatureInit, MultiLabelGraph, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::args::DatasetArgs;
use crate::error::CliError;

/// Where a run's graph comes from, fully resolved (synthetic seed included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Files {
        edges: PathBuf,
        labels: PathBuf,
        delimiter: Option<Delimiter>,
    },
    Synthetic(SyntheticConfig),
}

/// Dataset flags before the seed is known. A synthetic spec without an
/// explicit `seed=` key follows the run seed.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Files {
        edges: PathBuf,
        labels: PathBuf,
        delimiter: Option<Delimiter>,
    },
    Synthetic {
        config: SyntheticConfig,
        pinned_seed: bool,
    },
}

impl DatasetSpec {
    pub fn from_args(args: &DatasetArgs) -> Result<Self> {
        match (&args.edges, &args.labels, &args.synthetic) {
            (Some(edges), Some(labels), None) => Ok(Self::Files {
                edges: edges.clone(),
                labels: labels.clone(),
                delimiter: args.delimiter.map(Into::into),
            }),
            (None, None, Some(spec)) => {
                let (config, pinned_seed) = parse_synthetic(spec)?;
                Ok(Self::Synthetic { config, pinned_seed })
            }
            _ => Err(CliError::Usage("give either --edges and --labels, or --synthetic".into()).into()),
        }
    }

    pub fn resolve(&self, seed: u64) -> DatasetSource {
        match self {
            Self::Files { edges, labels, delimiter } => DatasetSource::Files {
                edges: edges.clone(),
                labels: labels.clone(),
                delimiter: *delimiter,
            },
            Self::Synthetic { config, pinned_seed } => DatasetSource::Synthetic(SyntheticConfig {
                seed: if *pinned_seed { config.seed } else { seed },
                ..*config
            }),
        }
    }
}

impl DatasetSource {
    pub fn load(&self, features: FeatureInit, seed: u64) -> Result<MultiLabelGraph> {
        let g = match self {
            Self::Files { edges, labels, delimiter } => load_dataset(edges, labels, *delimiter, features, seed)?,
            Self::Synthetic(cfg) => generate_synthetic(cfg, features)?,
        };
        Ok(g)
    }
}

/// Parses `k=2,size=100,p_in=0.1,p_out=0.02,rho=0.8,seed=3`; every key is
/// optional. Returns the config and whether `seed` was given.
pub fn parse_synthetic(spec: &str) -> Result<(SyntheticConfig, bool)> {
    let mut cfg = SyntheticConfig::default();
    let mut pinned = false;
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("synthetic option {item:?} is not KEY=VALUE")))?;
        let bad = || CliError::Usage(format!("bad value {value:?} for synthetic option {key}"));
        match key.trim() {
            "k" | "communities" => cfg.communities = value.parse().map_err(|_| bad())?,
            "size" | "community_size" => cfg.community_size = value.parse().map_err(|_| bad())?,
            "p_in" => cfg.p_in = value.parse().map_err(|_| bad())?,
            "p_out" => cfg.p_out = value.parse().map_err(|_| bad())?,
            "rho" => cfg.rho = value.parse().map_err(|_| bad())?,
            "seed" => {
                cfg.seed = value.parse().map_err(|_| bad())?;
                pinned = true;
            }
            other => return Err(CliError::Usage(format!("unknown synthetic option {other:?}")).into()),
        }
    }
    Ok((cfg, pinned))
}
