//! Versioned binary snapshot of a run: config, split, weights, injected
//! features, optimizer state and history.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DataSplit, MultiLabelGraph};

use super::config::TrainConfig;
use super::model::ModelState;
use super::optim::Optimizer;
use super::train::{TrainHistory, TrainOutcome, Trainer};

const MAGIC: &[u8; 8] = b"MLGCNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Fingerprint of the dataset the run was trained on.
    pub fingerprint: String,
    pub config: TrainConfig,
    pub split: DataSplit,
    pub model: ModelState,
    pub optimizer: Optimizer,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn from_outcome(graph: &MultiLabelGraph, outcome: &TrainOutcome) -> Self {
        Self {
            fingerprint: graph.fingerprint(),
            config: outcome.config.clone(),
            split: outcome.split.clone(),
            model: outcome.model.clone(),
            optimizer: outcome.optimizer.clone(),
            history: outcome.history.clone(),
        }
    }

    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
            bincode::serialize_into(&mut w, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        bincode::deserialize_from(r).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Rebuilds a trainer positioned after the saved epoch.
    pub fn resume<'g>(self, graph: &'g MultiLabelGraph) -> Result<Trainer<'g>> {
        let found = graph.fingerprint();
        if found != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint,
                found,
            });
        }
        Trainer::resume(graph, self.split, self.config, self.model, self.optimizer, self.history)
    }
}
