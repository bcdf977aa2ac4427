use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::shade::ShadeState;

/// A trained (or initial) model with the moving averages and the config
/// that produced it. Serialized as JSON with round-trip float formatting,
/// so save-then-load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub epoch: usize,
    pub config: ExperimentConfig,
    pub network: Network,
    pub shade: ShadeState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        // write-then-rename so an interrupted save never clobbers a good file
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let ck: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        if ck.shade.layers.len() != ck.network.observed_layers().len() {
            return Err(Error::State(format!(
                "checkpoint has {} moving-average layers for {} observed layers",
                ck.shade.layers.len(),
                ck.network.observed_layers().len()
            )));
        }
        Ok(ck)
    }
}
