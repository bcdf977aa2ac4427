use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::RegularizerConfig;
use crate::data::{self, stratified_subset, Dataset, Split, SubsetSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::nn::{Network, OptimizerConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    /// Dense ReLU layers of the given widths, then a linear classifier.
    Mlp { hidden: Vec<usize> },
    /// Three conv/pool stages with `channels` filters each.
    Convnet { channels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// `spec.samples` is the training pool size.
    Synthetic {
        spec: SyntheticSpec,
        val_samples: usize,
        test_samples: usize,
    },
    /// The last `val_samples` training images are held out for validation.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        val_samples: usize,
    },
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub dataset: DatasetConfig,
    /// Class-balanced training subset; the whole pool when absent.
    #[serde(default)]
    pub subset: Option<SubsetSpec>,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub regularizer: RegularizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Estimate per-layer `H(Y|C)` and `H(Y|Z)` on the validation set every epoch.
    #[serde(default = "yes")]
    pub monitor_entropy: bool,
    /// Metrics are recorded every this many epochs (and after the last one).
    #[serde(default = "one")]
    pub metrics_every: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.regularizer.validate()?;
        if self.metrics_every == 0 {
            return Err(Error::invalid("metrics_every must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        match &self.architecture {
            Architecture::Mlp { hidden } if hidden.is_empty() || hidden.contains(&0) => {
                return Err(Error::invalid("mlp needs at least one hidden layer of nonzero width"))
            }
            Architecture::Convnet { channels: 0 } => return Err(Error::invalid("convnet needs channels >= 1")),
            _ => {}
        }
        if let DatasetConfig::Synthetic { spec, .. } = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Train, validation and test sets of one run, shaped for its architecture.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn load(config: &ExperimentConfig) -> Result<Splits> {
        let (train, val, test) = match &config.dataset {
            DatasetConfig::Synthetic {
                spec,
                val_samples,
                test_samples,
            } => {
                let with = |n: usize| SyntheticSpec { samples: n, ..spec.clone() };
                (
                    data::make_synthetic(spec, Split::Train)?,
                    data::make_synthetic(&with(*val_samples), Split::Val)?,
                    data::make_synthetic(&with(*test_samples), Split::Test)?,
                )
            }
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                val_samples,
            } => {
                let pool = data::load_idx(train_images, train_labels, Split::Train)?;
                let test = data::load_idx(test_images, test_labels, Split::Test)?;
                if *val_samples >= pool.len() {
                    return Err(Error::invalid(format!(
                        "{val_samples} validation samples leave no training data out of {}",
                        pool.len()
                    )));
                }
                let cut = pool.len() - val_samples;
                let mut train = pool.select(&(0..cut).collect::<Vec<_>>());
                let mut val = pool.select(&(cut..pool.len()).collect::<Vec<_>>()).with_split(Split::Val);
                let mut test = test;
                // a label absent from one file must not shrink the class count
                let classes = train.classes.max(test.classes);
                for d in [&mut train, &mut val, &mut test] {
                    d.classes = classes;
                }
                (train, val, test)
            }
        };
        let train = match config.subset {
            Some(spec) => stratified_subset(&train, spec)?,
            None => train,
        };
        let shape = |d: Dataset| -> Result<Dataset> {
            match config.architecture {
                Architecture::Mlp { .. } => Ok(d.flattened()),
                Architecture::Convnet { .. } => d.as_images(),
            }
        };
        Ok(Splits {
            train: shape(train)?,
            val: shape(val)?,
            test: shape(test)?,
        })
    }
}

/// Fresh network for the config, initialized from `(seed, init stream)`.
pub fn build_network(config: &ExperimentConfig, sample_shape: &[usize], classes: usize) -> Result<Network> {
    let mut rng = Rng::derive(config.seed, super::train::INIT_STREAM);
    let mut net = match &config.architecture {
        Architecture::Mlp { hidden } => Network::mlp(sample_shape.iter().product(), hidden, classes, &mut rng)?,
        Architecture::Convnet { channels } => {
            let &[c, h, w] = sample_shape else {
                return Err(Error::shape("convnet", format!("expected [c, h, w] samples, got {sample_shape:?}")));
            };
            Network::convnet([c, h, w], *channels, classes, &mut rng)?
        }
    };
    if !config.regularizer.dropout_rates.is_empty() {
        net.set_dropout_rates(&config.regularizer.dropout_rates)?;
    }
    Ok(net)
}
