//! Synthetic classification data.
//!
//! Both generators put the class signal in the first `signal_dims`
//! coordinates (a class prototype plus unit-variance noise) and append
//! `nuisance_dims` coordinates that are independent of the label.
//! `gaussian-blobs` uses unit-variance white noise for those;
//! `textured-digits-proxy` uses a high-variance low-rank "texture" (random
//! combinations of a few fixed patterns plus white noise), a stand-in for
//! the class-irrelevant backgrounds of textured-digit datasets.
//!
//! The prototypes and texture patterns depend only on `seed`; each split
//! draws its samples from a stream derived from `(seed, split)`, so train,
//! validation and test sets share one distribution.

use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    GaussianBlobs,
    TexturedDigitsProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub classes: usize,
    pub samples: usize,
    pub seed: u64,
    pub nuisance_dims: usize,
    #[serde(default = "default_signal_dims")]
    pub signal_dims: usize,
    /// Standard deviation of the prototype coordinates.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Standard deviation of each texture coefficient.
    #[serde(default = "default_texture_scale")]
    pub texture_scale: f64,
    /// Number of texture patterns.
    #[serde(default = "default_texture_rank")]
    pub texture_rank: usize,
}

fn default_signal_dims() -> usize {
    8
}
fn default_separation() -> f64 {
    1.0
}
fn default_texture_scale() -> f64 {
    3.0
}
fn default_texture_rank() -> usize {
    8
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, classes: usize, samples: usize, seed: u64, nuisance_dims: usize) -> Self {
        SyntheticSpec {
            kind,
            classes,
            samples,
            seed,
            nuisance_dims,
            signal_dims: default_signal_dims(),
            separation: default_separation(),
            texture_scale: default_texture_scale(),
            texture_rank: default_texture_rank(),
        }
    }

    pub fn dims(&self) -> usize {
        self.signal_dims + self.nuisance_dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("at least 2 classes required"));
        }
        if !self.samples.is_multiple_of(self.classes) {
            return Err(Error::invalid(format!(
                "sample count {} is not a multiple of {} classes",
                self.samples, self.classes
            )));
        }
        if self.signal_dims == 0 {
            return Err(Error::invalid("at least one signal dimension required"));
        }
        for (name, v) in [("separation", self.separation), ("texture_scale", self.texture_scale)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

const WORLD_TAG: u64 = 0;
const TEXTURE_NOISE: f64 = 0.3;

struct World {
    prototypes: Vec<Vec<f64>>,
    patterns: Vec<Vec<f64>>,
}

impl World {
    fn new(spec: &SyntheticSpec) -> World {
        let mut rng = Rng::derive(spec.seed, WORLD_TAG);
        let prototypes = (0..spec.classes)
            .map(|_| (0..spec.signal_dims).map(|_| spec.separation * rng.standard_normal()).collect())
            .collect();
        let patterns = match spec.kind {
            SyntheticKind::GaussianBlobs => Vec::new(),
            SyntheticKind::TexturedDigitsProxy => (0..spec.texture_rank)
                .map(|_| (0..spec.nuisance_dims).map(|_| rng.standard_normal()).collect())
                .collect(),
        };
        World { prototypes, patterns }
    }
}

/// Draws `spec.samples` balanced samples for `split`.
pub fn make_synthetic(spec: &SyntheticSpec, split: Split) -> Result<Dataset> {
    spec.validate()?;
    let world = World::new(spec);
    let mut rng = Rng::derive(spec.seed, split.tag());
    let mut labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    rng.shuffle(&mut labels);
    let d = spec.dims();
    let mut data = Vec::with_capacity(spec.samples * d);
    let mut coef = vec![0.0; spec.texture_rank];
    for &c in &labels {
        for &m in &world.prototypes[c] {
            data.push(m + rng.standard_normal());
        }
        match spec.kind {
            SyntheticKind::GaussianBlobs => {
                data.extend((0..spec.nuisance_dims).map(|_| rng.standard_normal()));
            }
            SyntheticKind::TexturedDigitsProxy => {
                for a in coef.iter_mut() {
                    *a = spec.texture_scale * rng.standard_normal();
                }
                let norm = (spec.texture_rank.max(1) as f64).sqrt();
                for j in 0..spec.nuisance_dims {
                    let t: f64 = world.patterns.iter().zip(&coef).map(|(p, a)| a * p[j]).sum();
                    data.push(t / norm + spec.texture_scale * TEXTURE_NOISE * rng.standard_normal());
                }
            }
        }
    }
    Dataset::new(Tensor::new(vec![spec.samples, d], data)?, labels, spec.classes, split)
}
