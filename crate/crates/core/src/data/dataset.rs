use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub(crate) fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

/// Labelled samples. `inputs` is `[N, ...]`; labels lie in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} inputs but {} labels", inputs.rows(), labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample input shape.
    pub fn sample_shape(&self) -> &[usize] {
        &self.inputs.shape()[1..]
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Inputs viewed as `[N, D]`.
    pub fn flattened(&self) -> Dataset {
        let n = self.len();
        let d = self.inputs.row_len();
        Dataset {
            inputs: self.inputs.clone().reshape(&[n, d]).expect("same length"),
            ..self.clone()
        }
    }

    /// Inputs viewed as single-channel square images `[N, 1, s, s]`; rank-4
    /// inputs are returned unchanged.
    pub fn as_images(&self) -> Result<Dataset> {
        if self.inputs.shape().len() == 4 {
            return Ok(self.clone());
        }
        let d = self.inputs.row_len();
        let side = (d as f64).sqrt().round() as usize;
        if side * side != d {
            return Err(Error::shape(
                "as_images",
                format!("{d} features do not form a square image"),
            ));
        }
        Ok(Dataset {
            inputs: self.inputs.clone().reshape(&[self.len(), 1, side, side])?,
            ..self.clone()
        })
    }
}
