use std::io::Write;

use super::estimate::{entropy_given_labels, entropy_given_latent};
use crate::data::Dataset;
use crate::error::Result;
use crate::nn::Network;
use crate::shade::UnitView;

/// Classes with fewer samples are left out of `H(Y|C)`.
pub const MIN_CLASS_SAMPLES: usize = 10;
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitEntropy {
    pub unit: usize,
    /// `H(Y|C)`, nats (differential histogram estimate).
    pub given_class: f64,
    /// `H(Y|Z)` under the soft posterior partition, nats.
    pub given_latent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerEntropyReport {
    pub layer: usize,
    pub units: Vec<UnitEntropy>,
    /// Classes skipped for having fewer than [`MIN_CLASS_SAMPLES`] samples.
    pub excluded_classes: Vec<usize>,
    /// Samples per unit (inputs times spatial positions).
    pub samples: usize,
}

impl LayerEntropyReport {
    pub fn mean_given_class(&self) -> f64 {
        self.units.iter().map(|u| u.given_class).sum::<f64>() / self.units.len().max(1) as f64
    }

    pub fn mean_given_latent(&self) -> f64 {
        self.units.iter().map(|u| u.given_latent).sum::<f64>() / self.units.len().max(1) as f64
    }

    /// One row per unit: `quantity,layer,unit,estimate,samples,bins`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "quantity,layer,unit,estimate,samples,bins")?;
        }
        let bins = super::estimate::DEFAULT_BINS;
        for u in &self.units {
            writeln!(out, "h_y_given_c,{},{},{},{},{bins}", self.layer, u.unit, u.given_class, self.samples)?;
            writeln!(out, "h_y_given_z,{},{},{},{},{bins}", self.layer, u.unit, u.given_latent, self.samples)?;
        }
        Ok(())
    }
}

/// Histogram estimates of `H(Y|C)` and `H(Y|Z)` for every unit of observed
/// layer `observed_index`, from evaluation-mode pre-activations over the
/// dataset. Convolutional channels pool all spatial positions.
pub fn monitor_conditional_entropy(
    net: &Network,
    dataset: &Dataset,
    observed_index: usize,
) -> Result<LayerEntropyReport> {
    let pre = net.collect_pre_activations(&dataset.inputs, observed_index, CHUNK)?;
    let view = UnitView::new(&pre);
    let spatial = view.samples() / dataset.len().max(1);
    let labels: Vec<usize> = dataset
        .labels
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, spatial))
        .collect();
    let units = pre.shape().get(1).copied().unwrap_or(0);
    let mut excluded = Vec::new();
    let mut out = Vec::with_capacity(units);
    for u in 0..units {
        let values = view.unit_values(u);
        let (given_class, skipped) =
            entropy_given_labels(&values, &labels, dataset.classes, MIN_CLASS_SAMPLES * spatial)?;
        excluded = skipped;
        out.push(UnitEntropy {
            unit: u,
            given_class,
            given_latent: entropy_given_latent(&values)?,
        });
    }
    Ok(LayerEntropyReport {
        layer: observed_index,
        units: out,
        excluded_classes: excluded,
        samples: view.samples(),
    })
}
