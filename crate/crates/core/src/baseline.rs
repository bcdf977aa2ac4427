//! Baseline regularizers (weight decay, dropout) and the regularizer
//! selection shared by training runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, Network, ParamGrad};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerKind {
    None,
    WeightDecay,
    Dropout,
    Shade,
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegularizerKind::None => "none",
            RegularizerKind::WeightDecay => "weight-decay",
            RegularizerKind::Dropout => "dropout",
            RegularizerKind::Shade => "shade",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub kind: RegularizerKind,
    /// Global weight of the penalty in `loss = classification + beta * penalty`.
    #[serde(default)]
    pub beta: f64,
    /// Per-observed-layer SHADE weights; all 1 when absent.
    #[serde(default)]
    pub layer_weights: Option<Vec<f64>>,
    /// Dropout rates for the last dropout slots of the network (the inputs of
    /// the two top layers for the built-in architectures).
    #[serde(default)]
    pub dropout_rates: Vec<f64>,
    /// SHADE moving-average decay.
    #[serde(default = "default_decay")]
    pub decay: f64,
}

fn default_decay() -> f64 {
    crate::shade::DEFAULT_DECAY
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig::none()
    }
}

impl RegularizerConfig {
    pub fn none() -> Self {
        RegularizerConfig {
            kind: RegularizerKind::None,
            beta: 0.0,
            layer_weights: None,
            dropout_rates: Vec::new(),
            decay: default_decay(),
        }
    }

    pub fn shade(beta: f64) -> Self {
        RegularizerConfig {
            kind: RegularizerKind::Shade,
            beta,
            ..RegularizerConfig::none()
        }
    }

    pub fn weight_decay(beta: f64) -> Self {
        RegularizerConfig {
            kind: RegularizerKind::WeightDecay,
            beta,
            ..RegularizerConfig::none()
        }
    }

    pub fn dropout(rates: Vec<f64>) -> Self {
        RegularizerConfig {
            kind: RegularizerKind::Dropout,
            dropout_rates: rates,
            ..RegularizerConfig::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::invalid(format!("decay must lie in [0, 1], got {}", self.decay)));
        }
        if self.kind != RegularizerKind::Dropout && self.dropout_rates.iter().any(|&r| r != 0.0) {
            return Err(Error::invalid(format!(
                "dropout rates are only used with kind=dropout, got kind={}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Weight actually applied to the penalty; zero for `none` and dropout.
    pub fn effective_beta(&self) -> f64 {
        match self.kind {
            RegularizerKind::Shade | RegularizerKind::WeightDecay => self.beta,
            RegularizerKind::None | RegularizerKind::Dropout => 0.0,
        }
    }
}

/// `0.5 * sum ||W||^2` over weight tensors (biases excluded) and its
/// gradient, which is `W` itself.
pub fn weight_decay_loss(net: &Network) -> (f64, Gradients) {
    let mut loss = 0.0;
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            l.params().map(|(w, b)| {
                loss += 0.5 * w.sum_squares();
                ParamGrad {
                    weights: w.clone(),
                    bias: Tensor::zeros(b.shape()),
                }
            })
        })
        .collect();
    (loss, Gradients { layers })
}
