use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerName {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

/// Optimizer settings as they appear in experiment configs. Hyperparameters
/// that do not apply to the chosen kind are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerName,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after every batch.
    #[serde(default = "one")]
    pub decay: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn one() -> f64 {
    1.0
}
fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    fn with(kind: OptimizerName, learning_rate: f64, decay: f64) -> Self {
        OptimizerConfig {
            kind,
            learning_rate,
            decay,
            momentum: default_momentum(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    /// Momentum 0.9, lr 0.01, per-batch decay 0.9999.
    pub fn sgd_default() -> Self {
        OptimizerConfig::with(OptimizerName::SgdMomentum, 0.01, 0.9999)
    }

    /// Adam (0.9, 0.999, 1e-8), lr 1e-3, no decay.
    pub fn adam_default() -> Self {
        OptimizerConfig::with(OptimizerName::Adam, 1e-3, 1.0)
    }

    pub fn kind(&self) -> OptimizerKind {
        match self.kind {
            OptimizerName::SgdMomentum => OptimizerKind::SgdMomentum { momentum: self.momentum },
            OptimizerName::Adam => OptimizerKind::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("momentum and Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Slot {
    first: [Tensor; 2],
    second: Option<[Tensor; 2]>,
}

/// Stateful optimizer bound to one network layout.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    lr: f64,
    steps: u64,
    slots: Vec<Option<Slot>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            config,
            lr: config.learning_rate,
            steps: 0,
            slots: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every non-frozen layer with a gradient, then
    /// decays the learning rate.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let n_layers = net.layers().len();
        if grads.layers.len() != n_layers {
            return Err(Error::shape("Optimizer::step", "gradient layout differs from network"));
        }
        if self.slots.len() != n_layers {
            self.slots = vec![None; n_layers];
        }
        self.steps += 1;
        let t = self.steps as i32;
        let lr = self.lr;
        let frozen: Vec<bool> = (0..n_layers).map(|i| net.is_frozen(i)).collect();
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (Some(g), Some((w, b))) = (&grads.layers[i], layer.params_mut()) else {
                continue;
            };
            if frozen[i] {
                continue;
            }
            let slot = self.slots[i].get_or_insert_with(|| Slot {
                first: [Tensor::zeros(w.shape()), Tensor::zeros(b.shape())],
                second: matches!(self.config.kind, OptimizerName::Adam)
                    .then(|| [Tensor::zeros(w.shape()), Tensor::zeros(b.shape())]),
            });
            let params = [w, b];
            let gs = [&g.weights, &g.bias];
            for j in 0..2 {
                let p = params[j].data_mut();
                let gd = gs[j].data();
                if p.len() != gd.len() {
                    return Err(Error::shape("Optimizer::step", format!("layer {i} gradient shape")));
                }
                match self.config.kind() {
                    OptimizerKind::SgdMomentum { momentum } => {
                        let v = slot.first[j].data_mut();
                        for ((pv, vv), gv) in p.iter_mut().zip(v.iter_mut()).zip(gd) {
                            *vv = momentum * *vv + gv;
                            *pv -= lr * *vv;
                        }
                    }
                    OptimizerKind::Adam { beta1, beta2, eps } => {
                        let m = slot.first[j].data_mut();
                        let v = slot.second.as_mut().expect("adam slot")[j].data_mut();
                        let c1 = 1.0 - beta1.powi(t);
                        let c2 = 1.0 - beta2.powi(t);
                        for (((pv, mv), vv), gv) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(gd) {
                            *mv = beta1 * *mv + (1.0 - beta1) * gv;
                            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                            *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        self.lr *= self.config.decay;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn zero_grads(net: &Network) -> Gradients {
        Gradients::zeros_like(net)
    }

    #[test]
    fn zero_gradient_moves_nothing() {
        for cfg in [OptimizerConfig::sgd_default(), OptimizerConfig::adam_default()] {
            let mut net = Network::mlp(3, &[4], 2, &mut Rng::new(1)).unwrap();
            let before = net.flat_params();
            let mut opt = Optimizer::new(cfg).unwrap();
            let g = zero_grads(&net);
            for _ in 0..5 {
                opt.step(&mut net, &g).unwrap();
            }
            assert_eq!(net.flat_params(), before);
        }
    }

    #[test]
    fn sgd_momentum_by_hand() {
        let mut net = Network::mlp(1, &[], 1, &mut Rng::new(1)).unwrap();
        let w0 = net.flat_params()[0];
        let mut g = zero_grads(&net);
        g.layers[0].as_mut().unwrap().weights.data_mut()[0] = 1.0;
        let mut opt = Optimizer::new(OptimizerConfig {
            learning_rate: 0.1,
            decay: 0.5,
            ..OptimizerConfig::sgd_default()
        })
        .unwrap();
        opt.step(&mut net, &g).unwrap();
        opt.step(&mut net, &g).unwrap();
        // v1 = 1, v2 = 1.9; lr 0.1 then 0.05
        let expect = w0 - 0.1 * 1.0 - 0.05 * 1.9;
        assert!((net.flat_params()[0] - expect).abs() < 1e-15);
        assert!((opt.learning_rate() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut net = Network::mlp(1, &[], 1, &mut Rng::new(1)).unwrap();
        let w0 = net.flat_params()[0];
        let mut g = zero_grads(&net);
        g.layers[0].as_mut().unwrap().weights.data_mut()[0] = -3.0;
        let mut opt = Optimizer::new(OptimizerConfig::adam_default()).unwrap();
        opt.step(&mut net, &g).unwrap();
        assert!((net.flat_params()[0] - (w0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn config_json_defaults() {
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"kind":"adam","learning_rate":0.001}"#).unwrap();
        assert_eq!(cfg, OptimizerConfig::adam_default());
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"kind":"adam","learning_rate":0.1,"lr":1}"#).is_err());
        assert!(Optimizer::new(OptimizerConfig { learning_rate: -1.0, ..OptimizerConfig::adam_default() }).is_err());
    }
}
