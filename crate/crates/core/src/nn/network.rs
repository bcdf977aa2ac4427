use serde::{Deserialize, Serialize};

use super::layer::{BinaryActivationSpec, Conv2d, Dense, Layer, ParamGrad, Saved};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Whether a forward pass is for training (dropout active) or evaluation.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Tensor,
    /// One tensor per observed layer, in [`Network::observed_layers`] order.
    pub pre_activations: Vec<Tensor>,
}

/// Parameter gradients, one slot per layer (`None` for parameter-free or
/// frozen layers).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<ParamGrad>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    l.params().map(|(w, b)| ParamGrad {
                        weights: Tensor::zeros(w.shape()),
                        bias: Tensor::zeros(b.shape()),
                    })
                })
                .collect(),
        }
    }

    /// `self += alpha * other`, slot by slot; slots missing from `self` are
    /// filled in.
    pub fn add_scaled(&mut self, alpha: f64, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("Gradients::add_scaled", "layer counts differ"));
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            let Some(theirs) = theirs else { continue };
            match mine {
                Some(m) => {
                    m.weights.axpy(alpha, &theirs.weights)?;
                    m.bias.axpy(alpha, &theirs.bias)?;
                }
                None => {
                    let mut t = theirs.clone();
                    t.weights.scale(alpha);
                    t.bias.scale(alpha);
                    *mine = Some(t);
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weights.is_finite() && g.bias.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.weights.data().iter().chain(g.bias.data()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

struct Cache {
    saved: Vec<Saved>,
    batch: usize,
}

/// Ordered stack of layers mapping a batch of inputs to class scores.
#[derive(Serialize, Deserialize)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// Layers with index `<=` this are excluded from training.
    frozen_through: Option<usize>,
    #[serde(skip)]
    cache: Option<Cache>,
}

impl Clone for Network {
    /// Clones parameters and layout; the forward cache is not carried over.
    fn clone(&self) -> Self {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            frozen_through: self.frozen_through,
            cache: None,
        }
    }
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("input_shape", &self.input_shape)
            .field("layers", &self.layers.iter().map(Layer::name).collect::<Vec<_>>())
            .field("frozen_through", &self.frozen_through)
            .finish()
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers == other.layers
            && self.frozen_through == other.frozen_through
    }
}

impl Network {
    /// Validates that consecutive layers fit together for `input_shape`
    /// (per-sample shape, without the batch axis).
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input_shape.clone();
        for layer in &layers {
            shape = layer.output_shape(&shape)?;
        }
        if shape.len() != 1 {
            return Err(Error::shape(
                "Network::new",
                format!("network must end in a flat score vector, ends in {shape:?}"),
            ));
        }
        Ok(Network {
            input_shape,
            layers,
            frozen_through: None,
            cache: None,
        })
    }

    /// Dense ReLU network: `inputs -> hidden[0] -> ... -> classes`, with a
    /// zero-rate dropout slot after every hidden ReLU.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize, rng: &mut Rng) -> Result<Self> {
        if inputs == 0 || classes == 0 || hidden.contains(&0) {
            return Err(Error::invalid(format!(
                "layer widths must be positive: inputs {inputs}, hidden {hidden:?}, classes {classes}"
            )));
        }
        let mut layers = Vec::new();
        let mut width = inputs;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::init(width, h, rng)));
            layers.push(Layer::Relu);
            layers.push(Layer::Dropout { rate: 0.0 });
            width = h;
        }
        layers.push(Layer::Dense(Dense::init(width, classes, rng)));
        Network::new(vec![inputs], layers)
    }

    /// Three conv + ReLU + 2x2 max-pool stages (5x5, 3x3, 3x3 kernels with
    /// same-padding) followed by one dense classifier.
    pub fn convnet(input: [usize; 3], channels: usize, classes: usize, rng: &mut Rng) -> Result<Self> {
        let [c, h, w] = input;
        let mut layers = vec![
            Layer::Conv2d(Conv2d::init(c, channels, 5, 2, rng)),
            Layer::Relu,
            Layer::MaxPool2d { size: 2 },
            Layer::Conv2d(Conv2d::init(channels, channels, 3, 1, rng)),
            Layer::Relu,
            Layer::MaxPool2d { size: 2 },
            Layer::Dropout { rate: 0.0 },
            Layer::Conv2d(Conv2d::init(channels, channels, 3, 1, rng)),
            Layer::Relu,
            Layer::MaxPool2d { size: 2 },
            Layer::Flatten,
            Layer::Dropout { rate: 0.0 },
        ];
        let flat = channels * (h / 8) * (w / 8);
        if flat == 0 {
            return Err(Error::shape("convnet", format!("input {h}x{w} too small for three 2x2 pools")));
        }
        layers.push(Layer::Dense(Dense::init(flat, classes, rng)));
        Network::new(vec![c, h, w], layers)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.cache = None;
        &mut self.layers
    }

    pub fn classes(&self) -> usize {
        let mut shape = self.input_shape.clone();
        for l in &self.layers {
            shape = l.output_shape(&shape).expect("validated at construction");
        }
        shape[0]
    }

    pub fn frozen_through(&self) -> Option<usize> {
        self.frozen_through
    }

    pub fn is_frozen(&self, layer: usize) -> bool {
        self.frozen_through.is_some_and(|f| layer <= f)
    }

    /// Indices of dense/conv layers whose output feeds a ReLU or binary
    /// activation; these are the pre-activations a regularizer observes.
    pub fn observed_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| {
                self.layers[i].has_params()
                    && matches!(self.layers.get(i + 1), Some(Layer::Relu | Layer::Binary(_)))
            })
            .collect()
    }

    /// Units per observed layer (output channels for conv layers).
    pub fn observed_units(&self) -> Vec<usize> {
        self.observed_layers()
            .into_iter()
            .map(|i| match &self.layers[i] {
                Layer::Dense(d) => d.outputs(),
                Layer::Conv2d(c) => c.out_channels(),
                _ => unreachable!("observed layers carry parameters"),
            })
            .collect()
    }

    /// Sets the rates of the dropout slots, in network order.
    pub fn set_dropout_rates(&mut self, rates: &[f64]) -> Result<()> {
        let slots: Vec<usize> = (0..self.layers.len())
            .filter(|&i| matches!(self.layers[i], Layer::Dropout { .. }))
            .collect();
        if rates.len() > slots.len() {
            return Err(Error::invalid(format!(
                "{} dropout rates given but the network has {} dropout slots",
                rates.len(),
                slots.len()
            )));
        }
        for &r in rates {
            super::layer::check_dropout_rate(r)?;
        }
        // Rates fill the last slots, so a short list regularizes the top layers.
        let offset = slots.len() - rates.len();
        for (slot, &rate) in slots[offset..].iter().zip(rates) {
            self.layers[*slot] = Layer::Dropout { rate };
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1 || batch.shape()[1..] != self.input_shape[..] {
            return Err(Error::shape(
                "forward",
                format!(
                    "batch shape {:?} does not match network input [_, {:?}]",
                    batch.shape(),
                    self.input_shape
                ),
            ));
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor, mode: Mode<'_>) -> Result<(ForwardOutput, Vec<Saved>)> {
        self.check_batch(batch)?;
        let observed = self.observed_layers();
        let mut rng = match mode {
            Mode::Train(rng) => Some(rng),
            Mode::Eval => None,
        };
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(observed.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, s) = layer.forward(&x, rng.as_deref_mut())?;
            if observed.contains(&i) {
                pre_activations.push(y.clone());
            }
            saved.push(s);
            x = y;
        }
        Ok((
            ForwardOutput {
                logits: x,
                pre_activations,
            },
            saved,
        ))
    }

    /// Forward pass that records what [`Network::backward`] needs.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode<'_>) -> Result<ForwardOutput> {
        let (out, saved) = self.run(batch, mode)?;
        self.cache = Some(Cache {
            saved,
            batch: batch.rows(),
        });
        Ok(out)
    }

    /// Evaluation-mode forward pass without touching the cache.
    pub fn predict(&self, batch: &Tensor) -> Result<ForwardOutput> {
        Ok(self.run(batch, Mode::Eval)?.0)
    }

    /// Backpropagates `grad_logits` (dL/dlogits) plus optional extra
    /// gradients with respect to each observed layer's pre-activation.
    ///
    /// Consumes the forward cache; frozen layers get no gradient.
    pub fn backward(&mut self, grad_logits: &Tensor, pre_activation_grads: Option<&[Tensor]>) -> Result<Gradients> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding forward pass".into()))?;
        if grad_logits.rows() != cache.batch {
            return Err(Error::shape(
                "backward",
                format!("gradient batch {} vs forward batch {}", grad_logits.rows(), cache.batch),
            ));
        }
        let observed = self.observed_layers();
        if let Some(extra) = pre_activation_grads {
            if extra.len() != observed.len() {
                return Err(Error::shape(
                    "backward",
                    format!("{} pre-activation gradients for {} observed layers", extra.len(), observed.len()),
                ));
            }
        }
        let stop = self.frozen_through.map_or(0, |f| f + 1);
        let mut grads = Gradients {
            layers: vec![None; self.layers.len()],
        };
        let mut g = grad_logits.clone();
        for i in (stop..self.layers.len()).rev() {
            if let (Some(extra), Some(pos)) = (pre_activation_grads, observed.iter().position(|&o| o == i)) {
                g.add_assign(&extra[pos])?;
            }
            let need_input = i > stop;
            let (pg, dx) = self.layers[i].backward(&cache.saved[i], &g, need_input)?;
            grads.layers[i] = pg;
            match dx {
                Some(dx) => g = dx,
                None => break,
            }
        }
        Ok(grads)
    }

    /// Evaluation-mode pre-activations of one observed layer over a dataset,
    /// processed in fixed-size chunks.
    pub fn collect_pre_activations(&self, inputs: &Tensor, observed_index: usize, chunk: usize) -> Result<Tensor> {
        let n = inputs.rows();
        let mut parts: Vec<f64> = Vec::new();
        let mut shape = None;
        let chunk = chunk.max(1);
        let mut start = 0;
        while start < n {
            let idx: Vec<usize> = (start..(start + chunk).min(n)).collect();
            let out = self.predict(&inputs.select_rows(&idx))?;
            let t = out.pre_activations.get(observed_index).ok_or_else(|| {
                Error::invalid(format!("observed layer {observed_index} does not exist"))
            })?;
            shape.get_or_insert_with(|| t.shape()[1..].to_vec());
            parts.extend_from_slice(t.data());
            start += chunk;
        }
        let mut full = vec![n];
        full.extend(shape.unwrap_or_default());
        Tensor::new(full, parts)
    }

    /// Replaces the ReLU after observed layer `observed_index` with the
    /// two-valued activation `t * 1(y >= t)`, where `t` is the mean of the
    /// strictly positive pre-activations over `calibration`, and freezes that
    /// layer and everything below it.
    pub fn binarize_layer(&self, observed_index: usize, calibration: &Tensor) -> Result<Network> {
        if calibration.rows() == 0 {
            return Err(Error::invalid("calibration data is empty"));
        }
        let observed = self.observed_layers();
        let &layer = observed
            .get(observed_index)
            .ok_or_else(|| Error::invalid(format!("observed layer {observed_index} does not exist")))?;
        let act = layer + 1;
        if !matches!(self.layers[act], Layer::Relu) {
            return Err(Error::invalid(format!("layer {act} is {} not relu", self.layers[act].name())));
        }
        let pre = self.collect_pre_activations(calibration, observed_index, 256)?;
        let (sum, count) = pre
            .data()
            .iter()
            .filter(|&&v| v > 0.0)
            .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
        if count == 0 {
            return Err(Error::invalid(
                "no positive pre-activation in calibration data; threshold undefined",
            ));
        }
        let mut net = self.clone();
        net.layers[act] = Layer::Binary(BinaryActivationSpec {
            layer: act,
            threshold: sum / count as f64,
        });
        net.frozen_through = Some(act);
        Ok(net)
    }

    /// Flat copy of every parameter value in layer order (weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| w.data().iter().chain(b.data()).copied().collect::<Vec<_>>())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::cross_entropy;
    use crate::tensor::matmul;

    fn relu(t: &Tensor) -> Tensor {
        t.map(|v| v.max(0.0))
    }

    fn add_bias(t: &Tensor, b: &Tensor) -> Tensor {
        let n = b.len();
        let data = t.data().iter().enumerate().map(|(i, v)| v + b.data()[i % n]).collect();
        Tensor::new(t.shape().to_vec(), data).unwrap()
    }

    fn dense(net: &Network, i: usize) -> &Dense {
        match &net.layers()[i] {
            Layer::Dense(d) => d,
            _ => panic!("not dense"),
        }
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let mut net = Network::mlp(4, &[5], 3, &mut Rng::new(0)).unwrap();
        for l in net.layers_mut() {
            if let Some((w, _)) = l.params_mut() {
                w.scale(0.0);
            }
        }
        let x = Rng::new(1).gaussian(&[6, 4], 0.0, 1.0).unwrap();
        assert!(net.predict(&x).unwrap().logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_dense_pre_activation() {
        let bias = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let net = Network::new(
            vec![3],
            vec![
                Layer::Dense(Dense {
                    weights: Tensor::identity(3),
                    bias: bias.clone(),
                }),
                Layer::Relu,
                Layer::Dense(Dense {
                    weights: Tensor::identity(3),
                    bias: Tensor::zeros(&[3]),
                }),
            ],
        )
        .unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, -3.0]).unwrap();
        let out = net.predict(&x).unwrap();
        assert_eq!(out.pre_activations[0], add_bias(&x, &bias));
    }

    #[test]
    fn mlp_matches_hand_composition() {
        let net = Network::mlp(5, &[7, 6], 3, &mut Rng::new(12)).unwrap();
        let x = Rng::new(13).gaussian(&[4, 5], 0.0, 1.0).unwrap();
        let out = net.predict(&x).unwrap();
        let mut h = x.clone();
        for (n, i) in [0usize, 3, 6].into_iter().enumerate() {
            let d = dense(&net, i);
            h = add_bias(&matmul(&h, &d.weights.transpose().unwrap()).unwrap(), &d.bias);
            if n < 2 {
                for (a, b) in h.data().iter().zip(out.pre_activations[n].data()) {
                    assert!((a - b).abs() < 1e-12);
                }
                h = relu(&h);
            }
        }
        for (a, b) in h.data().iter().zip(out.logits.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::mlp(5, &[7], 3, &mut Rng::new(2)).unwrap();
        let x = Rng::new(3).gaussian(&[4, 5], 0.0, 1.0).unwrap();
        assert_eq!(net.predict(&x).unwrap().logits, net.predict(&x).unwrap().logits);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = Network::mlp(5, &[7], 3, &mut Rng::new(2)).unwrap();
        let x = Tensor::zeros(&[4, 6]);
        assert!(matches!(net.forward(&x, Mode::Eval), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_requires_forward() {
        let mut net = Network::mlp(5, &[7], 3, &mut Rng::new(2)).unwrap();
        assert!(matches!(net.backward(&Tensor::zeros(&[1, 3]), None), Err(Error::State(_))));
        let x = Tensor::zeros(&[2, 5]);
        net.forward(&x, Mode::Eval).unwrap();
        net.backward(&Tensor::zeros(&[2, 3]), None).unwrap();
        // the cache is consumed
        assert!(net.backward(&Tensor::zeros(&[2, 3]), None).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net = Network::mlp(5, &[7, 4], 3, &mut Rng::new(2)).unwrap();
        let x = Rng::new(3).gaussian(&[4, 5], 0.0, 1.0).unwrap();
        net.forward(&x, Mode::Eval).unwrap();
        let g = net.backward(&Tensor::zeros(&[4, 3]), None).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn single_dense_squared_loss_gradient() {
        // L = 0.5 * sum (xW^T + b - t)^2  =>  dW = delta^T x, db = sum delta
        let mut rng = Rng::new(8);
        let d = Dense::init(3, 2, &mut rng);
        let mut net = Network::new(vec![3], vec![Layer::Dense(d.clone())]).unwrap();
        let x = rng.gaussian(&[4, 3], 0.0, 1.0).unwrap();
        let t = rng.gaussian(&[4, 2], 0.0, 1.0).unwrap();
        let y = net.forward(&x, Mode::Eval).unwrap().logits;
        let mut delta = y.clone();
        delta.axpy(-1.0, &t).unwrap();
        let g = net.backward(&delta, None).unwrap();
        let expect = matmul(&delta.transpose().unwrap(), &x).unwrap();
        let got = &g.layers[0].as_ref().unwrap().weights;
        for (a, b) in got.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let mut net = Network::mlp(4, &[6, 5], 3, &mut rng).unwrap();
        for l in net.layers_mut() {
            if let Some((_, b)) = l.params_mut() {
                *b = rng.gaussian(b.shape(), 0.0, 0.1).unwrap();
            }
        }
        let x = rng.gaussian(&[5, 4], 0.0, 1.0).unwrap();
        let labels = [0, 2, 1, 1, 0];
        let out = net.forward(&x, Mode::Eval).unwrap();
        let (_, dlogits) = cross_entropy(&out.logits, &labels).unwrap();
        let grads = net.backward(&dlogits, None).unwrap();
        let h = 1e-5;
        for li in net.observed_layers().into_iter().chain([6]) {
            let n = net.layers()[li].params().unwrap().0.len();
            for p in 0..n {
                let eval = |delta: f64| {
                    let mut probe = net.clone();
                    probe.layers_mut()[li].params_mut().unwrap().0.data_mut()[p] += delta;
                    cross_entropy(&probe.predict(&x).unwrap().logits, &labels).unwrap().0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.layers[li].as_ref().unwrap().weights.data()[p];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7);
                assert!(rel < 1e-5, "layer {li} param {p}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn convnet_gradient_matches_finite_differences() {
        let mut rng = Rng::new(31);
        let mut net = Network::convnet([1, 8, 8], 2, 3, &mut rng).unwrap();
        let x = rng.gaussian(&[2, 1, 8, 8], 0.0, 1.0).unwrap();
        let labels = [1, 2];
        let out = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(out.pre_activations.len(), 3);
        assert_eq!(out.pre_activations[0].shape(), &[2, 2, 8, 8]);
        let (_, dlogits) = cross_entropy(&out.logits, &labels).unwrap();
        let grads = net.backward(&dlogits, None).unwrap();
        let h = 1e-5;
        for li in [0usize, 3, 7, 12] {
            let n = net.layers()[li].params().unwrap().0.len();
            for p in (0..n).step_by(3) {
                let eval = |delta: f64| {
                    let mut probe = net.clone();
                    probe.layers_mut()[li].params_mut().unwrap().0.data_mut()[p] += delta;
                    cross_entropy(&probe.predict(&x).unwrap().logits, &labels).unwrap().0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.layers[li].as_ref().unwrap().weights.data()[p];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7);
                assert!(rel < 1e-5, "layer {li} param {p}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn dropout_rates_fill_last_slots() {
        let mut net = Network::mlp(4, &[6, 5, 3], 2, &mut Rng::new(0)).unwrap();
        net.set_dropout_rates(&[0.2, 0.4]).unwrap();
        let rates: Vec<f64> = net
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Dropout { rate } => Some(*rate),
                _ => None,
            })
            .collect();
        assert_eq!(rates, vec![0.0, 0.2, 0.4]);
        assert!(net.set_dropout_rates(&[1.0]).is_err());
    }

    #[test]
    fn binarize_threshold_is_positive_mean() {
        // single unit, identity weights: pre-activations are the inputs
        let net = Network::new(
            vec![1],
            vec![
                Layer::Dense(Dense {
                    weights: Tensor::identity(1),
                    bias: Tensor::zeros(&[1]),
                }),
                Layer::Relu,
                Layer::Dense(Dense {
                    weights: Tensor::identity(1),
                    bias: Tensor::zeros(&[1]),
                }),
            ],
        )
        .unwrap();
        let calib = Tensor::new(vec![3, 1], vec![-1.0, 1.0, 3.0]).unwrap();
        let bin = net.binarize_layer(0, &calib).unwrap();
        match bin.layers()[1] {
            Layer::Binary(spec) => assert_eq!(spec.threshold, 2.0),
            ref l => panic!("expected binary activation, got {}", l.name()),
        }
        assert_eq!(bin.predict(&calib).unwrap().logits.data(), &[0.0, 0.0, 2.0]);
        assert!(bin.is_frozen(1) && !bin.is_frozen(2));

        let c = Tensor::filled(&[4, 1], 1.5);
        let bin = net.binarize_layer(0, &c).unwrap();
        assert_eq!(bin.predict(&c).unwrap().logits.data(), &[1.5; 4]);

        let negative = Tensor::filled(&[4, 1], -1.0);
        assert!(net.binarize_layer(0, &negative).is_err());
        assert!(bin.binarize_layer(0, &c).is_err(), "already binarized");
    }

    #[test]
    fn frozen_layers_get_no_gradient() {
        let mut rng = Rng::new(4);
        let net = Network::mlp(4, &[6, 5], 3, &mut rng).unwrap();
        let x = rng.gaussian(&[20, 4], 0.0, 1.0).unwrap();
        let mut bin = net.binarize_layer(1, &x).unwrap();
        let out = bin.forward(&x, Mode::Eval).unwrap();
        let (_, d) = cross_entropy(&out.logits, &[0; 20]).unwrap();
        let g = bin.backward(&d, None).unwrap();
        assert!(g.layers[..=4].iter().all(Option::is_none));
        assert!(g.layers[6].is_some());
    }
}
