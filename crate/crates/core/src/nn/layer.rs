use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{gemm, gemm_at, gemm_bt, Tensor};

/// Fully connected layer, `y = x W^T + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// 2-D convolution over NCHW input, stride 1, symmetric zero padding.
/// Weights are `[out, in, k, k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub weights: Tensor,
    pub bias: Tensor,
    pub padding: usize,
}

/// Two-valued activation `t * 1(y >= t)` that replaces a ReLU after
/// binarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryActivationSpec {
    /// Index of the activation layer inside the network.
    pub layer: usize,
    /// Mean of the strictly positive pre-activations seen during calibration.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Relu,
    MaxPool2d { size: usize },
    Flatten,
    Dropout { rate: f64 },
    Binary(BinaryActivationSpec),
}

/// Per-layer data kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Saved {
    Input(Tensor),
    Mask(Vec<f64>),
    Argmax { input_shape: Vec<usize>, index: Vec<usize> },
    Shape(Vec<usize>),
    Nothing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// He-uniform initialization, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        Dense {
            weights: rng.uniform_tensor(&[outputs, inputs], -bound, bound),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (k, n_in) = (x.rows(), x.row_len());
        if x.shape().len() != 2 || n_in != self.inputs() {
            return Err(Error::shape(
                "dense forward",
                format!("input {:?}, layer expects [_, {}]", x.shape(), self.inputs()),
            ));
        }
        let n_out = self.outputs();
        let mut out = Vec::with_capacity(k * n_out);
        for _ in 0..k {
            out.extend_from_slice(self.bias.data());
        }
        gemm_bt(x.data(), self.weights.data(), &mut out, k, n_in, n_out);
        Tensor::new(vec![k, n_out], out)
    }

    fn backward(&self, x: &Tensor, g: &Tensor, need_input: bool) -> (ParamGrad, Option<Tensor>) {
        let (k, n_in, n_out) = (x.rows(), self.inputs(), self.outputs());
        let mut dw = vec![0.0; n_out * n_in];
        gemm_at(g.data(), x.data(), &mut dw, k, n_out, n_in);
        let mut db = vec![0.0; n_out];
        for r in 0..k {
            for (b, v) in db.iter_mut().zip(g.row(r)) {
                *b += v;
            }
        }
        let dx = need_input.then(|| {
            let mut dx = vec![0.0; k * n_in];
            gemm(g.data(), self.weights.data(), &mut dx, k, n_out, n_in);
            Tensor::new(vec![k, n_in], dx).expect("shape")
        });
        let grad = ParamGrad {
            weights: Tensor::new(vec![n_out, n_in], dw).expect("shape"),
            bias: Tensor::new(vec![n_out], db).expect("shape"),
        };
        (grad, dx)
    }
}

impl Conv2d {
    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, padding: usize, rng: &mut Rng) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let bound = (6.0 / fan_in as f64).sqrt();
        Conv2d {
            weights: rng.uniform_tensor(&[out_channels, in_channels, kernel, kernel], -bound, bound),
            bias: Tensor::zeros(&[out_channels]),
            padding,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    /// Output spatial extent for an input of `h x w`.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let k = self.kernel();
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        (hp >= k && wp >= k).then(|| (hp - k + 1, wp - k + 1))
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        match x.shape() {
            &[n, c, h, w] if c == self.in_channels() => {
                if self.output_hw(h, w).is_none() {
                    return Err(Error::shape("conv2d", format!("input {h}x{w} smaller than kernel")));
                }
                Ok((n, c, h, w, self.kernel()))
            }
            s => Err(Error::shape(
                "conv2d forward",
                format!("input {s:?}, layer expects [_, {}, H, W]", self.in_channels()),
            )),
        }
    }

    /// Unfolds one `[c, h, w]` sample into `[c*k*k, ho*wo]` columns.
    fn im2col(&self, sample: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
        let k = self.kernel();
        let p = self.padding as isize;
        let (ho, wo) = self.output_hw(h, w).expect("checked");
        let mut row = 0;
        for ch in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                    for oi in 0..ho {
                        let ii = oi as isize + ki as isize - p;
                        for oj in 0..wo {
                            let jj = oj as isize + kj as isize - p;
                            dst[oi * wo + oj] = if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                                sample[ch * h * w + ii as usize * w + jj as usize]
                            } else {
                                0.0
                            };
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], c: usize, h: usize, w: usize, sample: &mut [f64]) {
        let k = self.kernel();
        let p = self.padding as isize;
        let (ho, wo) = self.output_hw(h, w).expect("checked");
        let mut row = 0;
        for ch in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                    for oi in 0..ho {
                        let ii = oi as isize + ki as isize - p;
                        if ii < 0 || ii as usize >= h {
                            continue;
                        }
                        for oj in 0..wo {
                            let jj = oj as isize + kj as isize - p;
                            if jj >= 0 && (jj as usize) < w {
                                sample[ch * h * w + ii as usize * w + jj as usize] += src[oi * wo + oj];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w, k) = self.dims(x)?;
        let (ho, wo) = self.output_hw(h, w).expect("checked");
        let oc = self.out_channels();
        let patch = c * k * k;
        let mut cols = vec![0.0; patch * ho * wo];
        let mut out = vec![0.0; n * oc * ho * wo];
        for s in 0..n {
            self.im2col(x.row(s), c, h, w, &mut cols);
            let dst = &mut out[s * oc * ho * wo..(s + 1) * oc * ho * wo];
            for (o, chunk) in dst.chunks_mut(ho * wo).enumerate() {
                chunk.fill(self.bias.data()[o]);
            }
            gemm(self.weights.data(), &cols, dst, oc, patch, ho * wo);
        }
        Tensor::new(vec![n, oc, ho, wo], out)
    }

    fn backward(&self, x: &Tensor, g: &Tensor, need_input: bool) -> (ParamGrad, Option<Tensor>) {
        let (n, c, h, w, k) = self.dims(x).expect("shape checked in forward");
        let (ho, wo) = self.output_hw(h, w).expect("checked");
        let oc = self.out_channels();
        let patch = c * k * k;
        let mut cols = vec![0.0; patch * ho * wo];
        let mut dcols = vec![0.0; patch * ho * wo];
        let mut dw = vec![0.0; oc * patch];
        let mut db = vec![0.0; oc];
        let mut dx = need_input.then(|| vec![0.0; x.len()]);
        for s in 0..n {
            let gs = g.row(s);
            for (o, chunk) in gs.chunks(ho * wo).enumerate() {
                db[o] += chunk.iter().sum::<f64>();
            }
            self.im2col(x.row(s), c, h, w, &mut cols);
            gemm_bt(gs, &cols, &mut dw, oc, ho * wo, patch);
            if let Some(dx) = dx.as_mut() {
                dcols.fill(0.0);
                gemm_at(self.weights.data(), gs, &mut dcols, oc, patch, ho * wo);
                self.col2im(&dcols, c, h, w, &mut dx[s * c * h * w..(s + 1) * c * h * w]);
            }
        }
        let grad = ParamGrad {
            weights: Tensor::new(self.weights.shape().to_vec(), dw).expect("shape"),
            bias: Tensor::new(vec![oc], db).expect("shape"),
        };
        (grad, dx.map(|d| Tensor::new(x.shape().to_vec(), d).expect("shape")))
    }
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv2d(_))
    }

    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Dense(d) => Some((&d.weights, &d.bias)),
            Layer::Conv2d(c) => Some((&c.weights, &c.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match self {
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            Layer::Conv2d(c) => Some((&mut c.weights, &mut c.bias)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::Flatten => "flatten",
            Layer::Dropout { .. } => "dropout",
            Layer::Binary(_) => "binary_activation",
        }
    }

    /// Runs the layer; `train_rng` is `Some` in training mode.
    pub(crate) fn forward(&self, x: &Tensor, train_rng: Option<&mut Rng>) -> Result<(Tensor, Saved)> {
        Ok(match self {
            Layer::Dense(d) => (d.forward(x)?, Saved::Input(x.clone())),
            Layer::Conv2d(c) => (c.forward(x)?, Saved::Input(x.clone())),
            Layer::Relu => {
                let mask: Vec<f64> = x.data().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
                (x.map(|v| if v > 0.0 { v } else { 0.0 }), Saved::Mask(mask))
            }
            Layer::Binary(spec) => {
                let t = spec.threshold;
                (x.map(|v| if v >= t { t } else { 0.0 }), Saved::Nothing)
            }
            Layer::Dropout { rate } => {
                check_dropout_rate(*rate)?;
                match train_rng {
                    Some(rng) if *rate > 0.0 => {
                        let mask = dropout_mask(x.len(), *rate, rng);
                        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                        (Tensor::new(x.shape().to_vec(), data)?, Saved::Mask(mask))
                    }
                    _ => (x.clone(), Saved::Nothing),
                }
            }
            Layer::Flatten => {
                let flat = x.clone().reshape(&[x.rows(), x.row_len()])?;
                (flat, Saved::Shape(x.shape().to_vec()))
            }
            Layer::MaxPool2d { size } => maxpool_forward(x, *size)?,
        })
    }

    /// Returns parameter gradients (for parametric layers) and, when asked,
    /// the gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        saved: &Saved,
        g: &Tensor,
        need_input: bool,
    ) -> Result<(Option<ParamGrad>, Option<Tensor>)> {
        Ok(match (self, saved) {
            (Layer::Dense(d), Saved::Input(x)) => {
                let (pg, dx) = d.backward(x, g, need_input);
                (Some(pg), dx)
            }
            (Layer::Conv2d(c), Saved::Input(x)) => {
                let (pg, dx) = c.backward(x, g, need_input);
                (Some(pg), dx)
            }
            (Layer::Relu | Layer::Dropout { .. }, Saved::Mask(mask)) => {
                let data = g.data().iter().zip(mask).map(|(v, m)| v * m).collect();
                (None, Some(Tensor::new(g.shape().to_vec(), data)?))
            }
            (Layer::Dropout { .. }, Saved::Nothing) => (None, Some(g.clone())),
            // The step function has zero derivative almost everywhere.
            (Layer::Binary(_), Saved::Nothing) => (None, Some(Tensor::zeros(g.shape()))),
            (Layer::Flatten, Saved::Shape(shape)) => (None, Some(g.clone().reshape(shape)?)),
            (Layer::MaxPool2d { .. }, Saved::Argmax { input_shape, index }) => {
                let mut dx = Tensor::zeros(input_shape);
                for (&i, &v) in index.iter().zip(g.data()) {
                    dx.data_mut()[i] += v;
                }
                (None, Some(dx))
            }
            (layer, _) => {
                return Err(Error::State(format!(
                    "{} layer has no matching forward cache",
                    layer.name()
                )))
            }
        })
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: String| Err(Error::shape("network layout", what));
        match self {
            Layer::Dense(d) => {
                if input != [d.inputs()] {
                    return bad(format!("dense expects [{}], got {input:?}", d.inputs()));
                }
                Ok(vec![d.outputs()])
            }
            Layer::Conv2d(c) => match input {
                &[ch, h, w] if ch == c.in_channels() => match c.output_hw(h, w) {
                    Some((ho, wo)) => Ok(vec![c.out_channels(), ho, wo]),
                    None => bad(format!("conv kernel larger than {h}x{w}")),
                },
                _ => bad(format!("conv expects [{}, H, W], got {input:?}", c.in_channels())),
            },
            Layer::MaxPool2d { size } => match input {
                &[ch, h, w] if h >= *size && w >= *size => Ok(vec![ch, h / size, w / size]),
                _ => bad(format!("maxpool {size} cannot take {input:?}")),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Relu | Layer::Dropout { .. } | Layer::Binary(_) => Ok(input.to_vec()),
        }
    }
}

pub(crate) fn check_dropout_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    Ok(())
}

fn dropout_mask(n: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.uniform() < rate { 0.0 } else { keep }).collect()
}

/// Inverted dropout: in training each unit is zeroed with probability `rate`
/// and survivors are scaled by `1 / (1 - rate)`; evaluation is the identity.
/// A zero rate draws nothing from `rng`.
pub fn dropout_forward(x: &Tensor, rate: f64, rng: &mut Rng, training: bool) -> Result<Tensor> {
    check_dropout_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}

fn maxpool_forward(x: &Tensor, size: usize) -> Result<(Tensor, Saved)> {
    let &[n, c, h, w] = x.shape() else {
        return Err(Error::shape("maxpool2d", format!("expected NCHW, got {:?}", x.shape())));
    };
    if size == 0 || h < size || w < size {
        return Err(Error::shape("maxpool2d", format!("window {size} on {h}x{w}")));
    }
    let (ho, wo) = (h / size, w / size);
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut index = Vec::with_capacity(n * c * ho * wo);
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oi in 0..ho {
            for oj in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = base + oi * size * w + oj * size;
                for di in 0..size {
                    for dj in 0..size {
                        let i = base + (oi * size + di) * w + oj * size + dj;
                        if data[i] > best {
                            best = data[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                index.push(best_i);
            }
        }
    }
    Ok((
        Tensor::new(vec![n, c, ho, wo], out)?,
        Saved::Argmax {
            input_shape: x.shape().to_vec(),
            index,
        },
    ))
}
