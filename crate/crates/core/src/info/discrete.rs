//! Exact entropies of discrete joint distributions, plus the decomposition
//! and data-processing checks that run on them.

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats, `-sum p ln p` with `0 ln 0 = 0`.
pub fn discrete_entropy(dist: &[f64]) -> Result<f64> {
    check_distribution(dist)?;
    Ok(dist.iter().map(|&p| plogp(p)).sum())
}

fn check_distribution(dist: &[f64]) -> Result<()> {
    if dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and nonnegative"));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Probability table over the product of several finite alphabets, stored
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n == 0 || n != probs.len() {
            return Err(Error::invalid(format!(
                "table of {} entries does not fit axes {dims:?}",
                probs.len()
            )));
        }
        check_distribution(&probs)?;
        Ok(DiscreteJoint { dims, probs })
    }

    /// Normalizes nonnegative weights into a joint table.
    pub fn from_weights(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative with positive total"));
        }
        DiscreteJoint::new(dims, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.dims).fold(0, |acc, (&c, &d)| acc * d + c)
    }

    pub fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims.len()];
        for (slot, &d) in c.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        c
    }

    pub fn prob(&self, coords: &[usize]) -> f64 {
        self.probs[self.index(coords)]
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for (i, &a) in axes.iter().enumerate() {
            if a >= self.dims.len() || axes[..i].contains(&a) {
                return Err(Error::invalid(format!("bad axis list {axes:?} for {} axes", self.dims.len())));
            }
        }
        Ok(())
    }

    /// Marginal table over `axes` (in the given order).
    pub fn marginal(&self, axes: &[usize]) -> Result<Vec<f64>> {
        self.check_axes(axes)?;
        let sub_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; sub_dims.iter().product()];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let c = self.coords(flat);
            let idx = axes.iter().zip(&sub_dims).fold(0, |acc, (&a, &d)| acc * d + c[a]);
            out[idx] += p;
        }
        Ok(out)
    }

    /// Entropy of the marginal over `axes`; an empty list gives 0.
    pub fn entropy(&self, axes: &[usize]) -> Result<f64> {
        Ok(self.marginal(axes)?.iter().map(|&p| plogp(p)).sum())
    }

    /// `H(target | given) = sum_g p(g) H(target | given = g)`, computed
    /// directly from the conditional slices.
    pub fn conditional_entropy(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        if target.iter().any(|t| given.contains(t)) {
            return Err(Error::invalid("target and conditioning axes overlap"));
        }
        let mut axes = given.to_vec();
        axes.extend_from_slice(target);
        let table = self.marginal(&axes)?;
        let t_size: usize = target.iter().map(|&a| self.dims[a]).product();
        let mut total = 0.0;
        for slice in table.chunks(t_size) {
            let pg: f64 = slice.iter().sum();
            if pg > 0.0 {
                total += pg * slice.iter().map(|&p| plogp(p / pg)).sum::<f64>();
            }
        }
        Ok(total)
    }

    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let mut ab = a.to_vec();
        ab.extend_from_slice(b);
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&ab)?)
    }
}

/// `H(other axis | condition_on)` for a two-axis table.
pub fn conditional_entropy(joint: &DiscreteJoint, condition_on: usize) -> Result<f64> {
    if joint.dims().len() != 2 || condition_on > 1 {
        return Err(Error::invalid("conditional_entropy expects a two-axis table and axis 0 or 1"));
    }
    joint.conditional_entropy(&[1 - condition_on], &[condition_on])
}

/// Residuals of the information identities for a deterministic map `Y = f(X)`
/// observed together with a side variable `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub h_x: f64,
    pub h_y: f64,
    pub h_y_given_x: f64,
    pub h_x_given_y: f64,
    pub h_y_given_c: f64,
    pub i_c_y: f64,
    /// `H(Y|X)` (must vanish).
    pub residual_determinism: f64,
    /// `H(Y) - (H(X) - H(X|Y))`.
    pub residual_information: f64,
    /// `H(Y) - (I(C,Y) + H(Y|C))`.
    pub residual_class_split: f64,
    /// `H(Y|C) - (H(X|C) - H(X|Y,C))`.
    pub residual_conditional: f64,
}

impl DecompositionReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.residual_determinism,
            self.residual_information,
            self.residual_class_split,
            self.residual_conditional,
        ]
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Builds `p(x, y, c)` from `p(x, c)` and a map `f: X -> Y`.
pub fn joint_from_map(p_xc: &DiscreteJoint, f: &[usize], y_size: usize) -> Result<DiscreteJoint> {
    let &[nx, nc] = p_xc.dims() else {
        return Err(Error::invalid("p(x, c) must have two axes"));
    };
    if f.len() != nx || f.iter().any(|&y| y >= y_size) {
        return Err(Error::invalid("map must send every x to a value below y_size"));
    }
    let mut probs = vec![0.0; nx * y_size * nc];
    for x in 0..nx {
        for c in 0..nc {
            probs[(x * y_size + f[x]) * nc + c] = p_xc.prob(&[x, c]);
        }
    }
    DiscreteJoint::new(vec![nx, y_size, nc], probs)
}

/// Checks the decompositions on a table with axes `(X, Y, C)`; rejects it
/// when `Y` is not a function of `X`.
pub fn verify_decompositions(joint: &DiscreteJoint) -> Result<DecompositionReport> {
    if joint.dims().len() != 3 {
        return Err(Error::invalid("expected a table over (X, Y, C)"));
    }
    let p_xy = joint.marginal(&[0, 1])?;
    let ny = joint.dims()[1];
    for (x, row) in p_xy.chunks(ny).enumerate() {
        if row.iter().filter(|&&p| p > 0.0).count() > 1 {
            return Err(Error::invalid(format!("Y is not a deterministic function of X (x = {x})")));
        }
    }
    let (x, y, c) = (0, 1, 2);
    let h_x = joint.entropy(&[x])?;
    let h_y = joint.entropy(&[y])?;
    let h_y_given_x = joint.conditional_entropy(&[y], &[x])?;
    let h_x_given_y = joint.conditional_entropy(&[x], &[y])?;
    let h_y_given_c = joint.conditional_entropy(&[y], &[c])?;
    let h_x_given_c = joint.conditional_entropy(&[x], &[c])?;
    let h_x_given_yc = joint.conditional_entropy(&[x], &[y, c])?;
    let i_c_y = joint.mutual_information(&[c], &[y])?;
    Ok(DecompositionReport {
        h_x,
        h_y,
        h_y_given_x,
        h_x_given_y,
        h_y_given_c,
        i_c_y,
        residual_determinism: h_y_given_x,
        residual_information: h_y - (h_x - h_x_given_y),
        residual_class_split: h_y - (i_c_y + h_y_given_c),
        residual_conditional: h_y_given_c - (h_x_given_c - h_x_given_yc),
    })
}

/// One processing stage: a row-stochastic kernel from the previous
/// alphabet to an output alphabet that is the product of `coords`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// `kernel[i * out + j] = p(out = j | in = i)`.
    pub kernel: Vec<f64>,
    pub coords: Vec<usize>,
}

impl Stage {
    /// Deterministic stage from a lookup table.
    pub fn deterministic(map: &[usize], coords: Vec<usize>) -> Self {
        let out: usize = coords.iter().product();
        let mut kernel = vec![0.0; map.len() * out];
        for (i, &j) in map.iter().enumerate() {
            kernel[i * out + j] = 1.0;
        }
        Stage { kernel, coords }
    }

    pub fn output_size(&self) -> usize {
        self.coords.iter().product()
    }

    pub fn is_deterministic(&self) -> bool {
        self.kernel.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Markov chain `C -> X -> Y_1 -> ... -> Y_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    /// `p(c, x)` with axes `(C, X)`.
    pub source: DiscreteJoint,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpiReport {
    /// `H(X|C), H(Y_1|C), ..., H(Y_L|C)`.
    pub conditional_entropies: Vec<f64>,
    /// `sum_i H(Y_{l,i}|C)` for each stage.
    pub coordinate_sums: Vec<f64>,
    /// Smallest `H(prev|C) - H(next|C)` over deterministic stages.
    pub min_chain_slack: f64,
    /// Smallest `sum_i H(Y_{l,i}|C) - H(Y_l|C)` over stages.
    pub min_subadditivity_slack: f64,
}

impl DpiReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_chain_slack >= -tol && self.min_subadditivity_slack >= -tol
    }
}

/// Propagates `p(c, .)` through every stage and checks that conditional
/// entropy never grows through a deterministic stage and that each stage's
/// conditional entropy is at most the sum over its coordinates.
pub fn verify_dpi(chain: &MarkovChain) -> Result<DpiReport> {
    let &[nc, nx] = chain.source.dims() else {
        return Err(Error::invalid("chain source must be a (C, X) table"));
    };
    let mut current = chain.source.probs().to_vec();
    let mut width = nx;
    let mut conditional_entropies = vec![chain.source.conditional_entropy(&[1], &[0])?];
    let mut coordinate_sums = Vec::new();
    let mut min_chain_slack = f64::INFINITY;
    let mut min_subadditivity_slack = f64::INFINITY;
    for (s, stage) in chain.stages.iter().enumerate() {
        let out = stage.output_size();
        if out == 0 || stage.kernel.len() != width * out {
            return Err(Error::invalid(format!(
                "stage {s} kernel has {} entries, expected {width} x {out}",
                stage.kernel.len()
            )));
        }
        for (i, row) in stage.kernel.chunks(out).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::invalid(format!("stage {s} row {i} is not a distribution")));
            }
        }
        let mut next = vec![0.0; nc * out];
        for c in 0..nc {
            for i in 0..width {
                let p = current[c * width + i];
                if p == 0.0 {
                    continue;
                }
                for (j, &k) in stage.kernel[i * out..(i + 1) * out].iter().enumerate() {
                    next[c * out + j] += p * k;
                }
            }
        }
        let mut dims = vec![nc];
        dims.extend_from_slice(&stage.coords);
        let joint = DiscreteJoint::from_weights(dims, next.clone())?;
        let all: Vec<usize> = (1..=stage.coords.len()).collect();
        let h = joint.conditional_entropy(&all, &[0])?;
        let sum: f64 = all
            .iter()
            .map(|&a| joint.conditional_entropy(&[a], &[0]))
            .sum::<Result<f64>>()?;
        if stage.is_deterministic() {
            let prev = *conditional_entropies.last().expect("non-empty");
            min_chain_slack = min_chain_slack.min(prev - h);
        }
        min_subadditivity_slack = min_subadditivity_slack.min(sum - h);
        conditional_entropies.push(h);
        coordinate_sums.push(sum);
        current = next;
        width = out;
    }
    Ok(DpiReport {
        conditional_entropies,
        coordinate_sums,
        min_chain_slack,
        min_subadditivity_slack,
    })
}
