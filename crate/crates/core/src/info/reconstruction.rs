//! How hard it is to recover `X` from a representation `Y`, bounded by
//! `H(X|Y)`.
//!
//! Discrete case (zero-one error `E`, entropies in bits):
//! `(H(X|Y) - 1) / log2|X| <= E <= 1 - 2^(-H(X|Y))`, attained by the
//! MAP reconstructor. Continuous case (squared error):
//! `exp(2 H(X|Y)) / (2 pi e) <= E`, attained by `E[X|Y]`.

use std::f64::consts::{E, LN_2, PI};

use super::discrete::DiscreteJoint;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest alphabet handled by the exact discrete checks.
pub const MAX_DISCRETE_SUPPORT: usize = 16;
/// Largest number of reconstructors enumerated by the brute-force check.
pub const MAX_BRUTE_FORCE: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteReconstructionReport {
    pub h_x_given_y_bits: f64,
    /// Zero-one error of the MAP reconstructor.
    pub error: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `error - lower_bound`
    pub lower_slack: f64,
    /// `upper_bound - error`
    pub upper_slack: f64,
    /// `log2(1 - E) + H(X|Y)`, the intermediate step of the upper bound.
    pub jensen_slack: f64,
    /// `map[y]` is the reconstructed `x`.
    pub map: Vec<usize>,
    /// Smallest error over all `|X|^|Y|` reconstructors, when enumerated.
    pub brute_force_error: Option<f64>,
}

impl DiscreteReconstructionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower_slack >= -tol
            && self.upper_slack >= -tol
            && self.jensen_slack >= -tol
            && self.brute_force_error.is_none_or(|b| self.error <= b + tol)
    }
}

/// Zero-one error `P(map(Y) != X)` for a table with axes `(X, Y)`.
pub fn reconstruction_error(joint: &DiscreteJoint, map: &[usize]) -> f64 {
    let [_, ny] = [joint.dims()[0], joint.dims()[1]];
    let mut correct = 0.0;
    for (y, &x) in map.iter().enumerate().take(ny) {
        correct += joint.prob(&[x, y]);
    }
    1.0 - correct
}

/// `argmax_x p(x, y)` for every `y` (first maximizer on ties).
pub fn map_reconstructor(joint: &DiscreteJoint) -> Vec<usize> {
    let (nx, ny) = (joint.dims()[0], joint.dims()[1]);
    (0..ny)
        .map(|y| {
            let mut best = 0;
            for x in 1..nx {
                if joint.prob(&[x, y]) > joint.prob(&[best, y]) {
                    best = x;
                }
            }
            best
        })
        .collect()
}

/// Minimum error over every map `Y -> X`, or `None` when there are more than
/// `limit` of them.
pub fn brute_force_min_error(joint: &DiscreteJoint, limit: u64) -> Option<f64> {
    let (nx, ny) = (joint.dims()[0], joint.dims()[1]);
    let total = (nx as u64).checked_pow(ny as u32)?;
    if total > limit {
        return None;
    }
    let mut map = vec![0usize; ny];
    let mut best = f64::INFINITY;
    for _ in 0..total {
        best = best.min(reconstruction_error(joint, &map));
        for slot in map.iter_mut() {
            *slot += 1;
            if *slot < nx {
                break;
            }
            *slot = 0;
        }
    }
    Some(best)
}

/// Computes the MAP error and both entropy bounds for a table with axes
/// `(X, Y)`.
pub fn reconstruction_bounds_discrete(joint: &DiscreteJoint) -> Result<DiscreteReconstructionReport> {
    let &[nx, ny] = joint.dims() else {
        return Err(Error::invalid("expected a table over (X, Y)"));
    };
    if nx > MAX_DISCRETE_SUPPORT || ny > MAX_DISCRETE_SUPPORT {
        return Err(Error::invalid(format!(
            "support {nx} x {ny} exceeds the exhaustive limit of {MAX_DISCRETE_SUPPORT} per axis"
        )));
    }
    let h_bits = joint.conditional_entropy(&[0], &[1])? / LN_2;
    let map = map_reconstructor(joint);
    let error = reconstruction_error(joint, &map);
    let lower_bound = if nx >= 2 {
        (h_bits - 1.0) / (nx as f64).log2()
    } else {
        f64::NEG_INFINITY
    };
    let upper_bound = 1.0 - (-h_bits).exp2();
    let jensen_slack = if error < 1.0 {
        (1.0 - error).log2() + h_bits
    } else {
        f64::NEG_INFINITY
    };
    Ok(DiscreteReconstructionReport {
        h_x_given_y_bits: h_bits,
        error,
        lower_bound,
        upper_bound,
        lower_slack: error - lower_bound,
        upper_slack: upper_bound - error,
        jensen_slack,
        map,
        brute_force_error: brute_force_min_error(joint, MAX_BRUTE_FORCE),
    })
}

/// Jointly Gaussian `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

impl GaussianPair {
    pub fn independent(var_x: f64, var_y: f64) -> Self {
        GaussianPair {
            mean_x: 0.0,
            mean_y: 0.0,
            var_x,
            var_y,
            cov: 0.0,
        }
    }

    /// `Y = X + N` with `N ~ N(0, noise_var)` independent of `X`.
    pub fn additive_noise(var_x: f64, noise_var: f64) -> Self {
        GaussianPair {
            mean_x: 0.0,
            mean_y: 0.0,
            var_x,
            var_y: var_x + noise_var,
            cov: var_x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.var_x * self.var_y - self.cov * self.cov;
        if !(self.var_x > 0.0 && self.var_y > 0.0) || !(det > 1e-12 * self.var_x * self.var_y) {
            return Err(Error::invalid("covariance matrix is singular or not positive definite"));
        }
        Ok(())
    }

    pub fn conditional_variance(&self) -> f64 {
        self.var_x - self.cov * self.cov / self.var_y
    }

    /// Slope of `E[X|Y=y]` in `y`.
    pub fn regression_slope(&self) -> f64 {
        self.cov / self.var_y
    }

    pub fn conditional_mean(&self, y: f64) -> f64 {
        self.mean_x + self.regression_slope() * (y - self.mean_y)
    }

    /// `H(X|Y)` in nats.
    pub fn conditional_entropy(&self) -> f64 {
        0.5 * (2.0 * PI * E * self.conditional_variance()).ln()
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Vec<(f64, f64)> {
        let sx = self.var_x.sqrt();
        let slope = self.cov / self.var_x;
        let resid = (self.var_y - self.cov * self.cov / self.var_x).max(0.0).sqrt();
        (0..n)
            .map(|_| {
                let dx = sx * rng.standard_normal();
                let dy = slope * dx + resid * rng.standard_normal();
                (self.mean_x + dx, self.mean_y + dy)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousReconstructionReport {
    pub conditional_entropy: f64,
    pub conditional_variance: f64,
    /// `exp(2 H(X|Y)) / (2 pi e)`
    pub bound: f64,
    /// Squared error of the conditional-mean reconstructor on the samples.
    pub sample_mse: f64,
    /// `|sample_mse - Var(X|Y)| / Var(X|Y)`
    pub mse_relative_error: f64,
    /// `(slope, mse)` for perturbed linear reconstructors.
    pub alternatives: Vec<(f64, f64)>,
}

impl ContinuousReconstructionReport {
    pub fn holds(&self, bound_tol: f64, mse_tol: f64) -> bool {
        self.bound <= self.conditional_variance * (1.0 + bound_tol)
            && self.mse_relative_error <= mse_tol
            && self.alternatives.iter().all(|&(_, mse)| mse > self.sample_mse)
    }
}

fn linear_mse(model: &GaussianPair, slope: f64, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(x, y)| (x - model.mean_x - slope * (y - model.mean_y)).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

/// Checks the squared-error bound on samples drawn from a known Gaussian
/// model and compares the optimal reconstructor against perturbed slopes.
pub fn reconstruction_bounds_continuous(
    model: &GaussianPair,
    samples: &[(f64, f64)],
) -> Result<ContinuousReconstructionReport> {
    model.validate()?;
    if samples.len() < 2 {
        return Err(Error::invalid("at least 2 samples required"));
    }
    let h = model.conditional_entropy();
    let var = model.conditional_variance();
    let bound = (2.0 * h).exp() / (2.0 * PI * E);
    let slope = model.regression_slope();
    let sample_mse = linear_mse(model, slope, samples);
    let scale = slope.abs().max(0.1);
    let alternatives = [-0.5, -0.2, 0.2, 0.5]
        .iter()
        .map(|d| {
            let s = slope + d * scale;
            (s, linear_mse(model, s, samples))
        })
        .collect();
    Ok(ContinuousReconstructionReport {
        conditional_entropy: h,
        conditional_variance: var,
        bound,
        sample_mse,
        mse_relative_error: (sample_mse - var).abs() / var,
        alternatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_representation_is_lossless() {
        let mut probs = vec![0.0; 16];
        for i in 0..4 {
            probs[i * 4 + i] = 0.25;
        }
        let j = DiscreteJoint::new(vec![4, 4], probs).unwrap();
        let r = reconstruction_bounds_discrete(&j).unwrap();
        assert_eq!(r.h_x_given_y_bits, 0.0);
        assert!(r.error.abs() < 1e-15);
        assert!(r.upper_bound.abs() < 1e-15);
        assert!(r.holds(1e-9));
    }

    #[test]
    fn constant_representation_of_a_fair_bit() {
        let j = DiscreteJoint::new(vec![2, 1], vec![0.5, 0.5]).unwrap();
        let r = reconstruction_bounds_discrete(&j).unwrap();
        assert!((r.h_x_given_y_bits - 1.0).abs() < 1e-12);
        assert!((r.error - 0.5).abs() < 1e-15);
        assert!((r.upper_bound - 0.5).abs() < 1e-12);
        // both reconstructors of the single y value err half the time
        assert_eq!(reconstruction_error(&j, &[0]), 0.5);
        assert_eq!(reconstruction_error(&j, &[1]), 0.5);
        assert_eq!(r.brute_force_error, Some(0.5));
    }

    #[test]
    fn map_is_optimal_on_random_tables() {
        let mut rng = Rng::new(2);
        for _ in 0..30 {
            let w: Vec<f64> = (0..16).map(|_| rng.uniform().powi(3)).collect();
            let j = DiscreteJoint::from_weights(vec![4, 4], w).unwrap();
            let r = reconstruction_bounds_discrete(&j).unwrap();
            let best = r.brute_force_error.unwrap();
            assert!((r.error - best).abs() < 1e-12);
            assert!(r.holds(1e-9), "{r:?}");
        }
    }

    #[test]
    fn oversized_support_rejected() {
        let j = DiscreteJoint::from_weights(vec![17, 2], vec![1.0; 34]).unwrap();
        assert!(reconstruction_bounds_discrete(&j).is_err());
    }

    #[test]
    fn gaussian_independent_case() {
        let m = GaussianPair::independent(2.0, 3.0);
        assert_eq!(m.conditional_variance(), 2.0);
        let samples = m.sample(&mut Rng::new(3), 100_000);
        let r = reconstruction_bounds_continuous(&m, &samples).unwrap();
        assert!((r.bound - 2.0).abs() < 1e-12);
        assert!(r.holds(1e-12, 0.02), "{r:?}");
    }

    #[test]
    fn gaussian_additive_noise_case() {
        let (vx, s2) = (2.0, 0.5);
        let m = GaussianPair::additive_noise(vx, s2);
        let expect = s2 * vx / (s2 + vx);
        assert!((m.conditional_variance() - expect).abs() < 1e-12);
        let samples = m.sample(&mut Rng::new(4), 100_000);
        let r = reconstruction_bounds_continuous(&m, &samples).unwrap();
        assert!((r.bound - expect).abs() < 1e-12);
        assert!(r.mse_relative_error < 0.02, "{r:?}");
        assert!(r.alternatives.iter().all(|&(_, mse)| mse > r.sample_mse));
    }

    #[test]
    fn singular_covariance_rejected() {
        let m = GaussianPair {
            mean_x: 0.0,
            mean_y: 0.0,
            var_x: 1.0,
            var_y: 1.0,
            cov: 1.0,
        };
        assert!(reconstruction_bounds_continuous(&m, &[(0.0, 0.0), (1.0, 1.0)]).is_err());
    }
}
