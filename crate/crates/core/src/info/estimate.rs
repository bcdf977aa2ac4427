//! Histogram entropy estimates and the variance bound
//! `H(Y) <= 0.5 ln(2 pi e Var(Y))`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shade::posterior;

/// Bins used throughout the diagnostics.
pub const DEFAULT_BINS: usize = 64;
/// Variances below this are treated as a point mass.
pub const MIN_VARIANCE: f64 = 1e-12;
/// Tolerance on `bound - estimate` at 1e5 samples and 64 bins.
pub const ESTIMATOR_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    PluginHistogram,
    MillerMadow,
}

/// Uniform bins spanning `[min, max]` of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinSpec {
    pub count: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec { count: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    /// Entropy of the binned variable, nats.
    pub discrete: f64,
    /// `discrete + ln(bin width)`, an estimate of differential entropy.
    pub differential: f64,
    pub estimator: Estimator,
    /// Sample count (effective count for weighted estimates).
    pub samples: f64,
    pub bins: usize,
    pub bin_width: f64,
    pub occupied_bins: usize,
    /// Data range was zero; both values are reported as 0.
    pub degenerate: bool,
}

fn ln_gaussian_bound(var: f64) -> f64 {
    0.5 * (2.0 * PI * E * var).ln()
}

/// `0.5 ln(2 pi e var)`: the entropy of a Gaussian with this variance.
pub fn gaussian_entropy(var: f64) -> f64 {
    ln_gaussian_bound(var)
}

/// Plug-in histogram entropy with optional Miller-Madow correction.
pub fn sample_entropy(samples: &[f64], bins: BinSpec, estimator: Estimator) -> Result<EntropyEstimate> {
    if samples.len() < 2 {
        return Err(Error::invalid("entropy estimation needs at least 2 samples"));
    }
    weighted_entropy(samples, None, bins, estimator)
}

/// Histogram entropy where each sample carries a nonnegative weight.
pub fn weighted_sample_entropy(
    samples: &[f64],
    weights: &[f64],
    bins: BinSpec,
    estimator: Estimator,
) -> Result<EntropyEstimate> {
    if samples.len() != weights.len() {
        return Err(Error::invalid("one weight per sample required"));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("weights must be nonnegative and not all zero"));
    }
    weighted_entropy(samples, Some(weights), bins, estimator)
}

fn weighted_entropy(
    samples: &[f64],
    weights: Option<&[f64]>,
    bins: BinSpec,
    estimator: Estimator,
) -> Result<EntropyEstimate> {
    if bins.count == 0 {
        return Err(Error::invalid("at least one bin required"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample in entropy estimate".into()));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    // the range only covers samples that carry weight
    let (lo, hi) = samples
        .iter()
        .enumerate()
        .filter(|&(i, _)| weight(i) > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    let total: f64 = (0..samples.len()).map(weight).sum();
    let total_sq: f64 = (0..samples.len()).map(|i| weight(i).powi(2)).sum();
    let effective = total * total / total_sq;
    if !(hi > lo) {
        return Ok(EntropyEstimate {
            discrete: 0.0,
            differential: 0.0,
            estimator,
            samples: effective,
            bins: bins.count,
            bin_width: 0.0,
            occupied_bins: 1,
            degenerate: true,
        });
    }
    let width = (hi - lo) / bins.count as f64;
    let mut hist = vec![0.0; bins.count];
    for (i, &v) in samples.iter().enumerate() {
        let b = (((v - lo) / width) as usize).min(bins.count - 1);
        hist[b] += weight(i);
    }
    let occupied = hist.iter().filter(|&&c| c > 0.0).count();
    let mut h: f64 = hist
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum();
    if estimator == Estimator::MillerMadow {
        h += (occupied as f64 - 1.0) / (2.0 * effective);
    }
    Ok(EntropyEstimate {
        discrete: h,
        differential: h + width.ln(),
        estimator,
        samples: effective,
        bins: bins.count,
        bin_width: width,
        occupied_bins: occupied,
        degenerate: false,
    })
}

fn weighted_variance(samples: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = samples.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    samples.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total
}

/// Outcome of comparing an entropy estimate with the Gaussian variance bound.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBoundReport {
    pub entropy: f64,
    pub bound: f64,
    /// `bound - entropy`; should be `>= -tolerance`.
    pub gap: f64,
    pub variance: f64,
    pub samples: usize,
    pub bins: usize,
    pub degenerate: bool,
    pub tolerance: f64,
}

impl VarianceBoundReport {
    /// Degenerate reports carry no assertion and always pass.
    pub fn holds(&self) -> bool {
        self.degenerate || self.gap >= -self.tolerance
    }
}

/// Compares the histogram differential entropy with `0.5 ln(2 pi e Var)`.
///
/// With `posteriors` (`p(z|y)` per sample, for `z` in {0, 1}) both sides are
/// conditional on the latent mode: `sum_z p(z) H(Y|z)` against
/// `sum_z p(z) 0.5 ln(2 pi e Var(Y|z))`, using posterior-weighted
/// histograms and variances.
pub fn variance_bound_check(samples: &[f64], posteriors: Option<&[(f64, f64)]>) -> Result<VarianceBoundReport> {
    if samples.len() < 2 {
        return Err(Error::invalid("variance bound needs at least 2 samples"));
    }
    let bins = BinSpec::default();
    let mut report = VarianceBoundReport {
        entropy: 0.0,
        bound: 0.0,
        gap: 0.0,
        variance: 0.0,
        samples: samples.len(),
        bins: bins.count,
        degenerate: false,
        tolerance: ESTIMATOR_TOLERANCE,
    };
    match posteriors {
        None => {
            let ones = vec![1.0; samples.len()];
            let var = weighted_variance(samples, &ones);
            report.variance = var;
            if var < MIN_VARIANCE {
                report.degenerate = true;
                return Ok(report);
            }
            let est = sample_entropy(samples, bins, Estimator::PluginHistogram)?;
            report.entropy = est.differential;
            report.bound = gaussian_entropy(var);
        }
        Some(post) => {
            if post.len() != samples.len() {
                return Err(Error::invalid("one posterior pair per sample required"));
            }
            let n = samples.len() as f64;
            for z in 0..2 {
                let w: Vec<f64> = post.iter().map(|&(p0, p1)| if z == 0 { p0 } else { p1 }).collect();
                let mass: f64 = w.iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                let prior = mass / n;
                let var = weighted_variance(samples, &w);
                report.variance += prior * var;
                if var < MIN_VARIANCE {
                    report.degenerate = true;
                    continue;
                }
                let est = weighted_sample_entropy(samples, &w, bins, Estimator::PluginHistogram)?;
                report.entropy += prior * est.differential;
                report.bound += prior * gaussian_entropy(var);
            }
        }
    }
    report.gap = report.bound - report.entropy;
    Ok(report)
}

/// `H(Y|C) = sum_c p(c) H(Y|c)` from labelled samples. Classes with fewer
/// than `min_per_class` samples are dropped (and returned) and the remaining
/// class weights renormalized. Point-mass classes contribute 0.
pub fn entropy_given_labels(
    values: &[f64],
    labels: &[usize],
    classes: usize,
    min_per_class: usize,
) -> Result<(f64, Vec<usize>)> {
    if values.len() != labels.len() {
        return Err(Error::invalid("one label per value required"));
    }
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); classes];
    for (&v, &l) in values.iter().zip(labels) {
        groups
            .get_mut(l)
            .ok_or_else(|| Error::invalid(format!("label {l} out of range")))?
            .push(v);
    }
    let mut excluded = Vec::new();
    let mut used = 0usize;
    let mut acc = 0.0;
    for (c, g) in groups.iter().enumerate() {
        if g.len() < min_per_class.max(2) {
            excluded.push(c);
            continue;
        }
        let est = sample_entropy(g, BinSpec::default(), Estimator::PluginHistogram)?;
        acc += g.len() as f64 * est.differential;
        used += g.len();
    }
    if used == 0 {
        return Err(Error::invalid("no class has enough samples"));
    }
    Ok((acc / used as f64, excluded))
}

/// `H(Y|Z) = sum_z p(z) H(Y|z)` with the soft partition given by the
/// posterior `p(z|y)`; each sample enters mode `z` with weight
/// `p(z|y) / sum_k p(z|y_k)`.
pub fn entropy_given_latent(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("entropy estimation needs at least 2 samples"));
    }
    let n = values.len() as f64;
    let mut acc = 0.0;
    for z in 0..2 {
        let w: Vec<f64> = values
            .iter()
            .map(|&y| {
                let (p0, p1) = posterior(y);
                if z == 0 {
                    p0
                } else {
                    p1
                }
            })
            .collect();
        let mass: f64 = w.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let est = weighted_sample_entropy(values, &w, BinSpec::default(), Estimator::PluginHistogram)?;
        acc += mass / n * est.differential;
    }
    Ok(acc)
}
