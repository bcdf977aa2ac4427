//! Seeded, splittable random source.
//!
//! Everything random in the crate (initialization, dropout masks, batch order,
//! synthetic data) draws from this type so a run is reproducible from one seed.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// ChaCha8 stream keyed by a 64-bit seed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream, advancing this one by one draw.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.inner.next_u64())
    }

    /// Child stream keyed by `(seed, tag)` without touching this stream's state.
    pub fn derive(seed: u64, tag: u64) -> Rng {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(tag);
        Rng::new(base.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }

    /// Tensor of i.i.d. `N(mean, std^2)` samples.
    pub fn gaussian(&mut self, shape: &[usize], mean: f64, std: f64) -> Result<Tensor> {
        if !(std >= 0.0) {
            return Err(Error::invalid(format!(
                "standard deviation must be nonnegative, got {std}"
            )));
        }
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| mean + std * self.standard_normal()).collect();
        Tensor::new(shape.to_vec(), data)
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn uniform_tensor(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.uniform_range(lo, hi)).collect();
        Tensor::new(shape.to_vec(), data).expect("length matches shape")
    }
}
