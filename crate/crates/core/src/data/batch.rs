use log::warn;

use crate::rng::Rng;

/// Index batches for one epoch: a seeded permutation (or the natural order)
/// cut into chunks of `batch_size`; the last batch may be short.
pub fn epoch_batches(n: usize, batch_size: usize, rng: Option<&mut Rng>) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    if batch_size > n {
        warn!("batch size {batch_size} exceeds dataset size {n}; using one batch of {n}");
    }
    let order = match rng {
        Some(rng) => rng.permutation(n),
        None => (0..n).collect(),
    };
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Endless epoch-by-epoch batch stream over `n` samples.
pub struct BatchIterator {
    n: usize,
    batch_size: usize,
    shuffle: bool,
    rng: Rng,
    pending: std::vec::IntoIter<Vec<usize>>,
    epoch: usize,
}

impl BatchIterator {
    pub fn new(n: usize, batch_size: usize, rng: Rng, shuffle: bool) -> Self {
        BatchIterator {
            n,
            batch_size,
            shuffle,
            rng,
            pending: Vec::new().into_iter(),
            epoch: 0,
        }
    }

    /// Number of epochs started so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// All batches of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        self.epoch += 1;
        let rng = self.shuffle.then_some(&mut self.rng);
        epoch_batches(self.n, self.batch_size, rng)
    }
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.n == 0 {
            return None;
        }
        if let Some(b) = self.pending.next() {
            return Some(b);
        }
        self.pending = self.next_epoch().into_iter();
        self.pending.next()
    }
}
