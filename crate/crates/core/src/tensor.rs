//! Dense row-major `f64` tensors and the handful of reductions the rest of
//! the crate needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense multidimensional array of `f64`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!(
                    "shape {:?} holds {} values but {} were given",
                    shape,
                    expected,
                    data.len()
                ),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a `rows.len() x cols` matrix; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(
                    "Tensor::from_rows",
                    format!("row {r} has {} values, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Extent of the leading axis (the batch axis for activations).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of values per leading-axis entry.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape, shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Copies the given leading-axis entries into a new tensor, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Tensor {
        let n = self.row_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        if shape.is_empty() {
            shape.push(indices.len());
        } else {
            shape[0] = indices.len();
        }
        Tensor { shape, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.check_same_shape("add_assign", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        self.check_same_shape("axpy", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.matrix_dims("transpose")?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::new(vec![n, m], out)
    }

    fn matrix_dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [m, n] => Ok((*m, *n)),
            s => Err(Error::shape(op, format!("expected a matrix, got shape {s:?}"))),
        }
    }

    fn check_same_shape(&self, op: &'static str, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(())
    }
}

/// Standard matrix product of an `m x k` and a `k x n` matrix.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.matrix_dims("matmul")?;
    let (k2, n) = b.matrix_dims("matmul")?;
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("left is {m}x{k}, right is {k2}x{n}"),
        ));
    }
    let mut out = vec![0.0; m * n];
    gemm(&a.data, &b.data, &mut out, m, k, n);
    Tensor::new(vec![m, n], out)
}

/// `out[m x n] += a[m x k] * b[k x n]`, all row-major slices.
///
/// The i-k-j loop order keeps the inner loop contiguous; summation order is
/// fixed so results are reproducible.
pub(crate) fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m x n] += a[m x k] * b[n x k]^T`
pub(crate) fn gemm_bt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            out[i * n + j] += acc;
        }
    }
}

/// `out[k x n] += a[m x k]^T * b[m x n]`
pub(crate) fn gemm_at(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

fn normalized_weights(t: &Tensor, weights: Option<&Tensor>) -> Result<Option<Vec<f64>>> {
    let Some(w) = weights else {
        if t.is_empty() {
            return Err(Error::invalid("reduction over an empty tensor"));
        }
        return Ok(None);
    };
    if w.len() != t.len() {
        return Err(Error::shape(
            "weighted reduction",
            format!("{} values but {} weights", t.len(), w.len()),
        ));
    }
    if w.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = w.data().iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights are all zero"));
    }
    Ok(Some(w.data().iter().map(|v| v / total).collect()))
}

/// Mean of all values, optionally weighted (weights are normalized to sum 1).
pub fn reduce_mean(t: &Tensor, weights: Option<&Tensor>) -> Result<f64> {
    Ok(match normalized_weights(t, weights)? {
        None => t.data().iter().sum::<f64>() / t.len() as f64,
        Some(w) => t.data().iter().zip(&w).map(|(v, w)| v * w).sum(),
    })
}

/// Population variance, optionally weighted, computed in two passes.
pub fn reduce_var(t: &Tensor, weights: Option<&Tensor>) -> Result<f64> {
    let w = normalized_weights(t, weights)?;
    let mean = match &w {
        None => t.data().iter().sum::<f64>() / t.len() as f64,
        Some(w) => t.data().iter().zip(w).map(|(v, w)| v * w).sum(),
    };
    Ok(match &w {
        None => t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64,
        Some(w) => t
            .data()
            .iter()
            .zip(w)
            .map(|(v, w)| w * (v - mean).powi(2))
            .sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.data()[i * k + p] * b.data()[p * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn identity_product() {
        let i2 = Tensor::identity(2);
        assert_eq!(matmul(&i2, &i2).unwrap(), i2);
    }

    #[test]
    fn small_product_by_hand() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut rng = Rng::new(11);
        let a = rng.gaussian(&[5, 7], 0.0, 1.0).unwrap();
        let b = rng.gaussian(&[7, 3], 0.0, 1.0).unwrap();
        let c = matmul(&a, &b).unwrap();
        for (x, y) in c.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_kernels_agree_with_matmul() {
        let mut rng = Rng::new(3);
        let a = rng.gaussian(&[4, 6], 0.0, 1.0).unwrap();
        let b = rng.gaussian(&[5, 6], 0.0, 1.0).unwrap();
        let mut out = vec![0.0; 20];
        gemm_bt(a.data(), b.data(), &mut out, 4, 6, 5);
        let expect = matmul(&a, &b.transpose().unwrap()).unwrap();
        for (x, y) in out.iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let c = rng.gaussian(&[4, 5], 0.0, 1.0).unwrap();
        let mut out = vec![0.0; 30];
        gemm_at(a.data(), c.data(), &mut out, 4, 6, 5);
        let expect = matmul(&a.transpose().unwrap(), &c).unwrap();
        for (x, y) in out.iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatch_names_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn mean_and_variance() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(reduce_mean(&t, None).unwrap(), 2.0);
        let c = Tensor::filled(&[3], 4.25);
        assert_eq!(reduce_var(&c, None).unwrap(), 0.0);
        let t = Tensor::new(vec![2], vec![0.0, 2.0]).unwrap();
        let w = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        assert!((reduce_var(&t, Some(&w)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_rejected() {
        let t = Tensor::new(vec![2], vec![0.0, 2.0]).unwrap();
        let w = Tensor::zeros(&[2]);
        assert!(reduce_mean(&t, Some(&w)).is_err());
        assert!(reduce_var(&t, Some(&w)).is_err());
    }

    proptest! {
        #[test]
        fn matmul_is_associative(seed in any::<u64>(), m in 1usize..6, k in 1usize..6, n in 1usize..6, p in 1usize..6) {
            let mut rng = Rng::new(seed);
            let a = rng.gaussian(&[m, k], 0.0, 1.0).unwrap();
            let b = rng.gaussian(&[k, n], 0.0, 1.0).unwrap();
            let c = rng.gaussian(&[n, p], 0.0, 1.0).unwrap();
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.data().iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn equal_weights_match_unweighted(values in proptest::collection::vec(-1e3f64..1e3, 1..50), w in 0.1f64..10.0) {
            let t = Tensor::new(vec![values.len()], values.clone()).unwrap();
            let weights = Tensor::filled(&[values.len()], w);
            let a = reduce_var(&t, None).unwrap();
            let b = reduce_var(&t, Some(&weights)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
