//! Dense row-major matrices, pairwise distances, log-sum-exp and a seedable RNG.
//!
//! Everything is `f64`. Matrix products parallelise over output rows only, so
//! every entry is produced by the same sequential inner loop regardless of
//! thread count and results are bit-reproducible.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Products below this many multiply-adds run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries(self.values.chunks(self.cols.max(1)))
            .finish()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl Matrix {
    /// Builds a matrix from row-major values, rejecting bad lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    left: (i, cols),
                    right: (i, r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Wraps values without the finiteness check; used for intermediate results.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Self, s: f64) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_raw(self.rows, self.cols, values))
    }

    /// Adds `v` to every row.
    pub fn add_row_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "add_row_vector",
                left: self.shape(),
                right: (1, v.len()),
            });
        }
        for row in self.values.chunks_exact_mut(self.cols.max(1)) {
            for (a, b) in row.iter_mut().zip(v) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Squared Euclidean norm of each row.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        self.row_iter().map(|r| dot(r, r)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = &self.values[i * k..(i + 1) * k];
            for (p, &a_ip) in a.iter().enumerate() {
                let b = &other.values[p * m..(p + 1) * m];
                for (o, &b_pj) in out_row.iter_mut().zip(b) {
                    *o += a_ip * b_pj;
                }
            }
        };
        if m == 0 {
            return Ok(Self::from_raw(n, m, out));
        }
        if n * k * m >= PAR_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(Self::from_raw(n, m, out))
    }

    /// `self * other^T`, i.e. entry (i, j) is the dot product of row i with row j of `other`.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, m) = (self.rows, other.rows);
        let mut out = vec![0.0; n * m];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        };
        if m == 0 {
            return Ok(Self::from_raw(n, m, out));
        }
        if n * m * self.cols >= PAR_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(Self::from_raw(n, m, out))
    }

    /// `self^T * other`
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul_tn",
                left: self.shape(),
                right: other.shape(),
            });
        }
        self.transpose().matmul(other)
    }
}

/// Squared Euclidean distances between every row of `a` and every row of `b`.
///
/// Uses `|a|^2 + |b|^2 - 2 a.b`, clamping small negative round-off to zero.
/// Norms and dot products share one summation routine, so `pairwise_sq_dists(a, a)`
/// has exact zeros on its diagonal.
pub fn pairwise_sq_dists(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op: "pairwise_sq_dists",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let na = a.row_sq_norms();
    let nb = b.row_sq_norms();
    let mut d = a.matmul_nt(b)?;
    let m = b.rows();
    if m > 0 {
        for (i, row) in d.values.chunks_exact_mut(m).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (na[i] + nb[j] - 2.0 * *v).max(0.0);
            }
        }
    }
    Ok(d)
}

/// Neumaier-compensated sum; error stays near one rounding of the result
/// instead of growing with the number of terms.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `log(sum(exp(v)))` shifted by the maximum.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    let max = v
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        })
        .ok_or(Error::Empty("log_sum_exp input"))?;
    if !max.is_finite() {
        return Ok(max);
    }
    let s: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + s.ln())
}

/// Seeded ChaCha8 generator. The same `(seed, stream)` pair yields the same
/// sequence on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream derived from a master seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// `n x d` matrix of i.i.d. `N(mean, std^2)` draws.
pub fn normal_draws(rng: &mut Rng, n: usize, d: usize, mean: f64, std: f64) -> Result<Matrix> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::invalid(
            "std",
            format!("must be positive and finite, got {std}"),
        ));
    }
    if !mean.is_finite() {
        return Err(Error::invalid(
            "mean",
            format!("must be finite, got {mean}"),
        ));
    }
    let values = (0..n * d)
        .map(|_| mean + std * rng.standard_normal())
        .collect();
    Ok(Matrix::from_raw(n, d, values))
}

/// `n x d` matrix of i.i.d. uniform draws on `[lo, hi)`.
pub fn uniform_draws(rng: &mut Rng, n: usize, d: usize, lo: f64, hi: f64) -> Result<Matrix> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(
            "uniform range",
            format!("[{lo}, {hi}) is empty or non-finite"),
        ));
    }
    let values = (0..n * d).map(|_| rng.uniform_range(lo, hi)).collect();
    Ok(Matrix::from_raw(n, d, values))
}
