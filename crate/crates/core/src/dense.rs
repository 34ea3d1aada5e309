//! Small dense matrices and order-3 tensors, row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse_tensor::Mode;
use crate::sum::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::from_vec(raw.rows, raw.cols, raw.values)
    }
}

impl DenseMatrix {
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

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEntry("matrix values must be finite".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.values[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &l) in lhs_row.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                for (o, &r) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += l * r;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                if r[a] == 0.0 {
                    continue;
                }
                for b in 0..self.cols {
                    out.values[a * self.cols + b] += r[a] * r[b];
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, rhs: &DenseMatrix) -> Result<()> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }
}

/// Dense order-3 tensor; value `(i, j, k)` lives at `(i * d2 + j) * d3 + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct DenseTensor3 {
    shape: [usize; 3],
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    shape: [usize; 3],
    values: Vec<f64>,
}

impl TryFrom<RawTensor> for DenseTensor3 {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        DenseTensor3::from_vec(raw.shape, raw.values)
    }
}

impl DenseTensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Shape(format!(
                "{shape:?} tensor needs {n} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEntry("tensor values must be finite".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    values.push(f(i, j, k));
                }
            }
        }
        Self { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.values[o] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.values[o] += v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The `d1 × d2` matrix at third index `k` (one relation slice of a core).
    pub fn frontal_slice(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.shape[0], self.shape[1], |i, j| self.get(i, j, k))
    }

    pub fn set_frontal_slice(&mut self, k: usize, slice: &DenseMatrix) {
        debug_assert_eq!((slice.rows(), slice.cols()), (self.shape[0], self.shape[1]));
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                self.set(i, j, k, slice.get(i, j));
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn inner(&self, other: &DenseTensor3) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "inner product of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(compensated_sum(
            self.values.iter().zip(&other.values).map(|(a, b)| a * b),
        ))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Contracts `mode` against the rows of `m`; the result's `mode`
    /// dimension becomes `m.cols()`. Same orientation as
    /// [`SparseTensor3::ttm`](crate::sparse_tensor::SparseTensor3::ttm).
    pub fn ttm(&self, m: &DenseMatrix, mode: Mode) -> Result<DenseTensor3> {
        let axis = mode.axis();
        if m.rows() != self.shape[axis] {
            return Err(Error::Shape(format!(
                "ttm along mode {}: tensor dimension {} but matrix has {} rows",
                axis + 1,
                self.shape[axis],
                m.rows()
            )));
        }
        let mut out_shape = self.shape;
        out_shape[axis] = m.cols();
        let mut out = DenseTensor3::zeros(out_shape);
        let mut carry = vec![CompensatedSum::new(); out.values.len()];
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                for k in 0..self.shape[2] {
                    let v = self.get(i, j, k);
                    if v == 0.0 {
                        continue;
                    }
                    let idx = [i, j, k];
                    let row = m.row(idx[axis]);
                    for (c, &w) in row.iter().enumerate() {
                        let mut o = idx;
                        o[axis] = c;
                        carry[out.offset(o[0], o[1], o[2])].add(v * w);
                    }
                }
            }
        }
        for (slot, acc) in out.values.iter_mut().zip(&carry) {
            *slot = acc.value();
        }
        Ok(out)
    }
}
