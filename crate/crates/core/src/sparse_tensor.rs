//! Coordinate-format sparse order-3 tensors.
//!
//! Entries are kept sorted by `(i, j, k)` with no duplicates and no explicit
//! zeros, so two tensors holding the same cells compare equal.
//!
//! Unfolding follows Kolda & Bader: the mode-`n` matricization maps
//! `(i1, i2, i3)` to row `i_n`, and the remaining indices form the column with
//! the lower-numbered mode varying fastest. For mode 1 that is
//! `col = i2 + i3 * n2`.
//!
//! [`SparseTensor3::ttm`] contracts the chosen mode against the *rows* of the
//! matrix, so `ttm(X, M, n)` has `M.cols()` in mode `n`. In Kolda notation this
//! is `X ×ₙ Mᵀ`.

use serde::{Deserialize, Serialize};

use crate::dense::{DenseMatrix, DenseTensor3};
use crate::error::{Error, Result};
use crate::sum::{compensated_sum, CompensatedSum};

/// One of the three tensor modes (1-based in user-facing APIs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    First,
    Second,
    Third,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::First, Mode::Second, Mode::Third];

    /// Zero-based axis.
    #[inline]
    pub fn axis(self) -> usize {
        match self {
            Mode::First => 0,
            Mode::Second => 1,
            Mode::Third => 2,
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;

    fn try_from(mode: usize) -> Result<Self> {
        match mode {
            1 => Ok(Mode::First),
            2 => Ok(Mode::Second),
            3 => Ok(Mode::Third),
            other => Err(Error::InvalidMode(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry3 {
    pub index: [usize; 3],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTensor3 {
    shape: [usize; 3],
    entries: Vec<Entry3>,
}

/// Sparse matrix in coordinate form, as produced by [`SparseTensor3::matricize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m.set(r, c, m.get(r, c) + v);
        }
        m
    }
}

impl SparseTensor3 {
    pub fn empty(shape: [usize; 3]) -> Self {
        Self {
            shape,
            entries: Vec::new(),
        }
    }

    /// Builds a tensor from possibly repeated coordinates. Repeats are summed,
    /// zeros are dropped, and negative or non-finite values are rejected.
    pub fn from_triplets<I>(shape: [usize; 3], triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        let mut raw: Vec<Entry3> = Vec::new();
        for (i, j, k, v) in triplets {
            if i >= shape[0] || j >= shape[1] || k >= shape[2] {
                return Err(Error::InvalidEntry(format!(
                    "index ({i}, {j}, {k}) out of bounds for shape {shape:?}"
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry(format!(
                    "value {v} at ({i}, {j}, {k}) is not a finite non-negative number"
                )));
            }
            raw.push(Entry3 {
                index: [i, j, k],
                value: v,
            });
        }
        raw.sort_by_key(|e| e.index);
        let mut entries: Vec<Entry3> = Vec::with_capacity(raw.len());
        for e in raw {
            match entries.last_mut() {
                Some(last) if last.index == e.index => last.value += e.value,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.value > 0.0);
        Ok(Self { shape, entries })
    }

    pub fn from_dense(t: &DenseTensor3) -> Self {
        let [d1, d2, d3] = t.shape();
        let mut entries = Vec::new();
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..d3 {
                    let v = t.get(i, j, k);
                    if v > 0.0 {
                        entries.push(Entry3 {
                            index: [i, j, k],
                            value: v,
                        });
                    }
                }
            }
        }
        Self {
            shape: t.shape(),
            entries,
        }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    pub fn entries(&self) -> &[Entry3] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|e| e.value))
    }

    pub fn squared_norm(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|e| e.value * e.value))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// Returns a copy with every value multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        assert!(s > 0.0 && s.is_finite(), "scale must be positive and finite");
        Self {
            shape: self.shape,
            entries: self
                .entries
                .iter()
                .map(|e| Entry3 {
                    index: e.index,
                    value: e.value * s,
                })
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros(self.shape);
        for e in &self.entries {
            t.set(e.index[0], e.index[1], e.index[2], e.value);
        }
        t
    }

    pub fn matricize(&self, mode: Mode) -> SparseMatrix {
        let [n1, n2, _] = self.shape;
        let rows = self.shape[mode.axis()];
        let cols = self.shape.iter().product::<usize>() / rows.max(1);
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let [i, j, k] = e.index;
                match mode {
                    Mode::First => (i, j + k * n2, e.value),
                    Mode::Second => (j, i + k * n1, e.value),
                    Mode::Third => (k, i + j * n1, e.value),
                }
            })
            .collect();
        SparseMatrix {
            rows,
            cols: if rows == 0 { 0 } else { cols },
            entries,
        }
    }

    /// Contracts `mode` against the rows of `m` (see module docs).
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
        let mut acc = vec![CompensatedSum::new(); out_shape.iter().product()];
        let offset = |o: [usize; 3]| (o[0] * out_shape[1] + o[1]) * out_shape[2] + o[2];
        for e in &self.entries {
            for (c, &w) in m.row(e.index[axis]).iter().enumerate() {
                let mut o = e.index;
                o[axis] = c;
                acc[offset(o)].add(e.value * w);
            }
        }
        DenseTensor3::from_vec(out_shape, acc.iter().map(CompensatedSum::value).collect())
    }

    /// Sum of all stored values within relation slice `k` (third mode).
    pub fn slice_mass(&self, k: usize) -> f64 {
        compensated_sum(
            self.entries
                .iter()
                .filter(|e| e.index[2] == k)
                .map(|e| e.value),
        )
    }
}
