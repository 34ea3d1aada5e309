//! Initialisation from independent single-tensor decompositions.
//!
//! Each back-off tensor gets its own non-negative Tucker2 decomposition; the
//! two candidates for every shared factor are averaged and each core is taken
//! from its own decomposition. The single-tensor runs start either from a
//! non-negative SVD-based guess of each unfolding ([`InitStrategy::Svd`]) or
//! from uniform random entries ([`InitStrategy::Uniform`]).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{
    core_denominator, core_numerator, left_gram, left_numerator, multiplicative_step, right_gram,
    right_numerator,
};
use super::{FactorSet, Ranks, DEFAULT_EPSILON, DEFAULT_INIT_ITERS};
use crate::corpus::BackoffTensors;
use crate::dense::{DenseMatrix, DenseTensor3};
use crate::error::{Error, Result};
use crate::sparse_tensor::{Mode, SparseMatrix, SparseTensor3};

/// Extra sketch columns and subspace iterations of the truncated SVD.
const SKETCH_OVERSAMPLE: usize = 10;
const SKETCH_POWER_ITERS: usize = 8;
/// Core-only sweeps that fit the all-ones starting core to SVD factors.
const CORE_WARMUP: usize = 10;

/// How each single-tensor decomposition is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Factors from the leading singular vectors of each unfolding, keeping
    /// the dominant sign part of every vector; entries that come out zero are
    /// set to the column mean.
    #[default]
    Svd,
    /// Every factor and core entry uniform on `(0, 1]`.
    Uniform,
}

/// Result of a single-tensor non-negative Tucker2 decomposition
/// `X ≈ core ×₁ left ×₂ right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tucker2 {
    pub left: DenseMatrix,
    pub right: DenseMatrix,
    pub core: DenseTensor3,
}

fn uniform_positive(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

fn sparse_times(u: &SparseMatrix, d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.rows, d.ncols());
    for &(r, c, v) in &u.entries {
        for k in 0..d.ncols() {
            out[(r, k)] += v * d[(c, k)];
        }
    }
    out
}

fn sparse_t_times(u: &SparseMatrix, d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.cols, d.ncols());
    for &(r, c, v) in &u.entries {
        for k in 0..d.ncols() {
            out[(c, k)] += v * d[(r, k)];
        }
    }
    out
}

fn orthonormal(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Leading singular triples `(σ, u, v)` of `u`, largest first, by seeded
/// randomised subspace iteration. At most `min(rows, cols)` triples.
pub fn truncated_svd(u: &SparseMatrix, r: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let k = (r + SKETCH_OVERSAMPLE).min(u.rows).min(u.cols);
    if k == 0 {
        return Vec::new();
    }
    let omega = DMatrix::from_fn(u.cols, k, |_, _| rng.random::<f64>() - 0.5);
    let mut q = orthonormal(sparse_times(u, &omega));
    for _ in 0..SKETCH_POWER_ITERS {
        let z = orthonormal(sparse_t_times(u, &q));
        q = orthonormal(sparse_times(u, &z));
    }
    // B = Qᵀ U, small k × cols; its left singular vectors from B Bᵀ.
    let bt = sparse_t_times(u, &q);
    let bbt = bt.transpose() * &bt;
    let eig = SymmetricEigen::new(bbt);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    order
        .into_iter()
        .take(r)
        .filter_map(|idx| {
            let sigma = eig.eigenvalues[idx].max(0.0).sqrt();
            if sigma <= 0.0 {
                return None;
            }
            let w = eig.eigenvectors.column(idx);
            let left = &q * w;
            let right = (&bt * w) / sigma;
            Some((sigma, left.iter().copied().collect(), right.iter().copied().collect()))
        })
        .collect()
}

/// Non-negative `rows × r` factor from the leading singular triples of `u`:
/// each column is the positive or negative part of a left singular vector,
/// whichever carries more of the triple, scaled by `√(σ · mass)`. Zero
/// entries take the column mean; missing columns are set to `floor`.
pub fn nndsvd_factor(u: &SparseMatrix, r: usize, floor: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut out = DenseMatrix::from_fn(u.rows, r, |_, _| floor);
    let part_norm = |v: &[f64], sign: f64| v.iter().map(|x| (sign * x).max(0.0).powi(2)).sum::<f64>().sqrt();
    for (j, (sigma, left, right)) in truncated_svd(u, r, rng).into_iter().enumerate() {
        let pos = part_norm(&left, 1.0) * part_norm(&right, 1.0);
        let neg = part_norm(&left, -1.0) * part_norm(&right, -1.0);
        let (sign, mass) = if pos >= neg { (1.0, pos) } else { (-1.0, neg) };
        let norm = part_norm(&left, sign);
        if norm <= 0.0 {
            continue;
        }
        let scale = (sigma * mass).sqrt() / norm;
        let col: Vec<f64> = left.iter().map(|&x| (sign * x).max(0.0) * scale).collect();
        let fill = (col.iter().sum::<f64>() / col.len() as f64).max(floor);
        for (i, &v) in col.iter().enumerate() {
            out.set(i, j, if v > floor { v } else { fill });
        }
    }
    out
}

/// Non-negative Tucker2 of one tensor by `iters` multiplicative sweeps
/// (left, right, core) from the chosen start.
pub fn nonneg_tucker2(
    x: &SparseTensor3,
    r_left: usize,
    r_right: usize,
    iters: usize,
    eps: f64,
    strategy: InitStrategy,
    rng: &mut ChaCha8Rng,
) -> Result<Tucker2> {
    let [n_a, n_b, m] = x.shape();
    for (mode, rank, dim) in [(1, r_left, n_a), (2, r_right, n_b)] {
        if rank == 0 || rank > dim {
            return Err(Error::RankTooLarge { mode, rank, dim });
        }
    }
    let (mut left, mut right, mut core) = match strategy {
        InitStrategy::Uniform => (
            DenseMatrix::from_fn(n_a, r_left, |_, _| uniform_positive(rng)),
            DenseMatrix::from_fn(n_b, r_right, |_, _| uniform_positive(rng)),
            DenseTensor3::from_fn([r_left, r_right, m], |_, _, _| uniform_positive(rng)),
        ),
        InitStrategy::Svd => {
            let left = nndsvd_factor(&x.matricize(Mode::First), r_left, eps, rng);
            let right = nndsvd_factor(&x.matricize(Mode::Second), r_right, eps, rng);
            let mut core = DenseTensor3::from_fn([r_left, r_right, m], |_, _, _| 1.0);
            for _ in 0..CORE_WARMUP {
                let num = core_numerator(x, &left, &right);
                let den = core_denominator(&core, &left.gram(), &right.gram());
                multiplicative_step(core.values_mut(), num.values(), den.values(), eps, false);
            }
            (left, right, core)
        }
    };

    for _ in 0..iters {
        let num = left_numerator(x, &core, &right);
        let den = left.matmul(&left_gram(&core, &right.gram()))?;
        multiplicative_step(left.values_mut(), num.values(), den.values(), eps, true);

        let num = right_numerator(x, &core, &left);
        let den = right.matmul(&right_gram(&core, &left.gram()))?;
        multiplicative_step(right.values_mut(), num.values(), den.values(), eps, true);

        let num = core_numerator(x, &left, &right);
        let den = core_denominator(&core, &left.gram(), &right.gram());
        multiplicative_step(core.values_mut(), num.values(), den.values(), eps, false);
    }
    Ok(Tucker2 { left, right, core })
}

/// [`init_factors_with`] using the default start, iteration budget and floor.
pub fn init_factors(tensors: &BackoffTensors, ranks: Ranks, seed: u64) -> Result<FactorSet> {
    init_factors_with(tensors, ranks, seed, InitStrategy::default(), DEFAULT_INIT_ITERS, DEFAULT_EPSILON)
}

/// Decomposes `X³`, `X²`, `X¹` separately (in that order, from one seeded
/// stream), averages the two candidates obtained for each shared factor, and
/// takes each core from its own decomposition.
pub fn init_factors_with(
    tensors: &BackoffTensors,
    ranks: Ranks,
    seed: u64,
    strategy: InitStrategy,
    iters: usize,
    eps: f64,
) -> Result<FactorSet> {
    let (n1, n2, n3, _) = tensors.vocab.sizes();
    ranks.validate(n1, n2, n3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d3 = nonneg_tucker2(&tensors.x3, ranks.r1, ranks.r2, iters, eps, strategy, &mut rng)?;
    let d2 = nonneg_tucker2(&tensors.x2, ranks.r1, ranks.r3, iters, eps, strategy, &mut rng)?;
    let d1 = nonneg_tucker2(&tensors.x1, ranks.r2, ranks.r3, iters, eps, strategy, &mut rng)?;
    Ok(FactorSet {
        a: mean(&d3.left, &d2.left),
        b: mean(&d3.right, &d1.left),
        c: mean(&d2.right, &d1.right),
        g1: d1.core,
        g2: d2.core,
        g3: d3.core,
    })
}

fn mean(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| 0.5 * (x.get(i, j) + y.get(i, j)))
}
