//! Coupled non-negative Tucker2 factorization of the three back-off tensors.
//!
//! The model shares one factor per noun-phrase role across the three tensors:
//!
//! ```text
//! X³ ≈ G³ ×₁ A ×₂ B    (subject × object × relation)
//! X² ≈ G² ×₁ A ×₂ C    (subject × other  × relation)
//! X¹ ≈ G¹ ×₁ B ×₂ C    (object  × other  × relation)
//! ```
//!
//! and minimises the summed squared reconstruction errors plus
//! `λa‖A‖² + λb‖B‖² + λc‖C‖²` with multiplicative updates. Each factor update
//! gathers the two tensors that involve it; the cores follow the usual
//! non-negative Tucker rule `G ← G * (X ×₁ Pᵀ ×₂ Qᵀ) / (G ×₁ PᵀP ×₂ QᵀQ)`.
//!
//! Factors are floored at `epsilon` after every update and all denominators
//! are clamped to at least `epsilon`. Cores are not floored, so a zero core
//! cell stays zero.

pub mod kernels;

mod init;

pub use init::{init_factors, init_factors_with, nndsvd_factor, nonneg_tucker2, truncated_svd, InitStrategy, Tucker2};

use serde::{Deserialize, Serialize};

use crate::corpus::BackoffTensors;
use crate::dense::{DenseMatrix, DenseTensor3};
use crate::error::{Error, Result};
use crate::sum::compensated_sum;

use kernels::{
    core_denominator, core_numerator, left_gram, left_numerator, multiplicative_step,
    residual_sq, right_gram, right_numerator,
};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_INIT_ITERS: usize = 50;

/// Latent category counts for subject, object and other noun phrases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ranks {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
}

impl Ranks {
    pub fn new(r1: usize, r2: usize, r3: usize) -> Self {
        Self { r1, r2, r3 }
    }

    /// Checks `1 ≤ rᵢ ≤ nᵢ` against the vocabulary sizes.
    pub fn validate(&self, n1: usize, n2: usize, n3: usize) -> Result<()> {
        for (mode, rank, dim) in [(1, self.r1, n1), (2, self.r2, n2), (3, self.r3, n3)] {
            if rank == 0 {
                return Err(Error::Config(format!("rank r{mode} must be at least 1")));
            }
            if rank > dim {
                return Err(Error::RankTooLarge { mode, rank, dim });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Regularizers {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
}

impl Regularizers {
    pub fn new(lambda_a: f64, lambda_b: f64, lambda_c: f64) -> Self {
        Self {
            lambda_a,
            lambda_b,
            lambda_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_a", self.lambda_a), ("lambda_b", self.lambda_b), ("lambda_c", self.lambda_c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// Shared factors `A, B, C` and the three cores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSet {
    /// Subject categories, `n1 × r1`.
    pub a: DenseMatrix,
    /// Object categories, `n2 × r2`.
    pub b: DenseMatrix,
    /// Other-argument categories, `n3 × r3`.
    pub c: DenseMatrix,
    /// `r2 × r3 × m`, pairs with `X¹`.
    pub g1: DenseTensor3,
    /// `r1 × r3 × m`, pairs with `X²`.
    pub g2: DenseTensor3,
    /// `r1 × r2 × m`, pairs with `X³`.
    pub g3: DenseTensor3,
}

impl FactorSet {
    pub fn ranks(&self) -> Ranks {
        Ranks::new(self.a.cols(), self.b.cols(), self.c.cols())
    }

    pub fn relations(&self) -> usize {
        self.g3.shape()[2]
    }

    /// Verifies internal consistency and agreement with the data shapes.
    pub fn check_shapes(&self, tensors: &BackoffTensors) -> Result<()> {
        let (n1, n2, n3, m) = tensors.vocab.sizes();
        self.check_dims(n1, n2, n3, m)
    }

    pub fn check_dims(&self, n1: usize, n2: usize, n3: usize, m: usize) -> Result<()> {
        let Ranks { r1, r2, r3 } = self.ranks();
        let got = [
            ("A", vec![self.a.rows(), self.a.cols()], vec![n1, r1]),
            ("B", vec![self.b.rows(), self.b.cols()], vec![n2, r2]),
            ("C", vec![self.c.rows(), self.c.cols()], vec![n3, r3]),
            ("G1", self.g1.shape().to_vec(), vec![r2, r3, m]),
            ("G2", self.g2.shape().to_vec(), vec![r1, r3, m]),
            ("G3", self.g3.shape().to_vec(), vec![r1, r2, m]),
        ];
        for (name, have, want) in got {
            if have != want {
                return Err(Error::Shape(format!("{name} has shape {have:?}, expected {want:?}")));
            }
        }
        Ok(())
    }

    /// The same model with every factor column rescaled to unit Euclidean
    /// norm and the scales moved into the cores. All-zero columns are kept.
    pub fn normalized(&self) -> FactorSet {
        fn unit(m: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
            let norms: Vec<f64> = (0..m.cols())
                .map(|j| compensated_sum(m.column(j).iter().map(|v| v * v)).sqrt())
                .collect();
            let scaled = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
                if norms[j] > 0.0 {
                    m.get(i, j) / norms[j]
                } else {
                    m.get(i, j)
                }
            });
            let scales = norms.into_iter().map(|n| if n > 0.0 { n } else { 1.0 }).collect();
            (scaled, scales)
        }
        fn rescale(g: &DenseTensor3, left: &[f64], right: &[f64]) -> DenseTensor3 {
            DenseTensor3::from_fn(g.shape(), |i, j, k| g.get(i, j, k) * left[i] * right[j])
        }
        let (a, sa) = unit(&self.a);
        let (b, sb) = unit(&self.b);
        let (c, sc) = unit(&self.c);
        FactorSet {
            g1: rescale(&self.g1, &sb, &sc),
            g2: rescale(&self.g2, &sa, &sc),
            g3: rescale(&self.g3, &sa, &sb),
            a,
            b,
            c,
        }
    }

    pub fn min_value(&self) -> f64 {
        [
            self.a.min_value(),
            self.b.min_value(),
            self.c.min_value(),
            self.g1.min_value(),
            self.g2.min_value(),
            self.g3.min_value(),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit1: f64,
    pub fit2: f64,
    pub fit3: f64,
    pub avg_fit: f64,
    pub objective: f64,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once a sweep lowers the objective by less than this fraction.
    pub tol: f64,
    pub seed: u64,
    pub epsilon: f64,
    /// Multiplicative iterations for each single-tensor initialisation.
    pub init_iters: usize,
    pub init: InitStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            init_iters: DEFAULT_INIT_ITERS,
            init: InitStrategy::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Squared residuals `(‖X¹−R¹‖², ‖X²−R²‖², ‖X³−R³‖²)`.
fn residuals(t: &BackoffTensors, f: &FactorSet) -> [f64; 3] {
    [
        residual_sq(&t.x1, &f.g1, &f.b, &f.c),
        residual_sq(&t.x2, &f.g2, &f.a, &f.c),
        residual_sq(&t.x3, &f.g3, &f.a, &f.b),
    ]
}

fn penalty(f: &FactorSet, reg: &Regularizers) -> f64 {
    reg.lambda_a * f.a.squared_norm() + reg.lambda_b * f.b.squared_norm() + reg.lambda_c * f.c.squared_norm()
}

/// Value of the coupled objective: three reconstruction errors plus the
/// Frobenius penalties on `A`, `B`, `C`.
pub fn objective(tensors: &BackoffTensors, f: &FactorSet, reg: &Regularizers) -> Result<f64> {
    f.check_shapes(tensors)?;
    let [e1, e2, e3] = residuals(tensors, f);
    Ok(e1 + e2 + e3 + penalty(f, reg))
}

/// FIT = 1 − ‖X − R‖ / ‖X‖ for each tensor and their mean.
pub fn fit_report(tensors: &BackoffTensors, f: &FactorSet, reg: &Regularizers) -> Result<FitReport> {
    report(tensors, f, reg, 0)
}

fn report(tensors: &BackoffTensors, f: &FactorSet, reg: &Regularizers, iterations_run: usize) -> Result<FitReport> {
    f.check_shapes(tensors)?;
    let res = residuals(tensors, f);
    let mut fits = [0.0; 3];
    for (idx, (x, name)) in [(&tensors.x1, "x1"), (&tensors.x2, "x2"), (&tensors.x3, "x3")].into_iter().enumerate() {
        let norm = x.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm(name));
        }
        fits[idx] = 1.0 - res[idx].sqrt() / norm;
    }
    Ok(FitReport {
        fit1: fits[0],
        fit2: fits[1],
        fit3: fits[2],
        avg_fit: (fits[0] + fits[1] + fits[2]) / 3.0,
        objective: res.iter().sum::<f64>() + penalty(f, reg),
        iterations_run,
    })
}

/// Multiplicative update for `A` from the mode-1 unfoldings of `X³` and `X²`.
pub fn update_a(t: &BackoffTensors, f: &FactorSet, reg: &Regularizers, eps: f64) -> Result<DenseMatrix> {
    f.check_shapes(t)?;
    let mut num = left_numerator(&t.x3, &f.g3, &f.b);
    num.add_assign(&left_numerator(&t.x2, &f.g2, &f.c))?;
    let mut gram = left_gram(&f.g3, &f.b.gram());
    gram.add_assign(&left_gram(&f.g2, &f.c.gram()))?;
    Ok(factor_step(&f.a, &num, &gram, reg.lambda_a, eps))
}

/// Multiplicative update for `B` from the mode-2 unfolding of `X³` and the
/// mode-1 unfolding of `X¹`.
pub fn update_b(t: &BackoffTensors, f: &FactorSet, reg: &Regularizers, eps: f64) -> Result<DenseMatrix> {
    f.check_shapes(t)?;
    let mut num = right_numerator(&t.x3, &f.g3, &f.a);
    num.add_assign(&left_numerator(&t.x1, &f.g1, &f.c))?;
    let mut gram = right_gram(&f.g3, &f.a.gram());
    gram.add_assign(&left_gram(&f.g1, &f.c.gram()))?;
    Ok(factor_step(&f.b, &num, &gram, reg.lambda_b, eps))
}

/// Multiplicative update for `C` from the mode-2 unfoldings of `X²` and `X¹`.
pub fn update_c(t: &BackoffTensors, f: &FactorSet, reg: &Regularizers, eps: f64) -> Result<DenseMatrix> {
    f.check_shapes(t)?;
    let mut num = right_numerator(&t.x2, &f.g2, &f.a);
    num.add_assign(&right_numerator(&t.x1, &f.g1, &f.b))?;
    let mut gram = right_gram(&f.g2, &f.a.gram());
    gram.add_assign(&right_gram(&f.g1, &f.b.gram()))?;
    Ok(factor_step(&f.c, &num, &gram, reg.lambda_c, eps))
}

/// `P ← P * num / (P·gram + λP)`, floored at `eps`.
fn factor_step(p: &DenseMatrix, num: &DenseMatrix, gram: &DenseMatrix, lambda: f64, eps: f64) -> DenseMatrix {
    let mut den = p.matmul(gram).expect("factor/Gram shapes agree");
    for (d, &v) in den.values_mut().iter_mut().zip(p.values()) {
        *d += lambda * v;
    }
    let mut out = p.clone();
    multiplicative_step(out.values_mut(), num.values(), den.values(), eps, true);
    out
}

fn core_step(x: &crate::sparse_tensor::SparseTensor3, g: &DenseTensor3, p: &DenseMatrix, q: &DenseMatrix, eps: f64) -> DenseTensor3 {
    let num = core_numerator(x, p, q);
    let den = core_denominator(g, &p.gram(), &q.gram());
    let mut out = g.clone();
    multiplicative_step(out.values_mut(), num.values(), den.values(), eps, false);
    out
}

/// Updates `(G¹, G², G³)` with the factors held fixed.
pub fn update_cores(t: &BackoffTensors, f: &FactorSet, eps: f64) -> Result<(DenseTensor3, DenseTensor3, DenseTensor3)> {
    f.check_shapes(t)?;
    Ok((
        core_step(&t.x1, &f.g1, &f.b, &f.c, eps),
        core_step(&t.x2, &f.g2, &f.a, &f.c, eps),
        core_step(&t.x3, &f.g3, &f.a, &f.b, eps),
    ))
}

/// Stateful driver applying the updates in place; one [`sweep`](Self::sweep)
/// runs A, B, C, then the cores.
#[derive(Debug, Clone)]
pub struct CoupledSolver<'a> {
    tensors: &'a BackoffTensors,
    reg: Regularizers,
    epsilon: f64,
    factors: FactorSet,
}

impl<'a> CoupledSolver<'a> {
    pub fn new(tensors: &'a BackoffTensors, factors: FactorSet, reg: Regularizers, epsilon: f64) -> Result<Self> {
        factors.check_shapes(tensors)?;
        reg.validate()?;
        if !(epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(Self {
            tensors,
            reg,
            epsilon,
            factors,
        })
    }

    pub fn factors(&self) -> &FactorSet {
        &self.factors
    }

    pub fn into_factors(self) -> FactorSet {
        self.factors
    }

    pub fn step_a(&mut self) -> Result<()> {
        self.factors.a = update_a(self.tensors, &self.factors, &self.reg, self.epsilon)?;
        Ok(())
    }

    pub fn step_b(&mut self) -> Result<()> {
        self.factors.b = update_b(self.tensors, &self.factors, &self.reg, self.epsilon)?;
        Ok(())
    }

    pub fn step_c(&mut self) -> Result<()> {
        self.factors.c = update_c(self.tensors, &self.factors, &self.reg, self.epsilon)?;
        Ok(())
    }

    pub fn step_cores(&mut self) -> Result<()> {
        let (g1, g2, g3) = update_cores(self.tensors, &self.factors, self.epsilon)?;
        self.factors.g1 = g1;
        self.factors.g2 = g2;
        self.factors.g3 = g3;
        Ok(())
    }

    pub fn sweep(&mut self) -> Result<()> {
        self.step_a()?;
        self.step_b()?;
        self.step_c()?;
        self.step_cores()
    }

    pub fn objective(&self) -> f64 {
        let [e1, e2, e3] = residuals(self.tensors, &self.factors);
        e1 + e2 + e3 + penalty(&self.factors, &self.reg)
    }
}

/// Initialises from single-tensor decompositions, then sweeps until
/// `max_iters` or until the relative objective decrease drops below `tol`.
pub fn factorize(
    tensors: &BackoffTensors,
    ranks: Ranks,
    reg: Regularizers,
    opts: &SolverOptions,
) -> Result<(FactorSet, FitReport)> {
    opts.validate()?;
    reg.validate()?;
    let init = init_factors_with(tensors, ranks, opts.seed, opts.init, opts.init_iters, opts.epsilon)?;
    factorize_from(tensors, init, reg, opts)
}

/// Like [`factorize`] but starting from a caller-supplied factor set.
pub fn factorize_from(
    tensors: &BackoffTensors,
    init: FactorSet,
    reg: Regularizers,
    opts: &SolverOptions,
) -> Result<(FactorSet, FitReport)> {
    opts.validate()?;
    let mut solver = CoupledSolver::new(tensors, init, reg, opts.epsilon)?;
    let mut prev = solver.objective();
    if !prev.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        solver.sweep()?;
        iterations = it;
        let obj = solver.objective();
        if !obj.is_finite() {
            return Err(Error::NonFinite { iteration: it });
        }
        let converged = prev <= 0.0 || (prev - obj) / prev < opts.tol;
        prev = obj;
        if converged {
            break;
        }
    }
    let f = solver.into_factors();
    let rep = report(tensors, &f, &reg, iterations)?;
    Ok((f, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::sparse_tensor::SparseTensor3;

    fn vocab(n1: usize, n2: usize, n3: usize, m: usize) -> Vocabulary {
        let mut v = Vocabulary::default();
        (0..n1).for_each(|i| {
            v.subjects.insert(format!("s{i}"));
        });
        (0..n2).for_each(|i| {
            v.objects.insert(format!("o{i}"));
        });
        (0..n3).for_each(|i| {
            v.others.insert(format!("x{i}"));
        });
        (0..m).for_each(|i| {
            v.relations.insert(format!("r{i}"));
        });
        v
    }

    fn scalar_instance(x: f64) -> BackoffTensors {
        let t = || SparseTensor3::from_triplets([1, 1, 1], [(0, 0, 0, x)]).unwrap();
        BackoffTensors::new(t(), t(), t(), vocab(1, 1, 1, 1)).unwrap()
    }

    fn scalar_factors(a: f64, b: f64, c: f64, g: f64) -> FactorSet {
        let m = |v| DenseMatrix::from_vec(1, 1, vec![v]).unwrap();
        let t = |v| DenseTensor3::from_vec([1, 1, 1], vec![v]).unwrap();
        FactorSet {
            a: m(a),
            b: m(b),
            c: m(c),
            g1: t(g),
            g2: t(g),
            g3: t(g),
        }
    }

    #[test]
    fn scalar_fixed_points() {
        // X = g·a·b with a = b = c = 1, g = 2: every ratio is exactly one.
        let t = scalar_instance(2.0);
        let f = scalar_factors(1.0, 1.0, 1.0, 2.0);
        let reg = Regularizers::default();
        for new in [
            update_a(&t, &f, &reg, DEFAULT_EPSILON).unwrap(),
            update_b(&t, &f, &reg, DEFAULT_EPSILON).unwrap(),
            update_c(&t, &f, &reg, DEFAULT_EPSILON).unwrap(),
        ] {
            assert!((new.get(0, 0) - 1.0).abs() < 1e-12);
        }
        let (g1, g2, g3) = update_cores(&t, &f, DEFAULT_EPSILON).unwrap();
        for g in [g1, g2, g3] {
            assert!((g.get(0, 0, 0) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cores_stay_zero() {
        let t = scalar_instance(3.0);
        let f = scalar_factors(0.5, 0.5, 0.5, 0.0);
        let (g1, g2, g3) = update_cores(&t, &f, DEFAULT_EPSILON).unwrap();
        assert_eq!([g1.get(0, 0, 0), g2.get(0, 0, 0), g3.get(0, 0, 0)], [0.0; 3]);
    }

    #[test]
    fn zero_factors_objective_is_total_squared_norm() {
        let t = scalar_instance(3.0);
        let f = scalar_factors(0.0, 0.0, 0.0, 0.0);
        assert_eq!(objective(&t, &f, &Regularizers::default()).unwrap(), 27.0);
        let rep = fit_report(&t, &f, &Regularizers::default()).unwrap();
        assert_eq!((rep.fit1, rep.fit2, rep.fit3, rep.avg_fit), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_factors_keep_dense_core() {
        let x3 = SparseTensor3::from_triplets([2, 2, 1], [(0, 0, 0, 3.0), (1, 1, 0, 5.0), (0, 1, 0, 1.0)]).unwrap();
        let x = SparseTensor3::from_triplets([2, 2, 1], [(0, 0, 0, 1.0)]).unwrap();
        let t = BackoffTensors::new(x.clone(), x, x3.clone(), vocab(2, 2, 2, 1)).unwrap();
        let f = FactorSet {
            a: DenseMatrix::identity(2),
            b: DenseMatrix::identity(2),
            c: DenseMatrix::identity(2),
            g1: DenseTensor3::zeros([2, 2, 1]),
            g2: DenseTensor3::zeros([2, 2, 1]),
            g3: x3.to_dense(),
        };
        let (_, _, g3) = update_cores(&t, &f, DEFAULT_EPSILON).unwrap();
        assert_eq!(g3, x3.to_dense());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let t = scalar_instance(1.0);
        let mut f = scalar_factors(1.0, 1.0, 1.0, 1.0);
        f.a = DenseMatrix::zeros(2, 1);
        assert!(matches!(objective(&t, &f, &Regularizers::default()), Err(Error::Shape(_))));
        assert!(update_a(&t, &f, &Regularizers::default(), 1e-12).is_err());
    }

    #[test]
    fn zero_norm_fit_is_error() {
        let z = SparseTensor3::empty([1, 1, 1]);
        let t = BackoffTensors::new(z.clone(), z.clone(), z, vocab(1, 1, 1, 1)).unwrap();
        let f = scalar_factors(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(fit_report(&t, &f, &Regularizers::default()), Err(Error::ZeroNorm("x1"))));
    }

    #[test]
    fn ranks_and_regularizers_validation() {
        assert!(Ranks::new(2, 2, 2).validate(2, 3, 4).is_ok());
        assert!(matches!(Ranks::new(3, 1, 1).validate(2, 3, 4), Err(Error::RankTooLarge { mode: 1, .. })));
        assert!(Ranks::new(0, 1, 1).validate(2, 3, 4).is_err());
        assert!(Regularizers::new(0.1, -0.1, 0.0).validate().is_err());
        assert!(Regularizers::new(0.3, 0.1, 0.7).validate().is_ok());
    }
}
