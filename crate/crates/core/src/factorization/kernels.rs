//! Sparse contractions for one Tucker2 term `X ≈ G ×₁ P ×₂ Q` (identity on
//! the relation mode), with `X: n_a × n_b × m`, `P: n_a × r_a`,
//! `Q: n_b × r_b` and `G: r_a × r_b × m`.
//!
//! Only stored entries of `X` are visited; everything else is expressed in
//! the small `r × r` Gram matrices.

use crate::dense::{DenseMatrix, DenseTensor3};
use crate::sparse_tensor::SparseTensor3;
use crate::sum::CompensatedSum;

/// Above this many cells, residuals switch from a per-slice dense evaluation
/// to the `‖X‖² − 2⟨X,R⟩ + ‖R‖²` expansion.
pub const DIRECT_RESIDUAL_LIMIT: usize = 1 << 22;

/// `X₍₁₎ · ((G ×₂ Q)₍₁₎)ᵀ`, shape `n_a × r_a`.
pub fn left_numerator(x: &SparseTensor3, core: &DenseTensor3, right: &DenseMatrix) -> DenseMatrix {
    let [r_a, r_b, _] = core.shape();
    let mut out = DenseMatrix::zeros(x.shape()[0], r_a);
    let mut proj = vec![0.0; r_a];
    for e in x.entries() {
        let [i, j, p] = e.index;
        let q = right.row(j);
        for (a, slot) in proj.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..r_b {
                s += core.get(a, b, p) * q[b];
            }
            *slot = s;
        }
        for (a, &s) in proj.iter().enumerate() {
            out.set(i, a, out.get(i, a) + e.value * s);
        }
    }
    out
}

/// `X₍₂₎ · ((G ×₁ P)₍₂₎)ᵀ`, shape `n_b × r_b`.
pub fn right_numerator(x: &SparseTensor3, core: &DenseTensor3, left: &DenseMatrix) -> DenseMatrix {
    let [r_a, r_b, _] = core.shape();
    let mut out = DenseMatrix::zeros(x.shape()[1], r_b);
    let mut proj = vec![0.0; r_b];
    for e in x.entries() {
        let [i, j, p] = e.index;
        let pr = left.row(i);
        for (b, slot) in proj.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..r_a {
                s += core.get(a, b, p) * pr[a];
            }
            *slot = s;
        }
        for (b, &s) in proj.iter().enumerate() {
            out.set(j, b, out.get(j, b) + e.value * s);
        }
    }
    out
}

/// `(G ×₂ Q)₍₁₎ ((G ×₂ Q)₍₁₎)ᵀ = Σ_p G_p (QᵀQ) G_pᵀ`, shape `r_a × r_a`.
pub fn left_gram(core: &DenseTensor3, qtq: &DenseMatrix) -> DenseMatrix {
    let [r_a, _, m] = core.shape();
    let mut out = DenseMatrix::zeros(r_a, r_a);
    for p in 0..m {
        let gp = core.frontal_slice(p);
        let t = gp.matmul(qtq).expect("core/Gram shapes agree");
        for a in 0..r_a {
            for a2 in 0..r_a {
                let mut s = 0.0;
                for (x, y) in t.row(a).iter().zip(gp.row(a2)) {
                    s += x * y;
                }
                out.set(a, a2, out.get(a, a2) + s);
            }
        }
    }
    out
}

/// `(G ×₁ P)₍₂₎ ((G ×₁ P)₍₂₎)ᵀ = Σ_p G_pᵀ (PᵀP) G_p`, shape `r_b × r_b`.
pub fn right_gram(core: &DenseTensor3, ptp: &DenseMatrix) -> DenseMatrix {
    let [_, r_b, m] = core.shape();
    let mut out = DenseMatrix::zeros(r_b, r_b);
    for p in 0..m {
        let gp = core.frontal_slice(p);
        let t = ptp.matmul(&gp).expect("core/Gram shapes agree");
        let g = gp.transpose().matmul(&t).expect("core/Gram shapes agree");
        out.add_assign(&g).expect("same shape");
    }
    out
}

/// `X ×₁ Pᵀ ×₂ Qᵀ` (Kolda notation), shape `r_a × r_b × m`.
pub fn core_numerator(x: &SparseTensor3, left: &DenseMatrix, right: &DenseMatrix) -> DenseTensor3 {
    let m = x.shape()[2];
    let (r_a, r_b) = (left.cols(), right.cols());
    let mut out = DenseTensor3::zeros([r_a, r_b, m]);
    for e in x.entries() {
        let [i, j, p] = e.index;
        let pr = left.row(i);
        let qr = right.row(j);
        for (a, &pa) in pr.iter().enumerate() {
            let w = e.value * pa;
            if w == 0.0 {
                continue;
            }
            for (b, &qb) in qr.iter().enumerate() {
                out.add_at(a, b, p, w * qb);
            }
        }
    }
    out
}

/// `G ×₁ PᵀP ×₂ QᵀQ`, evaluated slice-wise as `(PᵀP) G_p (QᵀQ)`.
pub fn core_denominator(core: &DenseTensor3, ptp: &DenseMatrix, qtq: &DenseMatrix) -> DenseTensor3 {
    let [r_a, r_b, m] = core.shape();
    let mut out = DenseTensor3::zeros([r_a, r_b, m]);
    for p in 0..m {
        let gp = core.frontal_slice(p);
        let s = ptp
            .matmul(&gp)
            .and_then(|t| t.matmul(qtq))
            .expect("core/Gram shapes agree");
        out.set_frontal_slice(p, &s);
    }
    out
}

/// Dense reconstruction `G ×₁ P ×₂ Q` laid out like `X`.
pub fn reconstruct(core: &DenseTensor3, left: &DenseMatrix, right: &DenseMatrix) -> DenseTensor3 {
    let [_, _, m] = core.shape();
    let (n_a, n_b) = (left.rows(), right.rows());
    let mut out = DenseTensor3::zeros([n_a, n_b, m]);
    for p in 0..m {
        let t = left.matmul(&core.frontal_slice(p)).expect("factor/core shapes agree");
        for i in 0..n_a {
            let ti = t.row(i);
            for j in 0..n_b {
                let mut s = 0.0;
                for (x, y) in ti.iter().zip(right.row(j)) {
                    s += x * y;
                }
                out.set(i, j, p, s);
            }
        }
    }
    out
}

/// `‖X − G ×₁ P ×₂ Q‖²_F`.
pub fn residual_sq(x: &SparseTensor3, core: &DenseTensor3, left: &DenseMatrix, right: &DenseMatrix) -> f64 {
    let cells: usize = x.shape().iter().product();
    if cells <= DIRECT_RESIDUAL_LIMIT {
        residual_direct(x, core, left, right)
    } else {
        residual_expanded(x, core, left, right)
    }
}

/// Stored cells first (in storage order), then the unstored remainder, so a
/// zero model reproduces `‖X‖²` bit for bit.
fn residual_direct(x: &SparseTensor3, core: &DenseTensor3, left: &DenseMatrix, right: &DenseMatrix) -> f64 {
    let r = reconstruct(core, left, right);
    let [_, d2, d3] = r.shape();
    let mut acc = CompensatedSum::new();
    for e in x.entries() {
        let [i, j, p] = e.index;
        let d = e.value - r.get(i, j, p);
        acc.add(d * d);
    }
    let mut stored = x.entries().iter().map(|e| (e.index[0] * d2 + e.index[1]) * d3 + e.index[2]).peekable();
    for (off, &v) in r.values().iter().enumerate() {
        if stored.peek() == Some(&off) {
            stored.next();
            continue;
        }
        acc.add(v * v);
    }
    acc.value()
}

fn residual_expanded(x: &SparseTensor3, core: &DenseTensor3, left: &DenseMatrix, right: &DenseMatrix) -> f64 {
    let cross = core.inner(&core_numerator(x, left, right)).expect("same shape");
    let model = core
        .inner(&core_denominator(core, &left.gram(), &right.gram()))
        .expect("same shape");
    let mut acc = CompensatedSum::new();
    acc.add(x.squared_norm());
    acc.add(-2.0 * cross);
    acc.add(model);
    acc.value().max(0.0)
}

/// `base * num / max(den, eps)`, optionally floored at `eps`.
pub fn multiplicative_step(base: &mut [f64], num: &[f64], den: &[f64], eps: f64, floor: bool) {
    for ((b, &n), &d) in base.iter_mut().zip(num).zip(den) {
        let v = *b * n / d.max(eps);
        *b = if floor { v.max(eps) } else { v };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng) -> (SparseTensor3, DenseTensor3, DenseMatrix, DenseMatrix) {
        let (na, nb, m, ra, rb) = (5, 4, 3, 2, 3);
        let trip: Vec<_> = (0..25)
            .map(|_| (rng.random_range(0..na), rng.random_range(0..nb), rng.random_range(0..m), rng.random_range(0.5..3.0)))
            .collect();
        let x = SparseTensor3::from_triplets([na, nb, m], trip).unwrap();
        let g = DenseTensor3::from_fn([ra, rb, m], |_, _, _| rng.random_range(0.1..1.0));
        let p = DenseMatrix::from_fn(na, ra, |_, _| rng.random_range(0.1..1.0));
        let q = DenseMatrix::from_fn(nb, rb, |_, _| rng.random_range(0.1..1.0));
        (x, g, p, q)
    }

    #[test]
    fn direct_and_expanded_residuals_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (x, g, p, q) = random_instance(&mut rng);
            let a = residual_direct(&x, &g, &p, &q);
            let b = residual_expanded(&x, &g, &p, &q);
            assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn numerators_match_dense_unfoldings() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, g, p, q) = random_instance(&mut rng);
        let xd = x.to_dense();
        let [na, nb, m] = x.shape();
        let gq = g.ttm(&q.transpose(), crate::sparse_tensor::Mode::Second).unwrap();
        let want = DenseMatrix::from_fn(na, p.cols(), |i, a| {
            let mut s = 0.0;
            for j in 0..nb {
                for k in 0..m {
                    s += xd.get(i, j, k) * gq.get(a, j, k);
                }
            }
            s
        });
        let got = left_numerator(&x, &g, &q);
        for (u, v) in got.values().iter().zip(want.values()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_model_residual_is_squared_norm_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, mut g, p, q) = random_instance(&mut rng);
        g.scale(0.0);
        assert_eq!(residual_sq(&x, &g, &p, &q).to_bits(), x.squared_norm().to_bits());
    }
}
