//! Independent reference implementations and instance generators shared by
//! the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nary_schema::corpus::{build_backoff_tensors, BackoffTensors, TupleRecord, Vocabulary};
use nary_schema::dense::{DenseMatrix, DenseTensor3};
use nary_schema::factorization::{FactorSet, Ranks, Regularizers};
use nary_schema::schema_miner::{Clique, TripartiteGraph};
use nary_schema::sparse_tensor::SparseTensor3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

pub fn max_rel_diff(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs())) / scale
}

/// Nested-vector tensor `t[i][j][k]`.
pub type Nested = Vec<Vec<Vec<f64>>>;

pub fn nested_from_sparse(x: &SparseTensor3) -> Nested {
    let [d1, d2, d3] = x.shape();
    let mut t = vec![vec![vec![0.0; d3]; d2]; d1];
    for e in x.entries() {
        let [i, j, k] = e.index;
        t[i][j][k] += e.value;
    }
    t
}

/// Mode-n unfolding straight from the element-wise definition: the column of
/// element `(i₁, i₂, i₃)` is `Σ_{k≠n} i_k · Π_{l<k, l≠n} I_l`.
pub fn unfold(t: &Nested, mode: usize) -> Vec<Vec<f64>> {
    let dims = [t.len(), t[0].len(), t[0][0].len()];
    let rows = dims[mode];
    let cols = dims.iter().product::<usize>() / rows;
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let idx = [i, j, k];
                let mut col = 0;
                let mut stride = 1;
                for n in 0..3 {
                    if n == mode {
                        continue;
                    }
                    col += idx[n] * stride;
                    stride *= dims[n];
                }
                out[idx[mode]][col] += t[i][j][k];
            }
        }
    }
    out
}

/// `Σ_{i_mode} t[..i_mode..] · m[i_mode][c]` by explicit loops.
pub fn ttm(t: &Nested, m: &DenseMatrix, mode: usize) -> Nested {
    let dims = [t.len(), t[0].len(), t[0][0].len()];
    let mut od = dims;
    od[mode] = m.cols();
    let mut out = vec![vec![vec![0.0; od[2]]; od[1]]; od[0]];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let idx = [i, j, k];
                for c in 0..m.cols() {
                    let mut o = idx;
                    o[mode] = c;
                    out[o[0]][o[1]][o[2]] += t[i][j][k] * m.get(idx[mode], c);
                }
            }
        }
    }
    out
}

pub fn flatten(t: &Nested) -> Vec<f64> {
    t.iter().flat_map(|a| a.iter().flat_map(|b| b.iter().copied())).collect()
}

/// `R[i][j][p] = Σ_{a,b} G[a][b][p] · P[i][a] · Q[j][b]`.
pub fn reconstruct(g: &DenseTensor3, p: &DenseMatrix, q: &DenseMatrix) -> Nested {
    let [ra, rb, m] = g.shape();
    let mut out = vec![vec![vec![0.0; m]; q.rows()]; p.rows()];
    for (i, oi) in out.iter_mut().enumerate() {
        for (j, oij) in oi.iter_mut().enumerate() {
            for (k, cell) in oij.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..ra {
                    for b in 0..rb {
                        s += g.get(a, b, k) * p.get(i, a) * q.get(j, b);
                    }
                }
                *cell = s;
            }
        }
    }
    out
}

pub fn sq_diff(x: &Nested, r: &Nested) -> f64 {
    flatten(x).iter().zip(flatten(r)).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn sq_norm(x: &Nested) -> f64 {
    flatten(x).iter().map(|v| v * v).sum()
}

pub fn mat_sq_norm(m: &DenseMatrix) -> f64 {
    m.values().iter().map(|v| v * v).sum()
}

/// Per-tensor squared residuals `[X¹, X², X³]`.
pub fn residuals(t: &BackoffTensors, f: &FactorSet) -> [f64; 3] {
    [
        sq_diff(&nested_from_sparse(&t.x1), &reconstruct(&f.g1, &f.b, &f.c)),
        sq_diff(&nested_from_sparse(&t.x2), &reconstruct(&f.g2, &f.a, &f.c)),
        sq_diff(&nested_from_sparse(&t.x3), &reconstruct(&f.g3, &f.a, &f.b)),
    ]
}

pub fn objective(t: &BackoffTensors, f: &FactorSet, reg: &Regularizers) -> f64 {
    let r = residuals(t, f);
    r[0] + r[1] + r[2]
        + reg.lambda_a * mat_sq_norm(&f.a)
        + reg.lambda_b * mat_sq_norm(&f.b)
        + reg.lambda_c * mat_sq_norm(&f.c)
}

pub fn fits(t: &BackoffTensors, f: &FactorSet) -> [f64; 3] {
    let r = residuals(t, f);
    let norms = [
        sq_norm(&nested_from_sparse(&t.x1)),
        sq_norm(&nested_from_sparse(&t.x2)),
        sq_norm(&nested_from_sparse(&t.x3)),
    ];
    [0, 1, 2].map(|i| 1.0 - (r[i] / norms[i]).sqrt())
}

pub fn relative_change(new: &DenseMatrix, old: &DenseMatrix) -> f64 {
    let d: f64 = new.values().iter().zip(old.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    (d / mat_sq_norm(old)).sqrt()
}

pub fn relative_change_t(new: &DenseTensor3, old: &DenseTensor3) -> f64 {
    let d: f64 = new.values().iter().zip(old.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    let n: f64 = old.values().iter().map(|v| v * v).sum();
    (d / n).sqrt()
}

// ---------------------------------------------------------------- instances

pub fn vocab(n1: usize, n2: usize, n3: usize, m: usize) -> Vocabulary {
    let mut v = Vocabulary::default();
    for i in 0..n1 {
        v.subjects.insert(format!("s{i}"));
    }
    for i in 0..n2 {
        v.objects.insert(format!("o{i}"));
    }
    for i in 0..n3 {
        v.others.insert(format!("x{i}"));
    }
    for i in 0..m {
        v.relations.insert(format!("r{i}"));
    }
    v
}

/// Random 4-tuples over an `n1 × n2 × n3 × m` index space with integer
/// counts in `1..=max_count`; about `density` of the cells are drawn.
pub fn random_records(
    rng: &mut ChaCha8Rng,
    dims: [usize; 4],
    density: f64,
    max_count: u64,
) -> Vec<TupleRecord> {
    let cells = dims.iter().product::<usize>();
    let n = ((cells as f64 * density).round() as usize).max(1);
    (0..n)
        .map(|_| {
            TupleRecord::new(
                &format!("s{}", rng.random_range(0..dims[0])),
                &format!("r{}", rng.random_range(0..dims[3])),
                &format!("o{}", rng.random_range(0..dims[1])),
                &[&format!("x{}", rng.random_range(0..dims[2]))],
                rng.random_range(1..=max_count),
            )
        })
        .collect()
}

pub fn random_backoff(rng: &mut ChaCha8Rng, dims: [usize; 4], density: f64) -> BackoffTensors {
    build_backoff_tensors(&random_records(rng, dims, density, 5)).unwrap()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn random_factors(rng: &mut ChaCha8Rng, sizes: (usize, usize, usize, usize), r: Ranks, lo: f64, hi: f64) -> FactorSet {
    let (n1, n2, n3, m) = sizes;
    let mut mat = |rows, cols| DenseMatrix::from_fn(rows, cols, |_, _| uniform(rng, lo, hi));
    let a = mat(n1, r.r1);
    let b = mat(n2, r.r2);
    let c = mat(n3, r.r3);
    let mut ten = |s| DenseTensor3::from_fn(s, |_, _, _| uniform(rng, lo, hi));
    FactorSet {
        g1: ten([r.r2, r.r3, m]),
        g2: ten([r.r1, r.r3, m]),
        g3: ten([r.r1, r.r2, m]),
        a,
        b,
        c,
    }
}

/// Positive factors where row `i` of each factor loads mainly on column
/// `i mod rank` and weakly (below `background`) elsewhere; cores uniform.
pub fn separated_factors(rng: &mut ChaCha8Rng, sizes: (usize, usize, usize, usize), r: Ranks, background: f64) -> FactorSet {
    let mut f = random_factors(rng, sizes, r, 0.0, 1.0);
    for m in [&mut f.a, &mut f.b, &mut f.c] {
        let k = m.cols();
        for i in 0..m.rows() {
            for j in 0..k {
                let v = if j == i % k { uniform(rng, 0.5, 1.0) } else { uniform(rng, 1e-3, background) };
                m.set(i, j, v);
            }
        }
    }
    f
}

fn to_sparse(t: &Nested) -> SparseTensor3 {
    let shape = [t.len(), t[0].len(), t[0][0].len()];
    let mut trips = Vec::new();
    for (i, a) in t.iter().enumerate() {
        for (j, b) in a.iter().enumerate() {
            for (k, &v) in b.iter().enumerate() {
                trips.push((i, j, k, v));
            }
        }
    }
    SparseTensor3::from_triplets(shape, trips).unwrap()
}

/// Back-off tensors reconstructed exactly from `f`.
pub fn synthesize(f: &FactorSet) -> BackoffTensors {
    let (n1, n2, n3, m) = (f.a.rows(), f.b.rows(), f.c.rows(), f.relations());
    BackoffTensors::new(
        to_sparse(&reconstruct(&f.g1, &f.b, &f.c)),
        to_sparse(&reconstruct(&f.g2, &f.a, &f.c)),
        to_sparse(&reconstruct(&f.g3, &f.a, &f.b)),
        vocab(n1, n2, n3, m),
    )
    .unwrap()
}

// ------------------------------------------------------------ graph oracles

pub fn random_graph(rng: &mut ChaCha8Rng, max_side: usize, density: f64) -> TripartiteGraph {
    let na = rng.random_range(1..=max_side);
    let nb = rng.random_range(1..=max_side);
    let nc = rng.random_range(1..=max_side);
    let mut edges = |l: usize, r: usize| {
        let mut map = BTreeMap::new();
        for i in 0..l {
            for j in 0..r {
                if rng.random::<f64>() < density {
                    map.insert((i, j), rng.random_range(1..100) as f64 / 10.0);
                }
            }
        }
        map
    };
    TripartiteGraph {
        relation: 0,
        ab: edges(na, nb),
        ac: edges(na, nc),
        bc: edges(nb, nc),
    }
}

/// Every `(a, b, c)` over the full column ranges with all three edges.
pub fn brute_force_triangles(g: &TripartiteGraph) -> Vec<(usize, usize, usize)> {
    let span = |it: &mut dyn Iterator<Item = usize>| it.max().map_or(0, |v| v + 1);
    let na = span(&mut g.ab.keys().map(|k| k.0).chain(g.ac.keys().map(|k| k.0)));
    let nb = span(&mut g.ab.keys().map(|k| k.1).chain(g.bc.keys().map(|k| k.0)));
    let nc = span(&mut g.ac.keys().map(|k| k.1).chain(g.bc.keys().map(|k| k.1)));
    let mut out = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                if g.ab.contains_key(&(a, b)) && g.ac.contains_key(&(a, c)) && g.bc.contains_key(&(b, c)) {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Vertex {
    A(usize),
    B(usize),
    C(usize),
}

/// Constrained cliques by exhaustive maximal-clique enumeration.
///
/// Works on an auxiliary graph holding the tripartite edges plus an edge
/// between every pair of C vertices. A maximal clique there with exactly one
/// A vertex, exactly one B vertex and at least one C vertex is precisely an
/// A–B edge together with all C vertices adjacent to both of its ends.
pub fn constrained_cliques(g: &TripartiteGraph) -> Vec<Clique> {
    let mut vertices: BTreeSet<Vertex> = BTreeSet::new();
    let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    let link = |x: Vertex, y: Vertex, adj: &mut BTreeMap<Vertex, BTreeSet<Vertex>>| {
        adj.entry(x).or_default().insert(y);
        adj.entry(y).or_default().insert(x);
    };
    for &(a, b) in g.ab.keys() {
        link(Vertex::A(a), Vertex::B(b), &mut adj);
    }
    for &(a, c) in g.ac.keys() {
        link(Vertex::A(a), Vertex::C(c), &mut adj);
    }
    for &(b, c) in g.bc.keys() {
        link(Vertex::B(b), Vertex::C(c), &mut adj);
    }
    vertices.extend(adj.keys().copied());
    let cs: Vec<Vertex> = vertices.iter().copied().filter(|v| matches!(v, Vertex::C(_))).collect();
    for (i, &x) in cs.iter().enumerate() {
        for &y in &cs[i + 1..] {
            link(x, y, &mut adj);
        }
    }

    let mut maximal = Vec::new();
    bron_kerbosch(&adj, BTreeSet::new(), vertices, BTreeSet::new(), &mut maximal);

    let mut out: Vec<Clique> = maximal
        .into_iter()
        .filter_map(|clique| {
            let a: Vec<usize> = clique.iter().filter_map(|v| if let Vertex::A(i) = v { Some(*i) } else { None }).collect();
            let b: Vec<usize> = clique.iter().filter_map(|v| if let Vertex::B(i) = v { Some(*i) } else { None }).collect();
            let c: Vec<usize> = clique.iter().filter_map(|v| if let Vertex::C(i) = v { Some(*i) } else { None }).collect();
            (a.len() == 1 && b.len() == 1 && !c.is_empty()).then(|| Clique {
                a_col: a[0],
                b_col: b[0],
                c_cols: c,
            })
        })
        .collect();
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &BTreeMap<Vertex, BTreeSet<Vertex>>,
    r: BTreeSet<Vertex>,
    mut p: BTreeSet<Vertex>,
    mut x: BTreeSet<Vertex>,
    out: &mut Vec<BTreeSet<Vertex>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r);
        return;
    }
    let empty = BTreeSet::new();
    let pivot = p.union(&x).max_by_key(|u| adj.get(u).unwrap_or(&empty).intersection(&p).count()).copied();
    let pivot_nbrs = pivot.and_then(|u| adj.get(&u)).unwrap_or(&empty);
    let candidates: Vec<Vertex> = p.difference(pivot_nbrs).copied().collect();
    for v in candidates {
        let nbrs = adj.get(&v).unwrap_or(&empty);
        let mut r2 = r.clone();
        r2.insert(v);
        bron_kerbosch(
            adj,
            r2,
            p.intersection(nbrs).copied().collect(),
            x.intersection(nbrs).copied().collect(),
            out,
        );
        p.remove(&v);
        x.insert(v);
    }
}
