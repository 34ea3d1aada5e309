//! From core-tensor slices to ranked n-ary schemata.
//!
//! For a relation `p`, the top-`n` cells of `G³[:, :, p]`, `G²[:, :, p]` and
//! `G¹[:, :, p]` become weighted edges A–B, A–C and B–C of a tripartite graph
//! over factor columns. Every triangle `(a, b, c)` is a 3-ary schema, and all
//! triangles sharing the same A–B edge merge into one schema
//! `(a, b, {c₁, c₂, …})`: the maximal clique allowed to contain exactly one
//! A–B edge.
//!
//! Mining reads a copy of the factorization whose factor columns have unit
//! norm, so core cells are comparable within and across slices. Cells that
//! are negligible against their slice maximum are not edges.
//!
//! A schema's score is the sum of its distinct edge weights,
//! `w(a,b) + Σ_c [w(a,c) + w(b,c)]`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::factorization::FactorSet;

pub const DEFAULT_TOP_N: usize = 5;
pub const DEFAULT_LABEL_K: usize = 3;
pub const DEFAULT_TOP_S: usize = 50;
pub const DEFAULT_MIN_RATIO: f64 = 1e-2;

/// Which core a binary schema came from, i.e. which pair of factors its two
/// columns index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoreSide {
    /// `G¹`: (B, C).
    ObjectOther,
    /// `G²`: (A, C).
    SubjectOther,
    /// `G³`: (A, B).
    SubjectObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySchema {
    pub relation: usize,
    pub side: CoreSide,
    pub left_col: usize,
    pub right_col: usize,
    pub weight: f64,
}

/// Up to `n` strictly positive cells of `slice`, heaviest first; equal
/// weights are ordered by `(row, col)`.
pub fn top_n_cells(slice: &DenseMatrix, n: usize) -> Vec<(usize, usize, f64)> {
    top_n_cells_above(slice, n, 0.0)
}

/// Like [`top_n_cells`], but a cell must also exceed `min_ratio` times the
/// slice maximum.
pub fn top_n_cells_above(slice: &DenseMatrix, n: usize, min_ratio: f64) -> Vec<(usize, usize, f64)> {
    let floor = min_ratio * slice.values().iter().copied().fold(0.0, f64::max);
    let mut cells: Vec<(usize, usize, f64)> = (0..slice.rows())
        .flat_map(|i| (0..slice.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, slice.get(i, j)))
        .filter(|c| c.2 > 0.0 && c.2 > floor)
        .collect();
    cells.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    cells.truncate(n);
    cells
}

/// Tripartite graph for one relation. Edge maps are keyed by
/// `(left_col, right_col)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripartiteGraph {
    pub relation: usize,
    pub ab: BTreeMap<(usize, usize), f64>,
    pub ac: BTreeMap<(usize, usize), f64>,
    pub bc: BTreeMap<(usize, usize), f64>,
}

impl TripartiteGraph {
    pub fn edge_count(&self) -> usize {
        self.ab.len() + self.ac.len() + self.bc.len()
    }

    pub fn binary_schemata(&self) -> Vec<BinarySchema> {
        let mk = |side, map: &BTreeMap<(usize, usize), f64>| {
            map.iter()
                .map(move |(&(l, r), &w)| BinarySchema {
                    relation: self.relation,
                    side,
                    left_col: l,
                    right_col: r,
                    weight: w,
                })
                .collect::<Vec<_>>()
        };
        let mut out = mk(CoreSide::SubjectObject, &self.ab);
        out.extend(mk(CoreSide::SubjectOther, &self.ac));
        out.extend(mk(CoreSide::ObjectOther, &self.bc));
        out
    }
}

/// Edges for `relation` from the top cells of each core slice. Cells at or
/// below `min_ratio` times their slice maximum are not edges.
pub fn build_graph(f: &FactorSet, relation: usize, n: usize, min_ratio: f64) -> Result<TripartiteGraph> {
    if relation >= f.relations() {
        return Err(Error::Config(format!(
            "relation {relation} out of range ({} relations)",
            f.relations()
        )));
    }
    let edges = |core: &crate::dense::DenseTensor3| {
        top_n_cells_above(&core.frontal_slice(relation), n, min_ratio)
            .into_iter()
            .map(|(l, r, w)| ((l, r), w))
            .collect::<BTreeMap<_, _>>()
    };
    Ok(TripartiteGraph {
        relation,
        ab: edges(&f.g3),
        ac: edges(&f.g2),
        bc: edges(&f.g1),
    })
}

/// All `(a, b, c)` with edges A–B, A–C and B–C present, sorted.
pub fn mine_triangles(g: &TripartiteGraph) -> Vec<(usize, usize, usize)> {
    let mut c_of_a: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, c) in g.ac.keys() {
        c_of_a.entry(a).or_default().push(c);
    }
    let mut out = Vec::new();
    for &(a, b) in g.ab.keys() {
        if let Some(cs) = c_of_a.get(&a) {
            for &c in cs {
                if g.bc.contains_key(&(b, c)) {
                    out.push((a, b, c));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// A merged clique: one A column, one B column, one or more C columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clique {
    pub a_col: usize,
    pub b_col: usize,
    /// Strictly increasing, non-empty.
    pub c_cols: Vec<usize>,
}

impl Clique {
    pub fn arity(&self) -> usize {
        2 + self.c_cols.len()
    }

    pub fn triangles(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.c_cols.iter().map(move |&c| (self.a_col, self.b_col, c))
    }
}

/// Groups triangles by their `(a, b)` edge.
pub fn merge_cliques(triangles: &[(usize, usize, usize)]) -> Vec<Clique> {
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &(a, b, c) in triangles {
        groups.entry((a, b)).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((a_col, b_col), mut c_cols)| {
            c_cols.sort_unstable();
            c_cols.dedup();
            Clique { a_col, b_col, c_cols }
        })
        .collect()
}

pub fn score_schema(clique: &Clique, g: &TripartiteGraph) -> Result<f64> {
    let edge = |map: &BTreeMap<(usize, usize), f64>, key: (usize, usize), kind: &str| {
        map.get(&key)
            .copied()
            .ok_or_else(|| Error::MissingEdge(format!("{kind} {key:?} of relation {}", g.relation)))
    };
    let mut score = edge(&g.ab, (clique.a_col, clique.b_col), "A-B")?;
    for &c in &clique.c_cols {
        score += edge(&g.ac, (clique.a_col, c), "A-C")?;
        score += edge(&g.bc, (clique.b_col, c), "B-C")?;
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledNp {
    pub np: String,
    pub weight: f64,
}

/// The `k` rows with largest weight in column `col`, ties by row index.
pub fn top_rows(m: &DenseMatrix, col: usize, k: usize) -> Vec<(usize, f64)> {
    let mut rows: Vec<(usize, f64)> = (0..m.rows()).map(|i| (i, m.get(i, col))).collect();
    rows.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    rows.truncate(k);
    rows
}

/// Top-`k` noun phrases for each requested column of `m`, reading surface
/// forms from `terms` (the table matching `m`'s rows).
pub fn label_columns(
    m: &DenseMatrix,
    terms: &indexmap::IndexSet<String>,
    cols: &[usize],
    k: usize,
) -> Vec<Vec<LabeledNp>> {
    cols.iter()
        .map(|&c| {
            top_rows(m, c, k)
                .into_iter()
                .map(|(i, w)| LabeledNp {
                    np: terms.get_index(i).cloned().unwrap_or_else(|| format!("#{i}")),
                    weight: w,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnLabel {
    /// `"A"`, `"B"` or `"C"`.
    pub factor: String,
    pub col: usize,
    pub nps: Vec<LabeledNp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedSchema {
    pub relation: usize,
    pub relation_name: String,
    pub a_col: usize,
    pub b_col: usize,
    pub c_cols: Vec<usize>,
    pub score: f64,
    pub labels: Vec<ColumnLabel>,
}

impl InducedSchema {
    pub fn clique(&self) -> Clique {
        Clique {
            a_col: self.a_col,
            b_col: self.b_col,
            c_cols: self.c_cols.clone(),
        }
    }

    /// `identify⟨A1,B1,C5,C6⟩`.
    pub fn signature(&self) -> String {
        let mut parts = vec![format!("A{}", self.a_col), format!("B{}", self.b_col)];
        parts.extend(self.c_cols.iter().map(|c| format!("C{c}")));
        format!("{}⟨{}⟩", self.relation_name, parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerOptions {
    /// Cells taken from each core slice.
    pub top_n: usize,
    /// Noun phrases shown per column.
    pub label_k: usize,
    /// Schemata kept after global ranking.
    pub top_s: usize,
    /// Core cells at or below this fraction of their slice maximum are
    /// treated as zero.
    pub min_ratio: f64,
}

impl Default for MinerOptions {
    fn default() -> Self {
        Self {
            top_n: DEFAULT_TOP_N,
            label_k: DEFAULT_LABEL_K,
            top_s: DEFAULT_TOP_S,
            min_ratio: DEFAULT_MIN_RATIO,
        }
    }
}

impl MinerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.top_n == 0 || self.label_k == 0 {
            return Err(Error::Config("top_n and label_k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.min_ratio) {
            return Err(Error::Config(format!("min_ratio {} outside [0, 1)", self.min_ratio)));
        }
        Ok(())
    }
}

/// Runs graph construction, triangle mining and merging for every relation,
/// ranks all schemata by score (descending; ties by relation, A, B column)
/// and labels the survivors.
pub fn induce_schemata(f: &FactorSet, vocab: &Vocabulary, opts: &MinerOptions) -> Result<Vec<InducedSchema>> {
    opts.validate()?;
    let (n1, n2, n3, m) = vocab.sizes();
    f.check_dims(n1, n2, n3, m)?;
    let f = &f.normalized();
    let mut scored: Vec<(usize, Clique, f64)> = Vec::new();
    for p in 0..m {
        let g = build_graph(f, p, opts.top_n, opts.min_ratio)?;
        for clique in merge_cliques(&mine_triangles(&g)) {
            let s = score_schema(&clique, &g)?;
            scored.push((p, clique, s));
        }
    }
    scored.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then(x.0.cmp(&y.0))
            .then((x.1.a_col, x.1.b_col).cmp(&(y.1.a_col, y.1.b_col)))
    });
    scored.truncate(opts.top_s);
    Ok(scored
        .into_iter()
        .map(|(p, clique, score)| {
            let mut labels = vec![
                ColumnLabel {
                    factor: "A".into(),
                    col: clique.a_col,
                    nps: label_columns(&f.a, &vocab.subjects, &[clique.a_col], opts.label_k).remove(0),
                },
                ColumnLabel {
                    factor: "B".into(),
                    col: clique.b_col,
                    nps: label_columns(&f.b, &vocab.objects, &[clique.b_col], opts.label_k).remove(0),
                },
            ];
            for (c, nps) in clique
                .c_cols
                .iter()
                .zip(label_columns(&f.c, &vocab.others, &clique.c_cols, opts.label_k))
            {
                labels.push(ColumnLabel {
                    factor: "C".into(),
                    col: *c,
                    nps,
                });
            }
            InducedSchema {
                relation: p,
                relation_name: vocab.relations.get_index(p).cloned().unwrap_or_default(),
                a_col: clique.a_col,
                b_col: clique.b_col,
                c_cols: clique.c_cols,
                score,
                labels,
            }
        })
        .collect())
}

/// Plain-text table in the spirit of a results listing: one block per schema,
/// one line per column with its noun phrases.
pub fn render_table(schemata: &[InducedSchema]) -> String {
    let mut out = String::new();
    let sig_width = schemata
        .iter()
        .map(|s| s.signature().chars().count())
        .max()
        .unwrap_or(0)
        .max("Relation Schema".len());
    let rule = "-".repeat(sig_width + 60);
    out.push_str(&format!("{:<sig_width$} | NPs from the induced categories\n", "Relation Schema"));
    out.push_str(&rule);
    out.push('\n');
    for s in schemata {
        let sig = s.signature();
        for (idx, label) in s.labels.iter().enumerate() {
            let left = if idx == 0 { sig.as_str() } else { "" };
            let nps: Vec<&str> = label.nps.iter().map(|n| n.np.as_str()).collect();
            out.push_str(&format!(
                "{left:<sig_width$} | {}{}: {}\n",
                label.factor,
                label.col,
                nps.join(", ")
            ));
        }
        out.push_str(&format!("{:<sig_width$} | score = {}\n", "", s.score));
        out.push_str(&rule);
        out.push('\n');
    }
    out
}
