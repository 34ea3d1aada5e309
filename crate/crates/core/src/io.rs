//! On-disk formats.
//!
//! **Back-off tensors** (`backoff.jsonl`): one JSON object per line, tagged by
//! `"record"`:
//!
//! ```text
//! {"record":"vocab","table":"subjects","terms":["federer", ...]}   × 4 tables
//! {"record":"tensor","name":"x1","shape":[n2,n3,m],"nnz":N}       × 3 tensors
//! {"record":"entry","tensor":"x1","i":0,"j":4,"k":1,"value":15.0} × N per tensor
//! ```
//!
//! Tables are `subjects`, `objects`, `others`, `relations` in index order.
//! Each tensor header precedes its entries, which appear in `(i, j, k)` order.
//!
//! **Factor sets** (`factors.json`): `{"a":M,"b":M,"c":M,"g1":T,"g2":T,"g3":T}`
//! with `M = {"rows","cols","values"}` and `T = {"shape":[d1,d2,d3],"values"}`,
//! values row-major (last index fastest).
//!
//! **Binary factor sidecar** (`factors.bin`): the 8-byte magic `NSFACT01`,
//! then seven little-endian `u64` dimensions `n1 r1 n2 r2 n3 r3 m`, then the
//! values of `A, B, C, G1, G2, G3` as little-endian `f64`, each row-major.
//!
//! **Schemata** (`*.jsonl`): one [`SchemaRow`] per line.

use std::io::{BufRead, Read, Write};

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::baseline::HardClustSchema;
use crate::corpus::{BackoffTensors, TupleRecord, Vocabulary};
use crate::dense::{DenseMatrix, DenseTensor3};
use crate::error::{Error, Result};
use crate::factorization::FactorSet;
use crate::schema_miner::InducedSchema;
use crate::sparse_tensor::SparseTensor3;

pub const FACTOR_MAGIC: &[u8; 8] = b"NSFACT01";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum BackoffLine {
    Vocab { table: String, terms: Vec<String> },
    Tensor { name: String, shape: [usize; 3], nnz: usize },
    Entry { tensor: String, i: usize, j: usize, k: usize, value: f64 },
}

fn write_line<W: Write, T: Serialize>(w: &mut W, v: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_backoff_jsonl<W: Write>(mut w: W, t: &BackoffTensors) -> Result<()> {
    let tables: [(&str, &IndexSet<String>); 4] = [
        ("subjects", &t.vocab.subjects),
        ("objects", &t.vocab.objects),
        ("others", &t.vocab.others),
        ("relations", &t.vocab.relations),
    ];
    for (table, terms) in tables {
        write_line(
            &mut w,
            &BackoffLine::Vocab {
                table: table.into(),
                terms: terms.iter().cloned().collect(),
            },
        )?;
    }
    for (name, x) in [("x1", &t.x1), ("x2", &t.x2), ("x3", &t.x3)] {
        write_line(
            &mut w,
            &BackoffLine::Tensor {
                name: name.into(),
                shape: x.shape(),
                nnz: x.nnz(),
            },
        )?;
        for e in x.entries() {
            write_line(
                &mut w,
                &BackoffLine::Entry {
                    tensor: name.into(),
                    i: e.index[0],
                    j: e.index[1],
                    k: e.index[2],
                    value: e.value,
                },
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_backoff_jsonl<R: BufRead>(r: R) -> Result<BackoffTensors> {
    let mut vocab = Vocabulary::default();
    let mut shapes: [Option<[usize; 3]>; 3] = [None; 3];
    let mut nnz = [0usize; 3];
    let mut triplets: [Vec<(usize, usize, usize, f64)>; 3] = Default::default();
    let slot = |name: &str| match name {
        "x1" => Ok(0),
        "x2" => Ok(1),
        "x3" => Ok(2),
        other => Err(Error::Artifact(format!("unknown tensor {other:?}"))),
    };
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BackoffLine = serde_json::from_str(&line)
            .map_err(|e| Error::Artifact(format!("backoff line {}: {e}", n + 1)))?;
        match rec {
            BackoffLine::Vocab { table, terms } => {
                let target = match table.as_str() {
                    "subjects" => &mut vocab.subjects,
                    "objects" => &mut vocab.objects,
                    "others" => &mut vocab.others,
                    "relations" => &mut vocab.relations,
                    other => return Err(Error::Artifact(format!("unknown vocabulary table {other:?}"))),
                };
                let len = terms.len();
                *target = terms.into_iter().collect();
                if target.len() != len {
                    return Err(Error::Artifact(format!("duplicate terms in table {table}")));
                }
            }
            BackoffLine::Tensor { name, shape, nnz: count } => {
                let s = slot(&name)?;
                shapes[s] = Some(shape);
                nnz[s] = count;
            }
            BackoffLine::Entry { tensor, i, j, k, value } => {
                let s = slot(&tensor)?;
                if shapes[s].is_none() {
                    return Err(Error::Artifact(format!("entry for {tensor} before its header")));
                }
                triplets[s].push((i, j, k, value));
            }
        }
    }
    let mut tensors = Vec::with_capacity(3);
    for (s, trip) in triplets.into_iter().enumerate() {
        let shape = shapes[s].ok_or_else(|| Error::Artifact(format!("missing header for x{}", s + 1)))?;
        if trip.len() != nnz[s] {
            return Err(Error::Artifact(format!(
                "x{} declares {} entries but has {}",
                s + 1,
                nnz[s],
                trip.len()
            )));
        }
        tensors.push(SparseTensor3::from_triplets(shape, trip)?);
    }
    let x3 = tensors.pop().expect("three tensors");
    let x2 = tensors.pop().expect("three tensors");
    let x1 = tensors.pop().expect("three tensors");
    BackoffTensors::new(x1, x2, x3, vocab)
}

pub fn write_factors_json<W: Write>(mut w: W, f: &FactorSet) -> Result<()> {
    serde_json::to_writer(&mut w, f)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_factors_json<R: Read>(r: R) -> Result<FactorSet> {
    let f: FactorSet = serde_json::from_reader(r)?;
    f.check_dims(f.a.rows(), f.b.rows(), f.c.rows(), f.relations())?;
    Ok(f)
}

pub fn write_factors_bin<W: Write>(mut w: W, f: &FactorSet) -> Result<()> {
    w.write_all(FACTOR_MAGIC)?;
    let dims = [
        f.a.rows(),
        f.a.cols(),
        f.b.rows(),
        f.b.cols(),
        f.c.rows(),
        f.c.cols(),
        f.relations(),
    ];
    for d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let blocks: [&[f64]; 6] = [
        f.a.values(),
        f.b.values(),
        f.c.values(),
        f.g1.values(),
        f.g2.values(),
        f.g3.values(),
    ];
    for block in blocks {
        for v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_factors_bin<R: Read>(mut r: R) -> Result<FactorSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FACTOR_MAGIC {
        return Err(Error::Artifact("bad magic in binary factor file".into()));
    }
    let mut dims = [0usize; 7];
    let mut buf = [0u8; 8];
    for d in dims.iter_mut() {
        r.read_exact(&mut buf)?;
        *d = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| Error::Artifact("dimension overflow".into()))?;
    }
    let [n1, r1, n2, r2, n3, r3, m] = dims;
    let mut read_vals = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let a = DenseMatrix::from_vec(n1, r1, read_vals(n1 * r1)?)?;
    let b = DenseMatrix::from_vec(n2, r2, read_vals(n2 * r2)?)?;
    let c = DenseMatrix::from_vec(n3, r3, read_vals(n3 * r3)?)?;
    let g1 = DenseTensor3::from_vec([r2, r3, m], read_vals(r2 * r3 * m)?)?;
    let g2 = DenseTensor3::from_vec([r1, r3, m], read_vals(r1 * r3 * m)?)?;
    let g3 = DenseTensor3::from_vec([r1, r2, m], read_vals(r1 * r2 * m)?)?;
    Ok(FactorSet { a, b, c, g1, g2, g3 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpWeight {
    pub np: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaColumn {
    /// `A3`, `B0`, `C5` for factorized schemata; `subject`, `object`,
    /// `other` for HardClust.
    pub id: String,
    pub nps: Vec<NpWeight>,
}

/// One line of a schemata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaRow {
    /// `backoff-tucker` or `hardclust`.
    pub method: String,
    pub rank: usize,
    pub relation: String,
    pub columns: Vec<SchemaColumn>,
    /// Clique score, or the relation's tuple mass for HardClust.
    pub score: f64,
}

impl SchemaRow {
    pub fn from_induced(rank: usize, s: &InducedSchema) -> Self {
        Self {
            method: "backoff-tucker".into(),
            rank,
            relation: s.relation_name.clone(),
            columns: s
                .labels
                .iter()
                .map(|l| SchemaColumn {
                    id: format!("{}{}", l.factor, l.col),
                    nps: l
                        .nps
                        .iter()
                        .map(|n| NpWeight {
                            np: n.np.clone(),
                            weight: n.weight,
                        })
                        .collect(),
                })
                .collect(),
            score: s.score,
        }
    }

    pub fn from_hardclust(rank: usize, s: &HardClustSchema) -> Self {
        let col = |id: &str, reps: &[crate::baseline::NpFrequency]| SchemaColumn {
            id: id.into(),
            nps: reps
                .iter()
                .map(|n| NpWeight {
                    np: n.np.clone(),
                    weight: n.frequency as f64,
                })
                .collect(),
        };
        Self {
            method: "hardclust".into(),
            rank,
            relation: s.relation.clone(),
            columns: vec![
                col("subject", s.subject_reps()),
                col("object", s.object_reps()),
                col("other", s.other_reps()),
            ],
            score: s.subjects.iter().map(|n| n.frequency).sum::<u64>() as f64,
        }
    }

    pub fn signature(&self) -> String {
        let ids: Vec<&str> = self.columns.iter().map(|c| c.id.as_str()).collect();
        format!("{}⟨{}⟩", self.relation, ids.join(","))
    }
}

pub fn write_schema_rows<W: Write>(mut w: W, rows: &[SchemaRow]) -> Result<()> {
    for r in rows {
        write_line(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_schema_rows<R: BufRead>(r: R) -> Result<Vec<SchemaRow>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Artifact(format!("schema line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

/// Renders schema rows as a two-column text table.
pub fn render_rows(rows: &[SchemaRow]) -> String {
    let sig_width = rows
        .iter()
        .map(|r| r.signature().chars().count())
        .max()
        .unwrap_or(0)
        .max("Relation Schema".len());
    let rule = "-".repeat(sig_width + 60);
    let mut out = format!("{:<sig_width$} | NPs from the induced categories\n{rule}\n", "Relation Schema");
    for r in rows {
        let sig = r.signature();
        for (i, col) in r.columns.iter().enumerate() {
            let left = if i == 0 { sig.as_str() } else { "" };
            let nps: Vec<&str> = col.nps.iter().map(|n| n.np.as_str()).collect();
            out.push_str(&format!("{left:<sig_width$} | {}: {}\n", col.id, nps.join(", ")));
        }
        out.push_str(&format!("{:<sig_width$} | score = {}\n{rule}\n", "", r.score));
    }
    out
}

/// Writes tuples in the ingestion TSV format. Records with other arguments
/// always carry an explicit count; records without any are repeated `count`
/// times, since a fourth field would be read as an other argument.
pub fn write_tuples_tsv<W: Write>(mut w: W, records: &[TupleRecord]) -> Result<()> {
    for r in records {
        let mut fields: Vec<&str> = vec![&r.subject, &r.relation, &r.object];
        if r.others.is_empty() {
            for _ in 0..r.count {
                writeln!(w, "{}", fields.join("\t"))?;
            }
            continue;
        }
        fields.extend(r.others.iter().map(String::as_str));
        let count = r.count.to_string();
        fields.push(&count);
        writeln!(w, "{}", fields.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}
