//! Tuple ingestion, vocabularies, and the back-off tensors.
//!
//! Input is UTF-8, tab-separated, one extraction per line:
//!
//! ```text
//! subject <TAB> relation <TAB> object [<TAB> other1 [<TAB> other2]] [<TAB> count]
//! ```
//!
//! A trailing count is recognised on 5-field lines when the last field is a
//! positive integer, and is mandatory on 6-field lines. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::HashMap;
use std::io::BufRead;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse_tensor::SparseTensor3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TupleRecord {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub others: Vec<String>,
    pub count: u64,
}

impl TupleRecord {
    pub fn new(subject: &str, relation: &str, object: &str, others: &[&str], count: u64) -> Self {
        Self {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            others: others.iter().map(|s| s.to_string()).collect(),
            count,
        }
    }

    /// The single `other` argument of a split record.
    fn other(&self) -> Result<&str> {
        match self.others.as_slice() {
            [o] => Ok(o),
            _ => Err(Error::InvalidEntry(format!(
                "record ({}, {}, {}) has {} other arguments; split 5-tuples first",
                self.subject,
                self.relation,
                self.object,
                self.others.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Case-fold every field.
    pub lowercase: bool,
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTuples {
    pub records: Vec<TupleRecord>,
    pub issues: Vec<LineIssue>,
}

pub fn parse_tuples<R: BufRead>(reader: R, opts: ParseOptions) -> Result<ParsedTuples> {
    let mut out = ParsedTuples::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        match parse_line(trimmed, opts.lowercase) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                if opts.strict {
                    return Err(Error::Parse {
                        line: line_no,
                        reason,
                    });
                }
                log::warn!("skipping line {line_no}: {reason}");
                out.issues.push(LineIssue {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

fn parse_line(line: &str, lowercase: bool) -> std::result::Result<TupleRecord, String> {
    let fields: Vec<String> = line
        .split('\t')
        .map(|f| {
            let f = f.trim();
            if lowercase {
                f.to_lowercase()
            } else {
                f.to_string()
            }
        })
        .collect();
    if !(3..=6).contains(&fields.len()) {
        return Err(format!("expected 3 to 6 tab-separated fields, found {}", fields.len()));
    }
    if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
        return Err(format!("field {} is empty", pos + 1));
    }
    let parse_count = |s: &str| s.parse::<u64>().ok().filter(|&c| c >= 1);
    let (others, count): (&[String], u64) = match fields.len() {
        3 | 4 => (&fields[3..], 1),
        5 => match parse_count(&fields[4]) {
            Some(c) => (&fields[3..4], c),
            None => (&fields[3..5], 1),
        },
        _ => match parse_count(&fields[5]) {
            Some(c) => (&fields[3..5], c),
            None => return Err(format!("count {:?} is not a positive integer", fields[5])),
        },
    };
    Ok(TupleRecord {
        subject: fields[0].clone(),
        relation: fields[1].clone(),
        object: fields[2].clone(),
        others: others.to_vec(),
        count,
    })
}

/// Splits every 5-tuple into two 4-tuples sharing the original count. Records
/// without any `other` argument cannot be placed in the 4-mode tensor and are
/// dropped; the number dropped is returned alongside.
pub fn split_five_tuples(records: Vec<TupleRecord>) -> (Vec<TupleRecord>, usize) {
    let mut out = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for rec in records {
        match rec.others.len() {
            0 => {
                log::warn!(
                    "dropping ({}, {}, {}): no other argument",
                    rec.subject,
                    rec.relation,
                    rec.object
                );
                dropped += 1;
            }
            1 => out.push(rec),
            _ => {
                for other in &rec.others {
                    out.push(TupleRecord {
                        others: vec![other.clone()],
                        ..rec.clone()
                    });
                }
            }
        }
    }
    (out, dropped)
}

/// Keeps records whose relation is among the `k` heaviest by total count.
/// Ties at the cut are resolved in favour of the lexicographically smaller
/// relation.
pub fn filter_top_relations(records: Vec<TupleRecord>, k: usize) -> Result<Vec<TupleRecord>> {
    if k == 0 {
        return Err(Error::Config("top-relation count must be at least 1".into()));
    }
    let mut mass: HashMap<&str, u64> = HashMap::new();
    for r in &records {
        *mass.entry(r.relation.as_str()).or_default() += r.count;
    }
    if mass.len() <= k {
        return Ok(records);
    }
    let mut ranked: Vec<(&str, u64)> = mass.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep: std::collections::HashSet<String> =
        ranked[..k].iter().map(|(r, _)| r.to_string()).collect();
    Ok(records
        .into_iter()
        .filter(|r| keep.contains(&r.relation))
        .collect())
}

/// Symbol tables for the four tensor modes, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    pub subjects: IndexSet<String>,
    pub objects: IndexSet<String>,
    pub others: IndexSet<String>,
    pub relations: IndexSet<String>,
}

impl Vocabulary {
    pub fn from_records(records: &[TupleRecord]) -> Self {
        let mut v = Self::default();
        for r in records {
            v.subjects.insert(r.subject.clone());
            v.objects.insert(r.object.clone());
            for o in &r.others {
                v.others.insert(o.clone());
            }
            v.relations.insert(r.relation.clone());
        }
        v
    }

    /// `(n1, n2, n3, m)`.
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.subjects.len(),
            self.objects.len(),
            self.others.len(),
            self.relations.len(),
        )
    }

    fn indices(&self, r: &TupleRecord) -> Result<[usize; 4]> {
        let lookup = |table: &IndexSet<String>, s: &str| {
            table
                .get_index_of(s)
                .ok_or_else(|| Error::InvalidEntry(format!("{s:?} missing from vocabulary")))
        };
        Ok([
            lookup(&self.subjects, &r.subject)?,
            lookup(&self.objects, &r.object)?,
            lookup(&self.others, r.other()?)?,
            lookup(&self.relations, &r.relation)?,
        ])
    }
}

/// The three marginal tensors obtained by summing out one noun-phrase
/// argument of the 4-mode count tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffTensors {
    /// Subject summed out: `n2 × n3 × m`.
    pub x1: SparseTensor3,
    /// Object summed out: `n1 × n3 × m`.
    pub x2: SparseTensor3,
    /// Other summed out: `n1 × n2 × m`.
    pub x3: SparseTensor3,
    pub vocab: Vocabulary,
}

impl BackoffTensors {
    /// Assembles and validates a set built elsewhere (e.g. loaded from disk).
    pub fn new(
        x1: SparseTensor3,
        x2: SparseTensor3,
        x3: SparseTensor3,
        vocab: Vocabulary,
    ) -> Result<Self> {
        let (n1, n2, n3, m) = vocab.sizes();
        let expect = [("x1", x1.shape(), [n2, n3, m]), ("x2", x2.shape(), [n1, n3, m]), ("x3", x3.shape(), [n1, n2, m])];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Shape(format!(
                    "{name} has shape {got:?}, vocabulary implies {want:?}"
                )));
            }
        }
        Ok(Self { x1, x2, x3, vocab })
    }

    /// Total count mass (identical for all three tensors).
    pub fn total_mass(&self) -> f64 {
        self.x3.sum()
    }
}

pub fn build_backoff_tensors(records: &[TupleRecord]) -> Result<BackoffTensors> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::from_records(records);
    let (n1, n2, n3, m) = vocab.sizes();
    let mut t1 = Vec::with_capacity(records.len());
    let mut t2 = Vec::with_capacity(records.len());
    let mut t3 = Vec::with_capacity(records.len());
    for r in records {
        let [s, o, x, p] = vocab.indices(r)?;
        let v = r.count as f64;
        t1.push((o, x, p, v));
        t2.push((s, x, p, v));
        t3.push((s, o, p, v));
    }
    Ok(BackoffTensors {
        x1: SparseTensor3::from_triplets([n2, n3, m], t1)?,
        x2: SparseTensor3::from_triplets([n1, n3, m], t2)?,
        x3: SparseTensor3::from_triplets([n1, n2, m], t3)?,
        vocab,
    })
}

/// The full `subject × object × other × relation` count tensor. Only used
/// to report how sparse the un-backed-off problem is.
#[derive(Debug, Clone, PartialEq)]
pub struct FourModeTensor {
    pub shape: [usize; 4],
    /// Sorted by coordinate, duplicates summed.
    pub entries: Vec<([usize; 4], u64)>,
}

impl FourModeTensor {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Stored entries divided by the number of cells.
    pub fn sparsity_ratio(&self) -> f64 {
        let cells: f64 = self.shape.iter().map(|&d| d as f64).product();
        self.nnz() as f64 / cells
    }

    /// Sums out one noun-phrase mode (0 = subject, 1 = object, 2 = other),
    /// keeping the relation mode last.
    pub fn marginalize(&self, drop: usize) -> Result<SparseTensor3> {
        if drop > 2 {
            return Err(Error::InvalidMode(drop + 1));
        }
        let keep: Vec<usize> = (0..3).filter(|&d| d != drop).collect();
        let shape = [self.shape[keep[0]], self.shape[keep[1]], self.shape[3]];
        SparseTensor3::from_triplets(
            shape,
            self.entries
                .iter()
                .map(|(ix, c)| (ix[keep[0]], ix[keep[1]], ix[3], *c as f64)),
        )
    }
}

pub fn build_4mode_tensor(records: &[TupleRecord]) -> Result<FourModeTensor> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::from_records(records);
    let (n1, n2, n3, m) = vocab.sizes();
    let mut cells: Vec<([usize; 4], u64)> = records
        .iter()
        .map(|r| vocab.indices(r).map(|ix| (ix, r.count)))
        .collect::<Result<_>>()?;
    cells.sort_by_key(|c| c.0);
    let mut entries: Vec<([usize; 4], u64)> = Vec::with_capacity(cells.len());
    for (ix, c) in cells {
        match entries.last_mut() {
            Some(last) if last.0 == ix => last.1 += c,
            _ => entries.push((ix, c)),
        }
    }
    Ok(FourModeTensor {
        shape: [n1, n2, n3, m],
        entries,
    })
}
