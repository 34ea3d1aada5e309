//! Synthetic corpora with planted schemata.
//!
//! Noun phrases are partitioned into disjoint blocks per argument role. A
//! planted schema `(relation, A-block, B-block, {C-blocks})` emits tuples
//! whose subject, object and other arguments are drawn uniformly from the
//! named blocks; a schema with two C-blocks emits 5-tuples, one other
//! argument per block. Noise tuples draw every field uniformly from the whole
//! vocabulary.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TupleRecord, Vocabulary};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::factorization::FactorSet;
use crate::schema_miner::InducedSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSchema {
    pub relation: usize,
    pub a_block: usize,
    pub b_block: usize,
    /// One or two blocks for the other argument(s).
    pub c_blocks: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub subject_blocks: usize,
    pub object_blocks: usize,
    pub other_blocks: usize,
    /// Noun phrases per block.
    pub block_size: usize,
    pub relations: usize,
    pub planted: Vec<PlantedSchema>,
    /// Tuples emitted per unit of planted weight.
    pub tuples_per_weight: usize,
    /// Noise tuples as a fraction of planted tuples.
    pub noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Five relations over 4 subject, 4 object and 5 other blocks, eight
    /// planted schemata, two of them 4-ary.
    pub fn standard(seed: u64, noise_rate: f64) -> Self {
        let p = |relation, a_block, b_block, c_blocks: &[usize], weight| PlantedSchema {
            relation,
            a_block,
            b_block,
            c_blocks: c_blocks.to_vec(),
            weight,
        };
        Self {
            subject_blocks: 4,
            object_blocks: 4,
            other_blocks: 5,
            block_size: 6,
            relations: 5,
            planted: vec![
                p(0, 0, 0, &[0], 1.0),
                p(0, 2, 3, &[3], 1.2),
                p(1, 1, 1, &[1, 2], 1.4),
                p(2, 2, 2, &[3], 1.1),
                p(2, 0, 1, &[4], 1.3),
                p(3, 3, 3, &[4], 1.2),
                p(3, 1, 0, &[0, 2], 1.0),
                p(4, 3, 2, &[1], 1.5),
            ],
            tuples_per_weight: 400,
            noise_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subject_blocks == 0 || self.object_blocks == 0 || self.other_blocks == 0 || self.block_size == 0 {
            return Err(Error::Config("block counts and block size must be positive".into()));
        }
        if self.relations == 0 {
            return Err(Error::Config("at least one relation is required".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!("noise rate {} outside [0, 1]", self.noise_rate)));
        }
        for (i, s) in self.planted.iter().enumerate() {
            let bad = s.relation >= self.relations
                || s.a_block >= self.subject_blocks
                || s.b_block >= self.object_blocks
                || s.c_blocks.is_empty()
                || s.c_blocks.len() > 2
                || s.c_blocks.iter().any(|&c| c >= self.other_blocks)
                || (s.c_blocks.len() == 2 && s.c_blocks[0] == s.c_blocks[1]);
            if bad {
                return Err(Error::Config(format!("planted schema {i} is out of bounds")));
            }
            if !(s.weight > 0.0 && s.weight.is_finite()) {
                return Err(Error::Config(format!("planted schema {i} needs a positive weight")));
            }
        }
        Ok(())
    }
}

pub fn subject_np(block: usize, i: usize) -> String {
    format!("subj{block}.{i}")
}

pub fn object_np(block: usize, i: usize) -> String {
    format!("obj{block}.{i}")
}

pub fn other_np(block: usize, i: usize) -> String {
    format!("oth{block}.{i}")
}

pub fn relation_name(p: usize) -> String {
    format!("rel{p}")
}

/// Block index encoded in a generated noun phrase (`"subj3.1"` → 3).
pub fn block_of(np: &str) -> Option<usize> {
    let rest = np.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.split('.').next()?.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub records: Vec<TupleRecord>,
    pub planted_tuples: usize,
    pub noise_tuples: usize,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    for s in &spec.planted {
        let n = (s.weight * spec.tuples_per_weight as f64).round() as usize;
        for _ in 0..n {
            let subject = subject_np(s.a_block, rng.random_range(0..spec.block_size));
            let object = object_np(s.b_block, rng.random_range(0..spec.block_size));
            let others: Vec<String> = s
                .c_blocks
                .iter()
                .map(|&c| other_np(c, rng.random_range(0..spec.block_size)))
                .collect();
            records.push(TupleRecord {
                subject,
                relation: relation_name(s.relation),
                object,
                others,
                count: 1,
            });
        }
    }
    let planted_tuples = records.len();
    let noise_tuples = (spec.noise_rate * planted_tuples as f64).round() as usize;
    for _ in 0..noise_tuples {
        let pick = |rng: &mut ChaCha8Rng, blocks: usize| (rng.random_range(0..blocks), rng.random_range(0..spec.block_size));
        let (sb, si) = pick(&mut rng, spec.subject_blocks);
        let (ob, oi) = pick(&mut rng, spec.object_blocks);
        let (xb, xi) = pick(&mut rng, spec.other_blocks);
        records.push(TupleRecord {
            subject: subject_np(sb, si),
            relation: relation_name(rng.random_range(0..spec.relations)),
            object: object_np(ob, oi),
            others: vec![other_np(xb, xi)],
            count: 1,
        });
    }
    records.shuffle(&mut rng);
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        records,
        planted_tuples,
        noise_tuples,
    })
}

/// Maps every factor column to the block holding most of its mass.
fn column_blocks(m: &DenseMatrix, terms: &indexmap::IndexSet<String>, blocks: usize) -> Vec<Option<usize>> {
    (0..m.cols())
        .map(|j| {
            let mut mass = vec![0.0; blocks];
            for (i, t) in terms.iter().enumerate() {
                if let Some(b) = block_of(t).filter(|&b| b < blocks) {
                    mass[b] += m.get(i, j);
                }
            }
            let (best, &w) = mass.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1))?;
            (w > 0.0).then_some(best)
        })
        .collect()
}

/// For each planted schema, the rank (0-based position in `induced`) of the
/// first induced schema with the same relation, the same A and B blocks and
/// exactly the planted set of C blocks, reading each column's block from
/// where its factor mass lies.
pub fn locate_planted(
    spec: &SyntheticSpec,
    f: &FactorSet,
    vocab: &Vocabulary,
    induced: &[InducedSchema],
) -> Vec<Option<usize>> {
    let a_blocks = column_blocks(&f.a, &vocab.subjects, spec.subject_blocks);
    let b_blocks = column_blocks(&f.b, &vocab.objects, spec.object_blocks);
    let c_blocks = column_blocks(&f.c, &vocab.others, spec.other_blocks);
    let relation_index: HashMap<String, usize> = (0..spec.relations).map(|p| (relation_name(p), p)).collect();
    spec.planted
        .iter()
        .map(|p| {
            let mut want_c = p.c_blocks.clone();
            want_c.sort_unstable();
            induced.iter().position(|s| {
                if relation_index.get(&s.relation_name) != Some(&p.relation) {
                    return false;
                }
                if a_blocks[s.a_col] != Some(p.a_block) || b_blocks[s.b_col] != Some(p.b_block) {
                    return false;
                }
                let mut got: Vec<Option<usize>> = s.c_cols.iter().map(|&c| c_blocks[c]).collect();
                got.sort_unstable();
                got == want_c.iter().map(|&c| Some(c)).collect::<Vec<_>>()
            })
        })
        .collect()
}
