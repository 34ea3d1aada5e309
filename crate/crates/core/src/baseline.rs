//! HardClust: one ternary schema per relation from argument frequencies.
//!
//! For each relation the subjects, objects and other arguments seen with it
//! form three clusters; the most frequent members represent each argument.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::TupleRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpFrequency {
    pub np: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardClustSchema {
    pub relation: String,
    /// Full clusters, by descending frequency then noun phrase.
    pub subjects: Vec<NpFrequency>,
    pub objects: Vec<NpFrequency>,
    pub others: Vec<NpFrequency>,
    /// Number of representatives reported per cluster.
    pub k: usize,
}

impl HardClustSchema {
    pub fn subject_reps(&self) -> &[NpFrequency] {
        &self.subjects[..self.k.min(self.subjects.len())]
    }

    pub fn object_reps(&self) -> &[NpFrequency] {
        &self.objects[..self.k.min(self.objects.len())]
    }

    pub fn other_reps(&self) -> &[NpFrequency] {
        &self.others[..self.k.min(self.others.len())]
    }
}

fn ranked(counts: HashMap<&str, u64>) -> Vec<NpFrequency> {
    let mut v: Vec<NpFrequency> = counts
        .into_iter()
        .map(|(np, frequency)| NpFrequency {
            np: np.to_string(),
            frequency,
        })
        .collect();
    v.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.np.cmp(&b.np)));
    v
}

/// One schema per distinct relation, in first-appearance order. Frequencies
/// are weighted by each record's count.
pub fn hardclust(records: &[TupleRecord], k: usize) -> Vec<HardClustSchema> {
    type Counts<'a> = [HashMap<&'a str, u64>; 3];
    let mut per_rel: IndexMap<&str, Counts> = IndexMap::new();
    for r in records {
        let counts = per_rel.entry(r.relation.as_str()).or_default();
        *counts[0].entry(r.subject.as_str()).or_default() += r.count;
        *counts[1].entry(r.object.as_str()).or_default() += r.count;
        for o in &r.others {
            *counts[2].entry(o.as_str()).or_default() += r.count;
        }
    }
    per_rel
        .into_iter()
        .map(|(rel, [s, o, x])| HardClustSchema {
            relation: rel.to_string(),
            subjects: ranked(s),
            objects: ranked(o),
            others: ranked(x),
            k,
        })
        .collect()
}
