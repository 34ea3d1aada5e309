//! Grid search over ranks and regularization weights, scored by average FIT.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BackoffTensors;
use crate::error::{Error, Result};
use crate::factorization::{factorize, FitReport, Ranks, Regularizers, SolverOptions};

/// Hyper-parameters reported for the three evaluation corpora
/// (Shootings, NYT Sports, MUC).
pub const REFERENCE_CONFIGS: [(&str, Ranks, Regularizers); 3] = [
    (
        "shootings",
        Ranks { r1: 10, r2: 20, r3: 15 },
        Regularizers { lambda_a: 0.3, lambda_b: 0.1, lambda_c: 0.7 },
    ),
    (
        "nyt-sports",
        Ranks { r1: 20, r2: 15, r3: 15 },
        Regularizers { lambda_a: 0.9, lambda_b: 0.5, lambda_c: 0.7 },
    ),
    (
        "muc",
        Ranks { r1: 15, r2: 12, r3: 12 },
        Regularizers { lambda_a: 0.7, lambda_b: 0.7, lambda_c: 0.4 },
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub rank_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub r1_values: Option<Vec<usize>>,
    pub r2_values: Option<Vec<usize>>,
    pub r3_values: Option<Vec<usize>>,
    pub lambda_a_values: Option<Vec<f64>>,
    pub lambda_b_values: Option<Vec<f64>>,
    pub lambda_c_values: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rank_values: (5..=20).collect(),
            lambda_values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            r1_values: None,
            r2_values: None,
            r3_values: None,
            lambda_a_values: None,
            lambda_b_values: None,
            lambda_c_values: None,
        }
    }
}

/// One grid point in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub ranks: Ranks,
    pub reg: Regularizers,
}

impl GridSpec {
    /// A grid containing exactly one configuration.
    pub fn single(ranks: Ranks, reg: Regularizers) -> Self {
        Self {
            rank_values: vec![],
            lambda_values: vec![],
            r1_values: Some(vec![ranks.r1]),
            r2_values: Some(vec![ranks.r2]),
            r3_values: Some(vec![ranks.r3]),
            lambda_a_values: Some(vec![reg.lambda_a]),
            lambda_b_values: Some(vec![reg.lambda_b]),
            lambda_c_values: Some(vec![reg.lambda_c]),
        }
    }

    fn axes(&self) -> ([&[usize]; 3], [&[f64]; 3]) {
        fn pick<'a, T>(axis: &'a Option<Vec<T>>, shared: &'a [T]) -> &'a [T] {
            axis.as_deref().unwrap_or(shared)
        }
        let (r, l) = (&self.rank_values[..], &self.lambda_values[..]);
        (
            [pick(&self.r1_values, r), pick(&self.r2_values, r), pick(&self.r3_values, r)],
            [
                pick(&self.lambda_a_values, l),
                pick(&self.lambda_b_values, l),
                pick(&self.lambda_c_values, l),
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (ranks, lambdas) = self.axes();
        for (axis, vals) in ["r1", "r2", "r3"].iter().zip(ranks) {
            if vals.is_empty() {
                return Err(Error::Config(format!("grid axis {axis} is empty")));
            }
            if vals.contains(&0) {
                return Err(Error::Config(format!("grid axis {axis} contains rank 0")));
            }
        }
        for (axis, vals) in ["lambda_a", "lambda_b", "lambda_c"].iter().zip(lambdas) {
            if vals.is_empty() {
                return Err(Error::Config(format!("grid axis {axis} is empty")));
            }
            if let Some(v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Config(format!("grid axis {axis} value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// All cells, `r1` outermost and `λc` innermost.
    pub fn cells(&self) -> Vec<GridCell> {
        let ([r1s, r2s, r3s], [las, lbs, lcs]) = self.axes();
        let mut out = Vec::new();
        for &r1 in r1s {
            for &r2 in r2s {
                for &r3 in r3s {
                    for &la in las {
                        for &lb in lbs {
                            for &lc in lcs {
                                out.push(GridCell {
                                    index: out.len(),
                                    ranks: Ranks::new(r1, r2, r3),
                                    reg: Regularizers::new(la, lb, lc),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Seed for grid cell `index` under `master`.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(index as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub ranks: Ranks,
    pub reg: Regularizers,
    pub seed: u64,
    pub report: FitReport,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub index: usize,
    pub ranks: Ranks,
    pub reg: Regularizers,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub skipped: Vec<SkippedCell>,
    /// Position of the best entry in `entries`.
    pub winner: usize,
}

impl GridResult {
    pub fn best(&self) -> &GridEntry {
        &self.entries[self.winner]
    }
}

/// Key ordering used to break AvgFIT ties: smaller configuration wins.
fn config_key(e: &GridEntry) -> [f64; 6] {
    [
        e.ranks.r1 as f64,
        e.ranks.r2 as f64,
        e.ranks.r3 as f64,
        e.reg.lambda_a,
        e.reg.lambda_b,
        e.reg.lambda_c,
    ]
}

fn beats(challenger: &GridEntry, incumbent: &GridEntry) -> bool {
    match challenger.report.avg_fit.total_cmp(&incumbent.report.avg_fit) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let (c, i) = (config_key(challenger), config_key(incumbent));
            c.iter().zip(&i).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less)
        }
    }
}

/// Factorizes every admissible cell (in parallel on the current rayon pool)
/// with seed [`cell_seed`]`(opts.seed, index)` and picks the best AvgFIT.
/// Cells whose ranks exceed the vocabulary are skipped.
pub fn grid_search(tensors: &BackoffTensors, spec: &GridSpec, opts: &SolverOptions) -> Result<GridResult> {
    spec.validate()?;
    opts.validate()?;
    let (n1, n2, n3, _) = tensors.vocab.sizes();
    let (runnable, skipped): (Vec<GridCell>, Vec<GridCell>) = spec
        .cells()
        .into_iter()
        .partition(|c| c.ranks.validate(n1, n2, n3).is_ok());
    let skipped: Vec<SkippedCell> = skipped
        .into_iter()
        .map(|c| {
            let reason = c.ranks.validate(n1, n2, n3).unwrap_err().to_string();
            log::info!("skipping grid cell {} ({:?}): {reason}", c.index, c.ranks);
            SkippedCell {
                index: c.index,
                ranks: c.ranks,
                reg: c.reg,
                reason,
            }
        })
        .collect();
    if runnable.is_empty() {
        return Err(Error::Config("every grid cell exceeds the vocabulary sizes".into()));
    }
    let entries: Vec<GridEntry> = runnable
        .par_iter()
        .map(|cell| {
            let seed = cell_seed(opts.seed, cell.index);
            let cell_opts = SolverOptions { seed, ..*opts };
            let start = Instant::now();
            let (_, report) = factorize(tensors, cell.ranks, cell.reg, &cell_opts)?;
            Ok(GridEntry {
                index: cell.index,
                ranks: cell.ranks,
                reg: cell.reg,
                seed,
                report,
                elapsed: start.elapsed(),
            })
        })
        .collect::<Result<_>>()?;
    let mut winner = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        if beats(e, &entries[winner]) {
            winner = i;
        }
    }
    Ok(GridResult {
        entries,
        skipped,
        winner,
    })
}
