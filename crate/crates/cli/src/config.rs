//! Run configuration: loaded from an optional JSON file, then overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use nary_schema::model_selection::GridSpec;
use nary_schema::synth::SyntheticSpec;
use nary_schema::{Error, MinerOptions, Ranks, Regularizers, Result, SolverOptions};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOP_RELATIONS: usize = 50;
pub const DEFAULT_HARDCLUST_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Tuple TSV read by `ingest` and `hardclust`.
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Back-off tensors; defaults to `<out_dir>/backoff.jsonl`.
    pub tensors: Option<PathBuf>,
    /// Factor set; defaults to `<out_dir>/factors.bin`.
    pub factors: Option<PathBuf>,
    pub top_relations: usize,
    pub lowercase: bool,
    pub strict: bool,
    /// Fixed-rank mode. Exclusive with `grid`.
    pub ranks: Option<Ranks>,
    pub reg: Regularizers,
    pub grid: Option<GridSpec>,
    pub solver: SolverOptions,
    pub miner: MinerOptions,
    pub hardclust_k: usize,
    pub synth: Option<SyntheticSpec>,
    pub threads: Option<usize>,
    /// Add wall-clock seconds to grid.csv (breaks byte-identical reruns).
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out_dir: None,
            tensors: None,
            factors: None,
            top_relations: DEFAULT_TOP_RELATIONS,
            lowercase: false,
            strict: false,
            ranks: None,
            reg: Regularizers::default(),
            grid: None,
            solver: SolverOptions::default(),
            miner: MinerOptions::default(),
            hardclust_k: DEFAULT_HARDCLUST_K,
            synth: None,
            threads: None,
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_relations == 0 {
            return Err(Error::Config("top_relations must be at least 1".into()));
        }
        if self.hardclust_k == 0 {
            return Err(Error::Config("hardclust_k must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.ranks.is_some() && self.grid.is_some() {
            return Err(Error::Config("fixed ranks and a grid are mutually exclusive".into()));
        }
        if let Some(r) = self.ranks {
            if r.r1 == 0 || r.r2 == 0 || r.r3 == 0 {
                return Err(Error::Config(format!("ranks must be positive, got {r:?}")));
            }
        }
        self.reg.validate()?;
        self.solver.validate()?;
        self.miner.validate()?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir.as_deref().ok_or_else(|| Error::Config("an output directory (--out) is required".into()))
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("an input file (--input) is required".into()))
    }

    pub fn tensors_path(&self) -> Result<PathBuf> {
        match &self.tensors {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join("backoff.jsonl")),
        }
    }

    pub fn factors_path(&self) -> Result<PathBuf> {
        match &self.factors {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join("factors.bin")),
        }
    }
}
