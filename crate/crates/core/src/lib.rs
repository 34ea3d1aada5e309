//! Higher-order relation schema induction from OpenIE-style tuples.
//!
//! The pipeline:
//!
//! 1. [`corpus`] parses tab-separated tuples, splits 5-tuples, keeps the most
//!    frequent relations and builds the three back-off tensors `X¹, X², X³`.
//! 2. [`factorization`] jointly factorizes them with shared non-negative
//!    factors `A` (subjects), `B` (objects), `C` (other arguments) and one
//!    Tucker2 core per tensor.
//! 3. [`schema_miner`] reads each relation's core slices as a tripartite graph
//!    over factor columns, finds triangles, and merges triangles sharing an
//!    `(A, B)` edge into n-ary schemata.
//!
//! [`model_selection`] grid-searches ranks and regularizers by average FIT,
//! [`baseline`] implements the frequency-based HardClust comparison, and
//! [`synth`] generates corpora with planted schemata.

pub mod baseline;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod factorization;
pub mod io;
pub mod model_selection;
pub mod schema_miner;
pub mod sparse_tensor;
pub mod sum;
pub mod synth;

pub use corpus::{BackoffTensors, TupleRecord, Vocabulary};
pub use dense::{DenseMatrix, DenseTensor3};
pub use error::{Error, ErrorKind, Result};
pub use factorization::{FactorSet, FitReport, Ranks, Regularizers, SolverOptions};
pub use schema_miner::{InducedSchema, MinerOptions};
pub use sparse_tensor::{Mode, SparseTensor3};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
