//! Benchmark auditing for sequential recommendation.
//!
//! The crate ingests interaction logs and item embeddings, builds the
//! item-transition graph of the training prefixes, and runs a set of
//! deliberately simple probes over it: the transition-graph heuristic
//! ([`tgh`]), semantic nearest neighbours, a last-item BPR model and their
//! fusion ([`baselines`]). Leave-one-out metrics ([`eval`]) and shortcut
//! diagnostics ([`diagnostics`]) summarize how much of a benchmark those
//! probes already solve.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the command-line tool.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ranking;
pub mod scalar;
pub mod table;
pub mod tgh;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Embeddings at the precision used by the CLI.
pub type Embeddings = corpus::EmbeddingMatrix<f64>;
pub type TghConfig = tgh::TghConfig<f64>;
pub type Recommendations = ranking::RankedList<f64>;
