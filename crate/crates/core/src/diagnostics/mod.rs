//! Shortcut diagnostics: who gets which users right, where the targets sit
//! in the graph, and a consolidated per-dataset audit.

mod audit;
mod hops;
mod overlap;

pub use audit::{
    audit, sha256_hex, AuditConfig, AuditInputs, AuditReport, ExternalComparison, FeatureSmoothness,
    LowBranching, Provenance, ShortHistory, ShortcutAxes, HISTORY_SUBSTITUTION_NOTE,
};
pub use hops::{hop_buckets, overflow_label, recall_by_hop, HopBucket, HopBucketReport, ModelRecall};
pub use overlap::{correct_set, jaccard, OverlapMatrix};
