//! Diagnostic baselines: semantic nearest neighbour, last-item BPR, their
//! late fusion, and a transition-count ranker.

mod id_last;

pub use id_last::{
    bpr_gradients, bpr_objective, id_last_rank, load_checkpoint, save_checkpoint, train_id_last,
    train_on_pairs, BprHyper, IdLastModel, NegativeSampler,
};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, ItemIndex};
use crate::graph::TransitionGraph;
use crate::ranking::{RankedList, TopK};
use crate::scalar::{dot, Scalar};

/// Full-catalog cosine ranking against the anchor's embedding.
///
/// The anchor and every excluded item are removed before truncation.
pub fn sem_nn_rank<T: Scalar>(
    emb: &EmbeddingMatrix<T>,
    anchor: ItemIndex,
    k: usize,
    exclude: &HashSet<ItemIndex>,
) -> RankedList<T> {
    debug_assert!(emb.is_normalized());
    let a = emb.row(anchor);
    let mut top = TopK::new(k);
    for j in 0..emb.num_items() as ItemIndex {
        if j != anchor && !exclude.contains(&j) {
            top.push(j, dot(a, emb.row(j)));
        }
    }
    top.into_list()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSpec {
    pub id_weight: f64,
    pub sem_weight: f64,
}

impl Default for FusionSpec {
    fn default() -> Self {
        FusionSpec {
            id_weight: 1.0,
            sem_weight: 1.0,
        }
    }
}

/// Late fusion `id_weight * id_score + sem_weight * cosine`, no rescaling.
pub fn id_plus_sem_rank<T: Scalar>(
    m: &IdLastModel<T>,
    emb: &EmbeddingMatrix<T>,
    anchor: ItemIndex,
    k: usize,
    fusion: FusionSpec,
    exclude: &HashSet<ItemIndex>,
) -> RankedList<T> {
    assert_eq!(m.num_items(), emb.num_items(), "catalog size mismatch");
    let (wi, ws) = (T::lit(fusion.id_weight), T::lit(fusion.sem_weight));
    let id_row = m.anchor_row(anchor);
    let sem_row = emb.row(anchor);
    let mut top = TopK::new(k);
    for j in 0..emb.num_items() as ItemIndex {
        if j == anchor || exclude.contains(&j) {
            continue;
        }
        // a zero weight drops its term entirely so the reduction identities
        // hold bit for bit
        let mut s = T::zero();
        if fusion.id_weight != 0.0 {
            s = s + wi * dot(id_row, m.target_row(j));
        }
        if fusion.sem_weight != 0.0 {
            s = s + ws * dot(sem_row, emb.row(j));
        }
        top.push(j, s);
    }
    top.into_list()
}

/// Successors of the anchor ranked by raw transition count.
pub fn count_last_rank(g: &TransitionGraph, anchor: ItemIndex, k: usize) -> RankedList<f64> {
    let mut top = TopK::new(k);
    for (j, c) in g.edges_from(anchor) {
        if j != anchor {
            top.push(j, c as f64);
        }
    }
    top.into_list()
}
