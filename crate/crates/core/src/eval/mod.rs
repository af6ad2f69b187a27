//! Leave-one-out evaluation: model adapters, prediction files and metrics.

mod metrics;
mod predictions;

pub use metrics::{emit_report, ndcg_at_k, recall_at_k, MetricsRow, MetricsTable, DEFAULT_KS};
pub use predictions::{read_predictions, run_model, write_predictions, PredictionSet, UNKNOWN_ITEM};

use std::collections::HashSet;

use crate::baselines::{count_last_rank, id_last_rank, id_plus_sem_rank, sem_nn_rank, FusionSpec, IdLastModel};
use crate::corpus::{EmbeddingMatrix, ItemIndex};
use crate::error::Result;
use crate::graph::TransitionGraph;
use crate::scalar::Scalar;
use crate::tgh::Tgh;

/// Anything that turns a visible context into a ranked item list.
pub trait Recommender: Sync {
    fn name(&self) -> String;
    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>>;
}

/// Closure-backed recommender, handy for tests and ad-hoc probes.
pub struct FnRecommender<F> {
    name: String,
    f: F,
}

impl<F> FnRecommender<F>
where
    F: Fn(&[ItemIndex], usize) -> Result<Vec<ItemIndex>> + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnRecommender { name: name.into(), f }
    }
}

impl<F> Recommender for FnRecommender<F>
where
    F: Fn(&[ItemIndex], usize) -> Result<Vec<ItemIndex>> + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        (self.f)(context, k)
    }
}

fn last(context: &[ItemIndex]) -> Option<ItemIndex> {
    context.last().copied()
}

pub struct TghModel<'a, T> {
    pub name: String,
    pub tgh: Tgh<'a, T>,
}

impl<T: Scalar> Recommender for TghModel<'_, T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    // list size comes from the config; `k` only truncates further
    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        let mut items = self.tgh.recommend(context).items();
        items.truncate(k);
        Ok(items)
    }
}

pub struct SemNn<'a, T> {
    pub emb: &'a EmbeddingMatrix<T>,
}

impl<T: Scalar> Recommender for SemNn<'_, T> {
    fn name(&self) -> String {
        "semnn".into()
    }

    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        Ok(last(context)
            .map(|a| sem_nn_rank(self.emb, a, k, &HashSet::new()).items())
            .unwrap_or_default())
    }
}

pub struct IdLast<'a, T> {
    pub model: &'a IdLastModel<T>,
}

impl<T: Scalar> Recommender for IdLast<'_, T> {
    fn name(&self) -> String {
        "idlast".into()
    }

    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        Ok(last(context)
            .map(|a| id_last_rank(self.model, a, k, &HashSet::new()).items())
            .unwrap_or_default())
    }
}

pub struct IdSem<'a, T> {
    pub model: &'a IdLastModel<T>,
    pub emb: &'a EmbeddingMatrix<T>,
    pub fusion: FusionSpec,
}

impl<T: Scalar> Recommender for IdSem<'_, T> {
    fn name(&self) -> String {
        "idsem".into()
    }

    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        Ok(last(context)
            .map(|a| id_plus_sem_rank(self.model, self.emb, a, k, self.fusion, &HashSet::new()).items())
            .unwrap_or_default())
    }
}

pub struct CountLast<'a> {
    pub graph: &'a TransitionGraph,
}

impl Recommender for CountLast<'_> {
    fn name(&self) -> String {
        "count-last".into()
    }

    fn recommend(&self, context: &[ItemIndex], k: usize) -> Result<Vec<ItemIndex>> {
        Ok(last(context)
            .map(|a| count_last_rank(self.graph, a, k).items())
            .unwrap_or_default())
    }
}
