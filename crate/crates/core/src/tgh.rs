//! Transition-graph heuristic.
//!
//! Starting from one or two recent anchor items, candidates are drawn from
//! the anchor's few-hop neighborhood in the transition graph. Each candidate
//! `c` at minimum distance `l` from anchor `s` scores
//!
//! ```text
//! score_s(c) = cos(e_s, e_c) + alpha * [l == 1] * w(s, c)
//! ```
//!
//! where `w` is the log-normalized edge weight. Each hop ring keeps only its
//! top-budget candidates; items reached more than once keep their best score.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, ItemIndex};
use crate::error::{Error, Result};
use crate::graph::{k_hop_neighborhood, TransitionGraph};
use crate::ranking::{rank_order, RankedList, TopK};
use crate::scalar::{dot, Scalar};

/// Longest supported budget list.
pub const MAX_BUDGET_HOPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    /// Distance from the end of the context: 0 = last item, 1 = second-last.
    pub offset: usize,
    /// Candidates kept per hop ring; entry 0 is hop 1.
    pub hop_budgets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TghConfig<T> {
    pub anchors: Vec<AnchorSpec>,
    /// Weight of the direct-edge bonus.
    pub alpha: T,
    pub exclude_anchor: bool,
    /// Drop items already in the visible context before budget selection.
    pub filter_history: bool,
    pub list_size: usize,
}

impl<T: Scalar> TghConfig<T> {
    /// Last item only, budgets (7, 2, 1).
    pub fn tgh1() -> Self {
        TghConfig {
            anchors: vec![AnchorSpec {
                offset: 0,
                hop_budgets: vec![7, 2, 1],
            }],
            alpha: T::lit(0.5),
            exclude_anchor: true,
            filter_history: false,
            list_size: 10,
        }
    }

    /// Last item with budgets (5, 1) and second-last item with (3, 1).
    pub fn tgh2() -> Self {
        TghConfig {
            anchors: vec![
                AnchorSpec {
                    offset: 0,
                    hop_budgets: vec![5, 1],
                },
                AnchorSpec {
                    offset: 1,
                    hop_budgets: vec![3, 1],
                },
            ],
            alpha: T::lit(0.5),
            exclude_anchor: true,
            filter_history: false,
            list_size: 10,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "tgh1" => Some(Self::tgh1()),
            "tgh2" => Some(Self::tgh2()),
            _ => None,
        }
    }

    pub fn budget_sum(&self) -> usize {
        self.anchors.iter().flat_map(|a| &a.hop_budgets).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::Config("TGH needs at least one anchor".into()));
        }
        for a in &self.anchors {
            if a.hop_budgets.is_empty() || a.hop_budgets.len() > MAX_BUDGET_HOPS {
                return Err(Error::Config(format!(
                    "anchor at offset {} needs 1..={MAX_BUDGET_HOPS} hop budgets, got {}",
                    a.offset,
                    a.hop_budgets.len()
                )));
            }
        }
        if !self.alpha.is_finite() || self.alpha < T::zero() {
            return Err(Error::Config(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate<T> {
    pub item: ItemIndex,
    pub score: T,
    pub anchor_offset: usize,
    pub hop: usize,
}

/// Cosine between normalized rows plus the bonus for direct successors.
///
/// `hop` is the candidate's minimum distance, so `hop > 1` never earns the
/// bonus.
pub fn score_candidate<T: Scalar>(
    emb: &EmbeddingMatrix<T>,
    g: &TransitionGraph,
    anchor: ItemIndex,
    cand: ItemIndex,
    hop: usize,
    alpha: T,
) -> T {
    let cos = dot(emb.row(anchor), emb.row(cand));
    if hop == 1 {
        cos + alpha * g.edge_weight::<T>(anchor, cand)
    } else {
        cos
    }
}

/// Budgeted retrieval around a single anchor.
///
/// Returns an empty list when the anchor has no outgoing edges.
pub fn retrieve_for_anchor<T: Scalar>(
    g: &TransitionGraph,
    emb: &EmbeddingMatrix<T>,
    anchor: ItemIndex,
    budgets: &[usize],
    alpha: T,
    exclude_anchor: bool,
) -> Vec<ScoredCandidate<T>> {
    retrieve(g, emb, anchor, 0, budgets, alpha, exclude_anchor, &HashSet::new())
}

#[allow(clippy::too_many_arguments)]
fn retrieve<T: Scalar>(
    g: &TransitionGraph,
    emb: &EmbeddingMatrix<T>,
    anchor: ItemIndex,
    anchor_offset: usize,
    budgets: &[usize],
    alpha: T,
    exclude_anchor: bool,
    skip: &HashSet<ItemIndex>,
) -> Vec<ScoredCandidate<T>> {
    if budgets.is_empty() || !g.has_successors(anchor) {
        return Vec::new();
    }
    let hood = k_hop_neighborhood(g, anchor, budgets.len(), None)
        .expect("budget length is validated");
    let mut out = Vec::new();
    for (h, &budget) in budgets.iter().enumerate() {
        let hop = h + 1;
        let mut top = TopK::new(budget);
        let self_loop = hop == 1 && !exclude_anchor && g.count(anchor, anchor) > 0;
        let members = hood.ring(hop).iter().copied().chain(self_loop.then_some(anchor));
        for cand in members.filter(|c| !skip.contains(c)) {
            top.push(cand, score_candidate(emb, g, anchor, cand, hop, alpha));
        }
        out.extend(top.into_sorted().into_iter().map(|(item, score)| ScoredCandidate {
            item,
            score,
            anchor_offset,
            hop,
        }));
    }
    out
}

/// A configured heuristic bound to a graph and normalized embeddings.
#[derive(Debug, Clone)]
pub struct Tgh<'a, T> {
    pub config: TghConfig<T>,
    graph: &'a TransitionGraph,
    emb: &'a EmbeddingMatrix<T>,
}

impl<'a, T: Scalar> Tgh<'a, T> {
    pub fn new(
        config: TghConfig<T>,
        graph: &'a TransitionGraph,
        emb: &'a EmbeddingMatrix<T>,
    ) -> Result<Self> {
        config.validate()?;
        if !emb.is_normalized() {
            return Err(Error::NotNormalized);
        }
        if emb.num_items() != graph.num_items() {
            return Err(Error::Config(format!(
                "embedding rows ({}) do not match catalog size ({})",
                emb.num_items(),
                graph.num_items()
            )));
        }
        Ok(Tgh { config, graph, emb })
    }

    /// All retained candidates after max-score dedup, best first.
    pub fn candidates(&self, context: &[ItemIndex]) -> Vec<ScoredCandidate<T>> {
        let skip: HashSet<ItemIndex> = if self.config.filter_history {
            context.iter().copied().collect()
        } else {
            HashSet::new()
        };
        let mut best: HashMap<ItemIndex, ScoredCandidate<T>> = HashMap::new();
        for spec in &self.config.anchors {
            let Some(pos) = context.len().checked_sub(spec.offset + 1) else {
                continue;
            };
            let anchor = context[pos];
            for c in retrieve(
                self.graph,
                self.emb,
                anchor,
                spec.offset,
                &spec.hop_budgets,
                self.config.alpha,
                self.config.exclude_anchor,
                &skip,
            ) {
                best.entry(c.item)
                    .and_modify(|b| {
                        if c.score > b.score {
                            *b = c;
                        }
                    })
                    .or_insert(c);
            }
        }
        let mut out: Vec<_> = best.into_values().collect();
        out.sort_by(|a, b| rank_order((a.item, a.score), (b.item, b.score)));
        out
    }

    pub fn recommend(&self, context: &[ItemIndex]) -> RankedList<T> {
        let mut out = self.candidates(context);
        out.truncate(self.config.list_size);
        RankedList::from_unsorted(out.into_iter().map(|c| (c.item, c.score)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_rows(rows: &[&[f64]]) -> EmbeddingMatrix<f64> {
        let dim = rows[0].len();
        EmbeddingMatrix::from_rows(dim, rows.concat()).normalize_rows()
    }

    #[test]
    fn presets_are_frozen() {
        let t1 = TghConfig::<f64>::tgh1();
        assert_eq!(t1.anchors, vec![AnchorSpec { offset: 0, hop_budgets: vec![7, 2, 1] }]);
        assert_eq!(t1.alpha, 0.5);
        assert_eq!(t1.budget_sum(), 10);
        let t2 = TghConfig::<f32>::tgh2();
        assert_eq!(t2.anchors[0].hop_budgets, vec![5, 1]);
        assert_eq!(t2.anchors[1], AnchorSpec { offset: 1, hop_budgets: vec![3, 1] });
        assert_eq!(t2.alpha, 0.5);
        assert!(TghConfig::<f64>::preset("tgh3").is_none());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = TghConfig::<f64>::tgh1();
        c.anchors[0].hop_budgets = vec![1, 1, 1, 1];
        assert!(c.validate().is_err());
        let mut c = TghConfig::<f64>::tgh1();
        c.alpha = -0.1;
        assert!(c.validate().is_err());
        let mut c = TghConfig::<f64>::tgh1();
        c.anchors.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn score_examples() {
        let g = TransitionGraph::from_pairs(3, vec![(0, 1), (1, 2)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(score_candidate(&emb, &g, 0, 1, 1, 0.5), 1.5);
        assert_eq!(score_candidate(&emb, &g, 0, 2, 2, 0.5), 0.0);

        // cos 0.6, w = 2/3
        let mut pairs = vec![(0, 1); 3];
        pairs.extend(vec![(0, 2); 7]);
        let g = TransitionGraph::from_pairs(3, pairs);
        let emb = unit_rows(&[&[1.0, 0.0], &[0.6, 0.8], &[0.0, 1.0]]);
        assert_abs_diff_eq!(
            score_candidate(&emb, &g, 0, 1, 1, 0.5),
            0.6 + 0.5 * (2.0 / 3.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn chain_one_per_hop() {
        let g = TransitionGraph::from_pairs(4, vec![(0, 1), (1, 2), (2, 3)]);
        let emb = unit_rows(&[&[1.0, 0.1, 0.0], &[0.2, 1.0, 0.0], &[0.0, 0.3, 1.0], &[0.5, 0.5, 0.5]]);
        let got: Vec<(ItemIndex, usize)> = retrieve_for_anchor(&g, &emb, 0, &[1, 1, 1], 0.5, true)
            .iter()
            .map(|c| (c.item, c.hop))
            .collect();
        assert_eq!(got, vec![(1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn zero_budget_skips_hop() {
        let g = TransitionGraph::from_pairs(5, vec![(0, 1), (0, 2), (1, 3), (2, 4)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let got = retrieve_for_anchor(&g, &emb, 0, &[0, 2], 0.5, true);
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|c| c.hop == 2));
    }

    #[test]
    fn cold_anchor_gives_nothing() {
        let g = TransitionGraph::from_pairs(3, vec![(0, 1)]);
        let emb = unit_rows(&[&[1.0], &[1.0], &[1.0]]);
        assert!(retrieve_for_anchor(&g, &emb, 2, &[7, 2, 1], 0.5, true).is_empty());
        let tgh = Tgh::new(TghConfig::tgh2(), &g, &emb).unwrap();
        assert!(tgh.recommend(&[2, 1, 2]).is_empty());
    }

    #[test]
    fn self_loop_only_when_anchor_allowed() {
        let g = TransitionGraph::from_pairs(2, vec![(0, 0), (0, 1)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let excl = retrieve_for_anchor(&g, &emb, 0, &[5], 0.5, true);
        assert_eq!(excl.iter().map(|c| c.item).collect::<Vec<_>>(), vec![1]);
        let incl = retrieve_for_anchor(&g, &emb, 0, &[5], 0.5, false);
        assert_eq!(incl.iter().map(|c| c.item).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(incl[0].score, 1.5);
    }

    #[test]
    fn max_dedup_across_anchors() {
        // anchor 0 (last) reaches 2 directly; anchor 1 (second-last) too
        let g = TransitionGraph::from_pairs(4, vec![(0, 2), (1, 2), (1, 3)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8], &[0.0, 1.0]]);
        let tgh = Tgh::new(TghConfig::tgh2(), &g, &emb).unwrap();
        let cands = tgh.candidates(&[1, 0]);
        let twos: Vec<_> = cands.iter().filter(|c| c.item == 2).collect();
        assert_eq!(twos.len(), 1);
        // from anchor 0: 0.6 + 0.5; from anchor 1: 0.8 + 0.5 * w(1,2) = 0.8 + 0.5
        assert_abs_diff_eq!(twos[0].score, 1.3, epsilon = 1e-12);
        assert_eq!(twos[0].anchor_offset, 1);
    }

    #[test]
    fn history_filter_is_opt_in() {
        let g = TransitionGraph::from_pairs(3, vec![(0, 1), (0, 2)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let mut cfg = TghConfig::tgh1();
        let plain = Tgh::new(cfg.clone(), &g, &emb).unwrap().recommend(&[1, 0]);
        assert_eq!(plain.items(), vec![1, 2]);
        cfg.filter_history = true;
        let filtered = Tgh::new(cfg, &g, &emb).unwrap().recommend(&[1, 0]);
        assert_eq!(filtered.items(), vec![2]);
    }

    #[test]
    fn short_context_skips_second_anchor() {
        let g = TransitionGraph::from_pairs(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        let emb = unit_rows(&[&[1.0, 0.0], &[0.9, 0.1], &[0.1, 0.9], &[0.5, 0.5]]);
        let full = Tgh::new(TghConfig::tgh2(), &g, &emb).unwrap();
        let mut last_half = TghConfig::tgh2();
        last_half.anchors.truncate(1);
        let half = Tgh::new(last_half, &g, &emb).unwrap();
        assert_eq!(full.recommend(&[0]), half.recommend(&[0]));
    }

    #[test]
    fn requires_normalized_embeddings() {
        let g = TransitionGraph::from_pairs(2, vec![(0, 1)]);
        let emb = EmbeddingMatrix::from_rows(1, vec![2.0f64, 3.0]);
        assert!(matches!(
            Tgh::new(TghConfig::tgh1(), &g, &emb),
            Err(Error::NotNormalized)
        ));
    }
}
