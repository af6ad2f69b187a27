//! Directed item-transition graph built from training prefixes.

mod hops;
mod io;
mod stats;

pub use hops::{hop_distance, k_hop_neighborhood, HopNeighborhood, MAX_HOPS};
pub use io::{decode_graph, encode_graph, read_graph, write_graph, SRTG_MAGIC, SRTG_VERSION};
pub use stats::{coverage_at_k, graph_stats, GraphStats};

use crate::corpus::{ItemIndex, SplitDataset};
use crate::scalar::Scalar;

/// Transition counts in compressed sparse row layout.
///
/// Row `i` holds the successors of item `i` sorted by ascending target index
/// with their counts `N(i, j) >= 1`. The per-source maximum count is cached so
/// that normalized weights are a single division.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGraph {
    num_items: usize,
    offsets: Vec<usize>,
    targets: Vec<ItemIndex>,
    counts: Vec<u32>,
    max_count: Vec<u32>,
}

impl TransitionGraph {
    /// Counts every adjacent pair of every training prefix.
    pub fn build(split: &SplitDataset) -> Self {
        Self::from_sequences(split.num_items(), split.train_prefixes())
    }

    pub fn from_sequences<'a>(
        num_items: usize,
        sequences: impl IntoIterator<Item = &'a [ItemIndex]>,
    ) -> Self {
        let mut pairs: Vec<(ItemIndex, ItemIndex)> = Vec::new();
        for seq in sequences {
            pairs.extend(seq.windows(2).map(|w| (w[0], w[1])));
        }
        Self::from_pairs(num_items, pairs)
    }

    /// Builds from a multiset of `(source, target)` transitions.
    pub fn from_pairs(num_items: usize, mut pairs: Vec<(ItemIndex, ItemIndex)>) -> Self {
        pairs.sort_unstable();
        let mut offsets = vec![0usize; num_items + 1];
        let mut targets = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        let mut last: Option<(ItemIndex, ItemIndex)> = None;
        for (s, t) in pairs {
            assert!(
                (s as usize) < num_items && (t as usize) < num_items,
                "edge ({s}, {t}) outside catalog of {num_items} items"
            );
            if last == Some((s, t)) {
                *counts.last_mut().expect("edge pushed") += 1;
            } else {
                targets.push(t);
                counts.push(1);
                offsets[s as usize + 1] += 1;
                last = Some((s, t));
            }
        }
        for i in 0..num_items {
            offsets[i + 1] += offsets[i];
        }
        Self::from_csr(num_items, offsets, targets, counts)
    }

    pub(crate) fn from_csr(
        num_items: usize,
        offsets: Vec<usize>,
        targets: Vec<ItemIndex>,
        counts: Vec<u32>,
    ) -> Self {
        let max_count = (0..num_items)
            .map(|i| counts[offsets[i]..offsets[i + 1]].iter().copied().max().unwrap_or(0))
            .collect();
        TransitionGraph {
            num_items,
            offsets,
            targets,
            counts,
            max_count,
        }
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn out_degree(&self, i: ItemIndex) -> usize {
        let i = i as usize;
        if i >= self.num_items {
            return 0;
        }
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Number of items with at least one outgoing edge.
    pub fn num_sources(&self) -> usize {
        self.max_count.iter().filter(|&&m| m > 0).count()
    }

    /// An item participates as an anchor only if it has successors.
    pub fn has_successors(&self, i: ItemIndex) -> bool {
        self.out_degree(i) > 0
    }

    pub fn successors(&self, i: ItemIndex) -> &[ItemIndex] {
        let i = i as usize;
        if i >= self.num_items {
            return &[];
        }
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `(target, count)` pairs in ascending target order.
    pub fn edges_from(&self, i: ItemIndex) -> impl Iterator<Item = (ItemIndex, u32)> + '_ {
        let range = if (i as usize) < self.num_items {
            self.offsets[i as usize]..self.offsets[i as usize + 1]
        } else {
            0..0
        };
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.counts[range].iter().copied())
    }

    /// `N(i, j)`, zero when there is no edge.
    pub fn count(&self, i: ItemIndex, j: ItemIndex) -> u32 {
        if i as usize >= self.num_items {
            return 0;
        }
        let lo = self.offsets[i as usize];
        match self.successors(i).binary_search(&j) {
            Ok(pos) => self.counts[lo + pos],
            Err(_) => 0,
        }
    }

    pub fn max_count(&self, i: ItemIndex) -> u32 {
        self.max_count.get(i as usize).copied().unwrap_or(0)
    }

    /// `log(1 + N(i,j)) / max_j' log(1 + N(i,j'))`, or zero without an edge.
    ///
    /// The maximum-count edge of every source evaluates to exactly one.
    pub fn edge_weight<T: Scalar>(&self, i: ItemIndex, j: ItemIndex) -> T {
        self.weight_for_count(i, self.count(i, j))
    }

    pub(crate) fn weight_for_count<T: Scalar>(&self, i: ItemIndex, count: u32) -> T {
        if count == 0 {
            return T::zero();
        }
        let max = self.max_count(i);
        if count == max {
            return T::one();
        }
        let num = T::from_u32(count).expect("count fits").ln_1p();
        let den = T::from_u32(max).expect("count fits").ln_1p();
        num / den
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[ItemIndex], &[u32]) {
        (&self.offsets, &self.targets, &self.counts)
    }
}
