//! Ranked recommendation lists and deterministic top-K selection.
//!
//! Every ranking in the crate orders by descending score and breaks ties by
//! ascending item index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::corpus::ItemIndex;
use crate::scalar::Scalar;

/// Total order used by all rankers: higher score first, then lower index.
pub fn rank_order<T: Scalar>(a: (ItemIndex, T), b: (ItemIndex, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or_else(|| nan_last(a.1, b.1))
        .then(a.0.cmp(&b.0))
}

fn nan_last<T: Scalar>(a: T, b: T) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => Ordering::Equal,
    }
}

/// Items with scores, sorted by [`rank_order`], without duplicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList<T> {
    entries: Vec<(ItemIndex, T)>,
}

impl<T: Scalar> RankedList<T> {
    /// Sorts `entries`; the caller guarantees items are distinct.
    pub fn from_unsorted(mut entries: Vec<(ItemIndex, T)>) -> Self {
        entries.sort_by(|&a, &b| rank_order(a, b));
        debug_assert!(
            {
                let mut ids: Vec<_> = entries.iter().map(|e| e.0).collect();
                ids.sort_unstable();
                ids.windows(2).all(|w| w[0] != w[1])
            },
            "duplicate items in ranked list"
        );
        RankedList { entries }
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }

    pub fn entries(&self) -> &[(ItemIndex, T)] {
        &self.entries
    }

    pub fn items(&self) -> Vec<ItemIndex> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, item: ItemIndex) -> Option<T> {
        self.entries.iter().find(|e| e.0 == item).map(|e| e.1)
    }
}

struct HeapEntry<T>(ItemIndex, T);

impl<T: Scalar> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for HeapEntry<T> {}
impl<T: Scalar> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for HeapEntry<T> {
    // "greater" = ranks later, so the max-heap top is the current worst
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order((self.0, self.1), (other.0, other.1))
    }
}

/// Streaming top-K collector with the crate-wide tie rule.
pub struct TopK<T> {
    k: usize,
    heap: BinaryHeap<HeapEntry<T>>,
}

impl<T: Scalar> TopK<T> {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.saturating_add(1).min(1 << 16)),
        }
    }

    pub fn push(&mut self, item: ItemIndex, score: T) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(HeapEntry(item, score));
            return;
        }
        let worst = self.heap.peek().expect("heap is full");
        if rank_order((item, score), (worst.0, worst.1)) == Ordering::Less {
            self.heap.pop();
            self.heap.push(HeapEntry(item, score));
        }
    }

    pub fn into_sorted(self) -> Vec<(ItemIndex, T)> {
        let mut v: Vec<_> = self.heap.into_iter().map(|e| (e.0, e.1)).collect();
        v.sort_by(|&a, &b| rank_order(a, b));
        v
    }

    pub fn into_list(self) -> RankedList<T> {
        RankedList {
            entries: self.into_sorted(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_index() {
        let l = RankedList::from_unsorted(vec![(5, 1.0f64), (2, 1.0), (9, 2.0)]);
        assert_eq!(l.items(), vec![9, 2, 5]);
    }

    #[test]
    fn zero_k_collects_nothing() {
        let mut t = TopK::new(0);
        t.push(1, 1.0f32);
        assert!(t.into_sorted().is_empty());
    }

    proptest! {
        #[test]
        fn topk_matches_full_sort(scores in prop::collection::vec(-3i32..3, 0..60), k in 0usize..70) {
            // coarse scores force plenty of ties
            let mut top = TopK::new(k);
            for (i, &s) in scores.iter().enumerate() {
                top.push(i as ItemIndex, s as f64);
            }
            let mut all: Vec<(ItemIndex, f64)> =
                scores.iter().enumerate().map(|(i, &s)| (i as ItemIndex, s as f64)).collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(top.into_sorted(), all);
        }
    }
}
