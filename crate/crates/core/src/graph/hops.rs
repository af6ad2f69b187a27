use std::collections::HashSet;

use super::TransitionGraph;
use crate::corpus::ItemIndex;
use crate::error::{Error, Result};

/// Largest supported neighborhood radius.
pub const MAX_HOPS: usize = 4;

/// Items reachable from an anchor, grouped by minimum hop distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopNeighborhood {
    pub anchor: ItemIndex,
    /// `rings[l - 1]` holds the items at distance `l`, ascending.
    rings: Vec<Vec<ItemIndex>>,
    /// False when the anchor has no outgoing edges (cold start).
    pub anchor_in_graph: bool,
}

impl HopNeighborhood {
    pub fn ring(&self, hop: usize) -> &[ItemIndex] {
        hop.checked_sub(1)
            .and_then(|h| self.rings.get(h))
            .map_or(&[], Vec::as_slice)
    }

    pub fn num_hops(&self) -> usize {
        self.rings.len()
    }

    pub fn distance(&self, item: ItemIndex) -> Option<usize> {
        self.rings
            .iter()
            .position(|r| r.binary_search(&item).is_ok())
            .map(|h| h + 1)
    }

    /// `(item, hop)` in hop order, ascending item within a hop.
    pub fn iter(&self) -> impl Iterator<Item = (ItemIndex, usize)> + '_ {
        self.rings
            .iter()
            .enumerate()
            .flat_map(|(h, r)| r.iter().map(move |&i| (i, h + 1)))
    }

    pub fn len(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Breadth-first expansion along directed edges up to `k` hops.
///
/// The anchor itself is never recorded. With `cap`, each ring stops growing
/// once it holds `cap` items; frontier nodes and their successors are visited
/// in ascending index order so the truncation is deterministic.
pub fn k_hop_neighborhood(
    g: &TransitionGraph,
    anchor: ItemIndex,
    k: usize,
    cap: Option<usize>,
) -> Result<HopNeighborhood> {
    if !(1..=MAX_HOPS).contains(&k) {
        return Err(Error::Config(format!(
            "hop radius must be in 1..={MAX_HOPS}, got {k}"
        )));
    }
    let mut hood = HopNeighborhood {
        anchor,
        rings: Vec::with_capacity(k),
        anchor_in_graph: g.has_successors(anchor),
    };
    if !hood.anchor_in_graph {
        return Ok(hood);
    }
    let cap = cap.unwrap_or(usize::MAX);
    let mut visited: HashSet<ItemIndex> = HashSet::from([anchor]);
    let mut frontier = vec![anchor];
    for _ in 0..k {
        let mut ring = Vec::new();
        'expand: for &node in &frontier {
            for &next in g.successors(node) {
                if ring.len() >= cap {
                    break 'expand;
                }
                if visited.insert(next) {
                    ring.push(next);
                }
            }
        }
        if ring.is_empty() {
            break;
        }
        ring.sort_unstable();
        frontier = ring.clone();
        hood.rings.push(ring);
    }
    Ok(hood)
}

/// Minimum number of hops from `anchor` to `target`, if within `max_hop`.
///
/// A target equal to the anchor is reached by a self-loop or by a cycle
/// back through the graph.
pub fn hop_distance(
    g: &TransitionGraph,
    anchor: ItemIndex,
    target: ItemIndex,
    max_hop: usize,
) -> Option<usize> {
    if max_hop == 0 {
        return None;
    }
    let mut visited: HashSet<ItemIndex> = HashSet::from([anchor]);
    let mut frontier = vec![anchor];
    for hop in 1..=max_hop {
        let mut next = Vec::new();
        for &node in &frontier {
            for &succ in g.successors(node) {
                if succ == target {
                    return Some(hop);
                }
                if visited.insert(succ) {
                    next.push(succ);
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain() -> TransitionGraph {
        TransitionGraph::from_pairs(4, vec![(0, 1), (1, 2), (2, 3)])
    }

    #[test]
    fn chain_distances() {
        let h = k_hop_neighborhood(&chain(), 0, 3, None).unwrap();
        assert_eq!(h.iter().collect::<Vec<_>>(), vec![(1, 1), (2, 2), (3, 3)]);
        assert_eq!(hop_distance(&chain(), 0, 3, 3), Some(3));
        assert_eq!(hop_distance(&chain(), 0, 3, 2), None);
    }

    #[test]
    fn diamond_keeps_minimum_distance() {
        let g = TransitionGraph::from_pairs(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        let h = k_hop_neighborhood(&g, 0, 2, None).unwrap();
        assert_eq!(h.iter().collect::<Vec<_>>(), vec![(1, 1), (2, 1), (3, 2)]);
    }

    #[test]
    fn anchor_excluded_even_on_cycles() {
        let g = TransitionGraph::from_pairs(2, vec![(0, 0), (0, 1), (1, 0)]);
        let h = k_hop_neighborhood(&g, 0, 3, None).unwrap();
        assert_eq!(h.iter().collect::<Vec<_>>(), vec![(1, 1)]);
        assert_eq!(hop_distance(&g, 0, 0, 3), Some(1));
        let g = TransitionGraph::from_pairs(2, vec![(0, 1), (1, 0)]);
        assert_eq!(hop_distance(&g, 0, 0, 3), Some(2));
        assert_eq!(hop_distance(&g, 0, 0, 1), None);
    }

    #[test]
    fn cold_anchor_is_signalled() {
        let h = k_hop_neighborhood(&chain(), 3, 2, None).unwrap();
        assert!(!h.anchor_in_graph);
        assert!(h.is_empty());
        let h = k_hop_neighborhood(&chain(), 77, 2, None).unwrap();
        assert!(!h.anchor_in_graph);
    }

    #[test]
    fn radius_bounds() {
        assert!(k_hop_neighborhood(&chain(), 0, 0, None).is_err());
        assert!(k_hop_neighborhood(&chain(), 0, 5, None).is_err());
        assert!(k_hop_neighborhood(&chain(), 0, 4, None).is_ok());
    }

    #[test]
    fn cap_truncates_rings_in_sorted_order() {
        let g = TransitionGraph::from_pairs(
            8,
            vec![(0, 5), (0, 3), (0, 1), (1, 7), (3, 6), (5, 4)],
        );
        let h = k_hop_neighborhood(&g, 0, 2, Some(2)).unwrap();
        assert_eq!(h.ring(1), &[1, 3]);
        // only frontier {1, 3} is expanded
        assert_eq!(h.ring(2), &[6, 7]);
    }

    proptest! {
        #[test]
        fn hop_distance_agrees_with_neighborhood(
            pairs in prop::collection::vec((0u32..15, 0u32..15), 0..60),
            anchor in 0u32..15,
        ) {
            let g = TransitionGraph::from_pairs(15, pairs);
            let h = k_hop_neighborhood(&g, anchor, 3, None).unwrap();
            for t in 0..15u32 {
                if t == anchor { continue; }
                prop_assert_eq!(hop_distance(&g, anchor, t, 3), h.distance(t));
            }
        }
    }
}
