use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hop_distance, TransitionGraph};
use crate::corpus::SplitDataset;
use crate::table::{thousands, Table};

pub const OUT_DEGREE_BASIS: &str = "edges / items with at least one outgoing edge";
pub const EDGE_WEIGHT_BASIS: &str = "mean raw transition count N(i,j) per edge";

/// Dataset and transition-graph statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_users: usize,
    pub num_items: usize,
    pub num_edges: usize,
    pub num_sources: usize,
    pub avg_seq_len: f64,
    pub avg_out_degree: f64,
    pub avg_edge_weight: f64,
    /// Hop radius -> percentage of test targets within that radius.
    pub coverage: BTreeMap<usize, f64>,
    pub out_degree_basis: String,
    pub edge_weight_basis: String,
}

/// Percentage of test users whose target lies within `k` hops of the last
/// context item, for each requested `k`.
///
/// Anchors without outgoing edges count as uncovered.
pub fn coverage_at_k(
    g: &TransitionGraph,
    split: &SplitDataset,
    ks: &[usize],
) -> BTreeMap<usize, f64> {
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let distances: Vec<Option<usize>> = split
        .users
        .par_iter()
        .map(|u| {
            let anchor = *u.test_context().last().expect("context nonempty");
            hop_distance(g, anchor, u.test_target(), max_k)
        })
        .collect();
    let n = split.num_users();
    ks.iter()
        .map(|&k| {
            let hits = distances.iter().filter(|d| d.is_some_and(|d| d <= k)).count();
            let pct = if n == 0 {
                0.0
            } else {
                100.0 * hits as f64 / n as f64
            };
            (k, pct)
        })
        .collect()
}

pub fn graph_stats(g: &TransitionGraph, split: &SplitDataset, ks: &[usize]) -> GraphStats {
    let num_edges = g.num_edges();
    let num_sources = g.num_sources();
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    GraphStats {
        num_users: split.num_users(),
        num_items: split.num_items(),
        num_edges,
        num_sources,
        avg_seq_len: split.avg_seq_len(),
        avg_out_degree: ratio(num_edges as f64, num_sources),
        avg_edge_weight: ratio(g.total_transitions() as f64, num_edges),
        coverage: coverage_at_k(g, split, ks),
        out_degree_basis: OUT_DEGREE_BASIS.to_string(),
        edge_weight_basis: EDGE_WEIGHT_BASIS.to_string(),
    }
}

impl GraphStats {
    pub fn table(&self, dataset: &str) -> Table {
        let mut headers = vec![
            "Dataset".to_string(),
            "#Users".into(),
            "#Items".into(),
            "#Edges".into(),
            "Avg. Seq. Len.".into(),
            "Avg. Out-Deg.".into(),
            "Avg. Edge W.".into(),
        ];
        headers.extend(self.coverage.keys().map(|k| format!("Cov@{k}")));
        let mut t = Table::new(headers);
        let mut row = vec![
            dataset.to_string(),
            thousands(self.num_users),
            thousands(self.num_items),
            thousands(self.num_edges),
            format!("{:.2}", self.avg_seq_len),
            format!("{:.2}", self.avg_out_degree),
            format!("{:.2}", self.avg_edge_weight),
        ];
        row.extend(self.coverage.values().map(|c| format!("{c:.2}%")));
        t.push(row);
        t
    }

    pub fn render_text(&self, dataset: &str) -> String {
        format!(
            "{}\nAvg. Out-Deg.: {}\nAvg. Edge W.: {}\n",
            self.table(dataset).render_text(),
            self.out_degree_basis,
            self.edge_weight_basis
        )
    }
}
