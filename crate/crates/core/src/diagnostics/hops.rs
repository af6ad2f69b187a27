use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::eval::PredictionSet;
use crate::graph::{hop_distance, TransitionGraph, MAX_HOPS};
use crate::table::{percent, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecall {
    pub model: String,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopBucket {
    pub label: String,
    pub num_users: usize,
    pub recall: Vec<ModelRecall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopBucketReport {
    pub k: usize,
    pub max_hop: usize,
    /// Hops `1..=max_hop`, then the overflow bucket.
    pub buckets: Vec<HopBucket>,
}

/// Bucket index per test user: `hop - 1`, or `max_hop` when the target is
/// farther than `max_hop` or unreachable from the last context item.
pub fn hop_buckets(g: &TransitionGraph, split: &SplitDataset, max_hop: usize) -> Vec<usize> {
    split
        .users
        .par_iter()
        .map(|u| {
            u.test_context()
                .last()
                .and_then(|&a| hop_distance(g, a, u.test_target(), max_hop))
                .map_or(max_hop, |h| h - 1)
        })
        .collect()
}

pub fn overflow_label(max_hop: usize) -> String {
    format!(">{max_hop} or unreachable")
}

/// Recall@`k` of each prediction set restricted to users in each hop bucket.
pub fn recall_by_hop(
    g: &TransitionGraph,
    preds: &[PredictionSet],
    split: &SplitDataset,
    k: usize,
    max_hop: usize,
) -> Result<HopBucketReport> {
    if max_hop == 0 || max_hop > MAX_HOPS {
        return Err(Error::Config(format!("max_hop must be in 1..={MAX_HOPS}, got {max_hop}")));
    }
    for p in preds {
        if k == 0 || k > p.k_max || p.num_users() != split.num_users() {
            return Err(Error::Config(format!(
                "prediction set `{}` cannot be scored at cutoff {k}",
                p.model
            )));
        }
    }
    let assignment = hop_buckets(g, split, max_hop);
    let mut members = vec![Vec::new(); max_hop + 1];
    for (u, &b) in assignment.iter().enumerate() {
        members[b].push(u);
    }
    let buckets = members
        .iter()
        .enumerate()
        .map(|(b, users)| HopBucket {
            label: if b < max_hop {
                (b + 1).to_string()
            } else {
                overflow_label(max_hop)
            },
            num_users: users.len(),
            recall: preds
                .iter()
                .map(|p| {
                    let hits = users
                        .iter()
                        .filter(|&&u| {
                            p.rank_of(u, split.users[u].test_target()).is_some_and(|r| r <= k)
                        })
                        .count();
                    ModelRecall {
                        model: p.model.clone(),
                        recall: if users.is_empty() {
                            0.0
                        } else {
                            hits as f64 / users.len() as f64
                        },
                    }
                })
                .collect(),
        })
        .collect();
    Ok(HopBucketReport { k, max_hop, buckets })
}

impl HopBucketReport {
    pub fn table(&self) -> Table {
        let models: Vec<&str> = self
            .buckets
            .first()
            .map(|b| b.recall.iter().map(|r| r.model.as_str()).collect())
            .unwrap_or_default();
        let mut t = Table::new(
            ["Hop".to_string(), "Users".to_string()]
                .into_iter()
                .chain(models.iter().map(|m| format!("{m} R@{}", self.k))),
        );
        for b in &self.buckets {
            t.push(
                [b.label.clone(), b.num_users.to_string()]
                    .into_iter()
                    .chain(b.recall.iter().map(|r| percent(r.recall))),
            );
        }
        t
    }
}
