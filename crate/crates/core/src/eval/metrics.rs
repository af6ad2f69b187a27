use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::table::{percent, Table};

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

fn check_k(p: &PredictionSet, split: &SplitDataset, k: usize) -> Result<()> {
    if p.num_users() != split.num_users() {
        return Err(Error::Config(format!(
            "prediction set `{}` covers {} users, split has {}",
            p.model,
            p.num_users(),
            split.num_users()
        )));
    }
    if k == 0 || k > p.k_max {
        return Err(Error::Config(format!(
            "cutoff {k} outside 1..={} for `{}`",
            p.k_max, p.model
        )));
    }
    Ok(())
}

/// Fraction of users whose test target ranks within the top `k`.
pub fn recall_at_k(p: &PredictionSet, split: &SplitDataset, k: usize) -> Result<f64> {
    check_k(p, split, k)?;
    if split.num_users() == 0 {
        return Ok(0.0);
    }
    let hits = split
        .users
        .iter()
        .enumerate()
        .filter(|(u, su)| p.rank_of(*u, su.test_target()).is_some_and(|r| r <= k))
        .count();
    Ok(hits as f64 / split.num_users() as f64)
}

/// Mean of `1 / log2(rank + 1)` over users whose target ranks within `k`
/// (ranks are 1-based). With a single relevant item the ideal DCG is 1.
pub fn ndcg_at_k(p: &PredictionSet, split: &SplitDataset, k: usize) -> Result<f64> {
    check_k(p, split, k)?;
    if split.num_users() == 0 {
        return Ok(0.0);
    }
    let total = split
        .users
        .iter()
        .enumerate()
        .filter_map(|(u, su)| p.rank_of(u, su.test_target()))
        .filter(|&r| r <= k)
        .fold(0.0, |acc, r| acc + 1.0 / ((r + 1) as f64).log2());
    Ok(total / split.num_users() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub num_users: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn evaluate(p: &PredictionSet, split: &SplitDataset, ks: &[usize]) -> Result<Self> {
        let rows = ks
            .iter()
            .map(|&k| {
                Ok(MetricsRow {
                    model: p.model.clone(),
                    k,
                    recall: recall_at_k(p, split, k)?,
                    ndcg: ndcg_at_k(p, split, k)?,
                    num_users: split.num_users(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(MetricsTable { rows })
    }

    pub fn merge(tables: impl IntoIterator<Item = MetricsTable>) -> Self {
        MetricsTable {
            rows: tables.into_iter().flat_map(|t| t.rows).collect(),
        }
    }

    pub fn get(&self, model: &str, k: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.model == model && r.k == k)
    }

    pub fn models(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model.as_str()) {
                out.push(&r.model);
            }
        }
        out
    }

    fn ks(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// One row per model, `R@k`/`N@k` percentage columns.
    pub fn table(&self) -> Table {
        let ks = self.ks();
        let mut headers = vec!["Model".to_string()];
        for k in &ks {
            headers.push(format!("R@{k}"));
            headers.push(format!("N@{k}"));
        }
        headers.push("Users".into());
        let mut t = Table::new(headers);
        for model in self.models() {
            let mut row = vec![model.to_string()];
            let mut users = 0;
            for &k in &ks {
                match self.get(model, k) {
                    Some(r) => {
                        row.push(percent(r.recall));
                        row.push(percent(r.ndcg));
                        users = r.num_users;
                    }
                    None => {
                        row.push("-".into());
                        row.push("-".into());
                    }
                }
            }
            row.push(users.to_string());
            t.push(row);
        }
        t
    }

    pub fn render_text(&self) -> String {
        if self.rows.is_empty() {
            return "no models evaluated\n".into();
        }
        format!("{}(percent)\n", self.table().render_text())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Writes `metrics.json` and `metrics.txt` into `dir`.
pub fn emit_report(tables: &[MetricsTable], dir: impl AsRef<Path>) -> Result<MetricsTable> {
    let dir = dir.as_ref();
    let merged = MetricsTable::merge(tables.iter().cloned());
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    write("metrics.json", merged.to_json()?)?;
    write("metrics.txt", merged.render_text())?;
    Ok(merged)
}
