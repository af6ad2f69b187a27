use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::eval::PredictionSet;
use crate::table::Table;

/// Ids of users whose test target ranks within the top `k`.
pub fn correct_set(p: &PredictionSet, split: &SplitDataset, k: usize) -> Result<BTreeSet<String>> {
    if k == 0 || k > p.k_max {
        return Err(Error::Config(format!(
            "cutoff {k} outside 1..={} for `{}`",
            p.k_max, p.model
        )));
    }
    Ok(split
        .users
        .iter()
        .enumerate()
        .filter(|(u, su)| p.rank_of(*u, su.test_target()).is_some_and(|r| r <= k))
        .map(|(_, su)| su.user_id.clone())
        .collect())
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets count as identical.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub k: usize,
    pub models: Vec<String>,
    /// Row-major, `values[i][j]` compares `models[i]` with `models[j]`.
    pub values: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    pub fn compute(preds: &[PredictionSet], split: &SplitDataset, k: usize) -> Result<Self> {
        let sets = preds
            .iter()
            .map(|p| correct_set(p, split, k))
            .collect::<Result<Vec<_>>>()?;
        let n = sets.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = jaccard(&sets[i], &sets[j]);
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Ok(OverlapMatrix {
            k,
            models: preds.iter().map(|p| p.model.clone()).collect(),
            values,
        })
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.models.iter().position(|m| m == a)?;
        let j = self.models.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(std::iter::once("Jaccard".to_string()).chain(self.models.iter().cloned()));
        for (m, row) in self.models.iter().zip(&self.values) {
            t.push(std::iter::once(m.clone()).chain(row.iter().map(|v| format!("{v:.3}"))));
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_leave_one_out, ItemIndex, SequenceDataset};
    use proptest::prelude::*;

    fn split5() -> SplitDataset {
        split_leave_one_out(&SequenceDataset::from_id_sequences(
            (0..5).map(|u| (format!("u{u}"), vec!["a".to_string(), "b".into(), format!("t{u}")])),
        ))
        .unwrap()
    }

    fn preds(name: &str, lists: Vec<Vec<ItemIndex>>) -> PredictionSet {
        PredictionSet {
            model: name.into(),
            k_max: 10,
            lists,
        }
    }

    #[test]
    fn correct_sets() {
        let s = split5();
        // targets t0..t4 are indices 2..6
        let all = preds("all", (2..7).map(|t| vec![t]).collect());
        assert_eq!(correct_set(&all, &s, 1).unwrap().len(), 5);
        let none = preds("none", vec![vec![0]; 5]);
        assert!(correct_set(&none, &s, 10).unwrap().is_empty());
        let mixed = preds("mixed", vec![vec![0], vec![3], vec![1], vec![0, 5], vec![]]);
        let got = correct_set(&mixed, &s, 10).unwrap();
        assert_eq!(got, BTreeSet::from(["u1".to_string(), "u3".to_string()]));
        assert!(correct_set(&mixed, &s, 11).is_err());
    }

    #[test]
    fn jaccard_examples() {
        let s = |v: &[u32]| v.iter().copied().collect::<BTreeSet<u32>>();
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[1, 2])), 1.0);
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[3])), 0.0);
        assert_eq!(jaccard(&s(&[1, 2, 3]), &s(&[2, 3, 4])), 0.5);
        assert_eq!(jaccard(&s(&[]), &s(&[])), 1.0);
        assert_eq!(jaccard(&s(&[]), &s(&[1])), 0.0);
    }

    #[test]
    fn identical_predictions_overlap_fully() {
        let s = split5();
        let a = preds("a", vec![vec![2], vec![0], vec![4], vec![], vec![]]);
        let b = PredictionSet { model: "b".into(), ..a.clone() };
        let m = OverlapMatrix::compute(&[a, b], &s, 10).unwrap();
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert!(m.table().render_text().contains("1.000"));
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_bounded(
            a in prop::collection::btree_set(0u8..20, 0..15),
            b in prop::collection::btree_set(0u8..20, 0..15),
        ) {
            let ab = jaccard(&a, &b);
            prop_assert_eq!(ab, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
    }
}
