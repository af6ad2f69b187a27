use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::interactions::InteractionLog;
use crate::error::{Error, Result};

/// Dense index of an item in the filtered catalog.
pub type ItemIndex = u32;

/// Bijection between opaque item ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, ItemIndex>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the existing index or assigns the next one.
    pub fn intern(&mut self, id: &str) -> ItemIndex {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as ItemIndex;
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn encode(&self, id: &str) -> Option<ItemIndex> {
        self.index.get(id).copied()
    }

    pub fn decode(&self, idx: ItemIndex) -> &str {
        &self.ids[idx as usize]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl FromIterator<String> for Vocab {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = Vocab::new();
        for id in iter {
            v.intern(&id);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSequence {
    pub user_id: String,
    pub items: Vec<ItemIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Preprocess {
    pub min_len: usize,
    /// Keep only the most recent `max_len` items per user.
    pub max_len: Option<usize>,
    /// Item-side frequency threshold; off unless set.
    pub min_item_count: Option<usize>,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            min_len: 3,
            max_len: None,
            min_item_count: None,
        }
    }
}

/// Chronological per-user sequences over a dense item vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDataset {
    pub users: Vec<UserSequence>,
    pub vocab: Vocab,
}

impl SequenceDataset {
    pub fn num_items(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Builds a dataset directly from already ordered id sequences.
    pub fn from_id_sequences<U, I>(seqs: impl IntoIterator<Item = (U, Vec<I>)>) -> Self
    where
        U: Into<String>,
        I: AsRef<str>,
    {
        let mut vocab = Vocab::new();
        let users = seqs
            .into_iter()
            .map(|(u, items)| UserSequence {
                user_id: u.into(),
                items: items.iter().map(|i| vocab.intern(i.as_ref())).collect(),
            })
            .collect();
        SequenceDataset { users, vocab }
    }
}

/// Groups, orders, filters and truncates raw interactions.
///
/// Users appear in order of first occurrence in the log; items are indexed
/// in order of first occurrence in the final sequences. Timestamp ties keep
/// file order.
pub fn build_sequences(log: &InteractionLog, cfg: &Preprocess) -> Result<SequenceDataset> {
    if cfg.min_len < 3 {
        return Err(Error::Config(format!(
            "min_len must be at least 3, got {}",
            cfg.min_len
        )));
    }
    if let Some(max) = cfg.max_len {
        if max < cfg.min_len {
            return Err(Error::Config(format!(
                "max_len {max} is smaller than min_len {}",
                cfg.min_len
            )));
        }
    }

    let mut user_slot: HashMap<&str, usize> = HashMap::new();
    let mut grouped: Vec<(&str, Vec<(i64, &str)>)> = Vec::new();
    for rec in &log.records {
        let slot = *user_slot.entry(&rec.user_id).or_insert_with(|| {
            grouped.push((&rec.user_id, Vec::new()));
            grouped.len() - 1
        });
        grouped[slot].1.push((rec.timestamp, &rec.item_id));
    }
    for (_, events) in &mut grouped {
        // stable: ties keep input order
        events.sort_by_key(|&(t, _)| t);
    }
    let mut seqs: Vec<(&str, Vec<&str>)> = grouped
        .into_iter()
        .map(|(u, ev)| (u, ev.into_iter().map(|(_, i)| i).collect()))
        .collect();

    loop {
        let users_before = seqs.len();
        let mut removed_items = false;
        if let Some(min_count) = cfg.min_item_count {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for (_, items) in &seqs {
                for &i in items {
                    *counts.entry(i).or_default() += 1;
                }
            }
            for (_, items) in &mut seqs {
                let before = items.len();
                items.retain(|i| counts[i] >= min_count);
                removed_items |= items.len() != before;
            }
        }
        seqs.retain(|(_, items)| items.len() >= cfg.min_len);
        if !removed_items && seqs.len() == users_before {
            break;
        }
    }

    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut vocab = Vocab::new();
    let users = seqs
        .into_iter()
        .map(|(u, items)| {
            let start = cfg
                .max_len
                .map_or(0, |max| items.len().saturating_sub(max));
            UserSequence {
                user_id: u.to_string(),
                items: items[start..].iter().map(|i| vocab.intern(i)).collect(),
            }
        })
        .collect();
    Ok(SequenceDataset { users, vocab })
}
