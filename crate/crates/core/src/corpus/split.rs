use super::sequences::{ItemIndex, SequenceDataset, Vocab};
use crate::error::{Error, Result};

/// One user's leave-one-out view over the full filtered sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitUser {
    pub user_id: String,
    sequence: Vec<ItemIndex>,
}

impl SplitUser {
    /// Sequence with the last two items removed.
    pub fn train_prefix(&self) -> &[ItemIndex] {
        &self.sequence[..self.sequence.len() - 2]
    }

    pub fn valid_target(&self) -> ItemIndex {
        self.sequence[self.sequence.len() - 2]
    }

    pub fn test_target(&self) -> ItemIndex {
        self.sequence[self.sequence.len() - 1]
    }

    /// Everything before the test target.
    pub fn test_context(&self) -> &[ItemIndex] {
        &self.sequence[..self.sequence.len() - 1]
    }

    pub fn full_sequence(&self) -> &[ItemIndex] {
        &self.sequence
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDataset {
    pub users: Vec<SplitUser>,
    pub vocab: Vocab,
}

impl SplitDataset {
    pub fn num_items(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Mean length of the full filtered sequences.
    pub fn avg_seq_len(&self) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        let total: usize = self.users.iter().map(|u| u.sequence.len()).sum();
        total as f64 / self.users.len() as f64
    }

    pub fn train_prefixes(&self) -> impl Iterator<Item = &[ItemIndex]> {
        self.users.iter().map(SplitUser::train_prefix)
    }
}

/// Leave-one-out split: last item tests, second-to-last validates.
pub fn split_leave_one_out(ds: &SequenceDataset) -> Result<SplitDataset> {
    let users = ds
        .users
        .iter()
        .map(|u| {
            if u.items.len() < 3 {
                return Err(Error::SequenceTooShort {
                    user: u.user_id.clone(),
                    len: u.items.len(),
                });
            }
            Ok(SplitUser {
                user_id: u.user_id.clone(),
                sequence: u.items.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitDataset {
        users,
        vocab: ds.vocab.clone(),
    })
}
