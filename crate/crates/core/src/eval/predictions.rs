use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::Recommender;
use crate::corpus::{ItemIndex, SplitDataset};
use crate::error::{Error, Result};

/// Placeholder for predicted ids outside the catalog. It keeps its rank
/// position but can never match a target.
pub const UNKNOWN_ITEM: ItemIndex = ItemIndex::MAX;

/// Top-K lists for every test user, aligned with `split.users`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub model: String,
    pub k_max: usize,
    pub lists: Vec<Vec<ItemIndex>>,
}

impl PredictionSet {
    /// 1-based rank of `target` in user `u`'s list.
    pub fn rank_of(&self, u: usize, target: ItemIndex) -> Option<usize> {
        self.lists[u].iter().position(|&i| i == target).map(|p| p + 1)
    }

    pub fn num_users(&self) -> usize {
        self.lists.len()
    }
}

/// Runs `model` on every user's test context.
///
/// Users are processed on the ambient rayon pool; the result does not depend
/// on the number of threads.
pub fn run_model(
    model: &dyn Recommender,
    split: &SplitDataset,
    k_max: usize,
) -> Result<PredictionSet> {
    let name = model.name();
    let started = Instant::now();
    let lists = split
        .users
        .par_iter()
        .map(|u| {
            let fail = |message: String| Error::ModelFailure {
                model: name.clone(),
                user: u.user_id.clone(),
                message,
            };
            let mut list = model
                .recommend(u.test_context(), k_max)
                .map_err(|e| fail(e.to_string()))?;
            list.truncate(k_max);
            let mut seen = HashSet::with_capacity(list.len());
            if let Some(dup) = list.iter().find(|i| !seen.insert(**i)) {
                return Err(fail(format!("item index {dup} recommended twice")));
            }
            Ok(list)
        })
        .collect::<Result<Vec<_>>>()?;
    let secs = started.elapsed().as_secs_f64();
    log::info!(
        "{name}: {} users in {secs:.2}s ({:.0} users/s)",
        lists.len(),
        lists.len() as f64 / secs.max(1e-9)
    );
    Ok(PredictionSet {
        model: name,
        k_max,
        lists,
    })
}

/// Writes `user_id<TAB>item1,item2,...` lines in split order.
pub fn write_predictions(path: impl AsRef<Path>, p: &PredictionSet, split: &SplitDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (u, list) in split.users.iter().zip(&p.lists) {
        out.push_str(&u.user_id);
        out.push('\t');
        let ids: Vec<&str> = list
            .iter()
            .filter(|&&i| i != UNKNOWN_ITEM)
            .map(|&i| split.vocab.decode(i))
            .collect();
        out.push_str(&ids.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a prediction file produced by any model.
///
/// Users absent from the file get an empty list; unknown item ids keep their
/// position as [`UNKNOWN_ITEM`]. The model name defaults to the file stem.
pub fn read_predictions(
    path: impl AsRef<Path>,
    split: &SplitDataset,
    model: Option<&str>,
) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let user_pos: HashMap<&str, usize> = split
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.user_id.as_str(), i))
        .collect();
    let mut lists: Vec<Option<Vec<ItemIndex>>> = vec![None; split.num_users()];
    let mut unknown_items = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::BadRow {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            message,
        };
        let (user, items) = line.split_once('\t').unwrap_or((line, ""));
        let &u = user_pos
            .get(user.trim())
            .ok_or_else(|| Error::UnknownUser(user.trim().to_string()))?;
        if lists[u].is_some() {
            return Err(bad(format!("user `{}` listed twice", user.trim())));
        }
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for id in items.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !seen.insert(id) {
                return Err(bad(format!("item `{id}` appears twice")));
            }
            list.push(split.vocab.encode(id).unwrap_or_else(|| {
                unknown_items += 1;
                UNKNOWN_ITEM
            }));
        }
        lists[u] = Some(list);
    }
    let missing = lists.iter().filter(|l| l.is_none()).count();
    if missing > 0 {
        log::warn!("{}: {missing} users missing, treated as empty lists", path.display());
    }
    if unknown_items > 0 {
        log::warn!("{}: {unknown_items} predicted items not in the catalog", path.display());
    }
    let lists: Vec<Vec<ItemIndex>> = lists.into_iter().map(Option::unwrap_or_default).collect();
    let k_max = lists.iter().map(Vec::len).max().unwrap_or(0);
    let model = model.map(str::to_string).unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".into())
    });
    Ok(PredictionSet { model, k_max, lists })
}
