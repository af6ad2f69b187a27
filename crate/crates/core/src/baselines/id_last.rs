//! Last-item ID model trained with Bayesian personalized ranking.
//!
//! Each item owns two vectors: one used when it is the last context item
//! (anchor role) and one used when it is the candidate (target role). The
//! score of target `t` after anchor `a` is `anchor[a] . target[t]`. Training
//! pairs are all adjacent `(i, j)` transitions of the train prefixes; every
//! pair draws `negatives` items `k != j` and takes a gradient ascent step on
//! `ln sigmoid(x_ij - x_ik)`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    align_to_vocab, decode_binary, encode_binary, AlignOptions, ItemIndex, SplitDataset, Vocab,
};
use crate::error::{Error, Result};
use crate::ranking::{RankedList, TopK};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeSampler {
    Uniform,
    /// Proportional to how often an item is a training target.
    Popularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BprHyper {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub seed: u64,
    pub sampler: NegativeSampler,
}

impl Default for BprHyper {
    fn default() -> Self {
        BprHyper {
            dim: 64,
            learning_rate: 0.05,
            epochs: 30,
            negatives: 5,
            seed: 42,
            sampler: NegativeSampler::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdLastModel<T> {
    pub hyper: BprHyper,
    num_items: usize,
    anchor: Vec<T>,
    target: Vec<T>,
}

/// `sigmoid(-x)`, written to stay finite for large `|x|`.
fn sigmoid_neg<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        let e = (-x).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + x.exp())
    }
}

/// `ln sigmoid(x) = -softplus(-x)`.
fn log_sigmoid<T: Scalar>(x: T) -> T {
    let neg = -x;
    -(neg.max(T::zero()) + (-neg.abs()).exp().ln_1p())
}

/// BPR objective `ln sigmoid(a . (t_pos - t_neg))` for one triple.
pub fn bpr_objective<T: Scalar>(anchor: &[T], pos: &[T], neg: &[T]) -> T {
    log_sigmoid(dot(anchor, pos) - dot(anchor, neg))
}

/// Gradients of [`bpr_objective`] with respect to the anchor, positive and
/// negative rows.
pub fn bpr_gradients<T: Scalar>(anchor: &[T], pos: &[T], neg: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let g = sigmoid_neg(dot(anchor, pos) - dot(anchor, neg));
    let ga = pos.iter().zip(neg).map(|(&p, &n)| g * (p - n)).collect();
    let gp = anchor.iter().map(|&a| g * a).collect();
    let gn = anchor.iter().map(|&a| -g * a).collect();
    (ga, gp, gn)
}

struct NegativeDraw {
    cumulative: Option<Vec<u64>>,
    num_items: usize,
}

impl NegativeDraw {
    fn new(sampler: NegativeSampler, num_items: usize, pairs: &[(ItemIndex, ItemIndex)]) -> Self {
        let cumulative = (sampler == NegativeSampler::Popularity).then(|| {
            let mut freq = vec![0u64; num_items];
            for &(_, j) in pairs {
                freq[j as usize] += 1;
            }
            let mut acc = 0u64;
            freq.iter()
                .map(|&f| {
                    // +1 smoothing keeps every item reachable
                    acc += f + 1;
                    acc
                })
                .collect()
        });
        NegativeDraw {
            cumulative,
            num_items,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, positive: ItemIndex) -> ItemIndex {
        loop {
            let k = match &self.cumulative {
                None => rng.gen_range(0..self.num_items) as ItemIndex,
                Some(cum) => {
                    let r = rng.gen_range(0..*cum.last().expect("nonempty catalog"));
                    cum.partition_point(|&c| c <= r) as ItemIndex
                }
            };
            if k != positive {
                return k;
            }
        }
    }
}

/// Trains the model single-threaded; identical seeds give identical tables.
pub fn train_id_last<T: Scalar>(split: &SplitDataset, hp: &BprHyper) -> Result<IdLastModel<T>> {
    let pairs: Vec<(ItemIndex, ItemIndex)> = split
        .train_prefixes()
        .flat_map(|p| p.windows(2).map(|w| (w[0], w[1])))
        .collect();
    train_on_pairs(split.num_items(), &pairs, hp)
}

pub fn train_on_pairs<T: Scalar>(
    num_items: usize,
    pairs: &[(ItemIndex, ItemIndex)],
    hp: &BprHyper,
) -> Result<IdLastModel<T>> {
    if hp.dim == 0 || !hp.learning_rate.is_finite() || hp.learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "BPR needs dim > 0 and a positive learning rate, got dim {} and rate {}",
            hp.dim, hp.learning_rate
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Config(
            "no adjacent transitions in the training prefixes".into(),
        ));
    }
    let dim = hp.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let bound = 0.1 / (dim as f64).sqrt();
    let mut init = |n: usize| -> Vec<T> {
        (0..n)
            .map(|_| T::lit(rng.gen_range(-bound..=bound)))
            .collect()
    };
    let mut anchor = init(num_items * dim);
    let mut target = init(num_items * dim);

    let sampler = NegativeDraw::new(hp.sampler, num_items, pairs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let negatives = if num_items > 1 { hp.negatives } else { 0 };
    let mut diff = vec![T::zero(); dim];

    for epoch in 0..hp.epochs {
        let lr = T::lit(hp.learning_rate * (1.0 - epoch as f64 / hp.epochs as f64));
        order.shuffle(&mut rng);
        let mut loss = 0.0f64;
        for &p in &order {
            let (i, j) = pairs[p];
            let (i, j) = (i as usize, j as usize);
            for _ in 0..negatives {
                let k = sampler.draw(&mut rng, j as ItemIndex) as usize;
                let a_row = &anchor[i * dim..(i + 1) * dim];
                for d in 0..dim {
                    diff[d] = target[j * dim + d] - target[k * dim + d];
                }
                let x = dot(a_row, &diff);
                loss -= log_sigmoid(x).to_f64().unwrap_or(f64::NAN);
                let step = lr * sigmoid_neg(x);
                for d in 0..dim {
                    let a = anchor[i * dim + d];
                    anchor[i * dim + d] = a + step * diff[d];
                    target[j * dim + d] = target[j * dim + d] + step * a;
                    target[k * dim + d] = target[k * dim + d] - step * a;
                }
            }
        }
        let mean = loss / (pairs.len() * negatives.max(1)) as f64;
        log::debug!("bpr epoch {epoch}: loss {mean:.5}");
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
    }
    if anchor.iter().chain(&target).any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            epoch: hp.epochs,
            loss: f64::NAN,
        });
    }
    Ok(IdLastModel {
        hyper: hp.clone(),
        num_items,
        anchor,
        target,
    })
}

impl<T: Scalar> IdLastModel<T> {
    pub fn from_tables(hyper: BprHyper, anchor: Vec<T>, target: Vec<T>) -> Self {
        assert_eq!(anchor.len(), target.len());
        assert_eq!(anchor.len() % hyper.dim, 0);
        IdLastModel {
            num_items: anchor.len() / hyper.dim,
            hyper,
            anchor,
            target,
        }
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn anchor_row(&self, i: ItemIndex) -> &[T] {
        let d = self.hyper.dim;
        &self.anchor[i as usize * d..(i as usize + 1) * d]
    }

    pub fn target_row(&self, i: ItemIndex) -> &[T] {
        let d = self.hyper.dim;
        &self.target[i as usize * d..(i as usize + 1) * d]
    }

    pub fn score(&self, anchor: ItemIndex, target: ItemIndex) -> T {
        dot(self.anchor_row(anchor), self.target_row(target))
    }

    pub fn anchor_table(&self) -> &[T] {
        &self.anchor
    }

    pub fn target_table(&self) -> &[T] {
        &self.target
    }
}

/// Full-catalog ranking by ID score, anchor excluded.
pub fn id_last_rank<T: Scalar>(
    m: &IdLastModel<T>,
    anchor: ItemIndex,
    k: usize,
    exclude: &HashSet<ItemIndex>,
) -> RankedList<T> {
    let mut top = TopK::new(k);
    let a = m.anchor_row(anchor);
    for j in 0..m.num_items() as ItemIndex {
        if j != anchor && !exclude.contains(&j) {
            top.push(j, dot(a, m.target_row(j)));
        }
    }
    top.into_list()
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SRMC";
const CHECKPOINT_VERSION: u8 = 0x01;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    kind: String,
    num_items: usize,
    hyper: BprHyper,
    entries: Vec<String>,
}

/// Writes a checkpoint container.
///
/// Layout: magic `SRMC`, version `0x01`, `u32` LE manifest length, the JSON
/// manifest, then for each of the anchor and target tables a `u64` LE byte
/// length followed by an `SRAE` embedding blob keyed by item id.
pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    m: &IdLastModel<T>,
    vocab: &Vocab,
) -> Result<()> {
    let path = path.as_ref();
    let manifest = CheckpointManifest {
        kind: "id-last".into(),
        num_items: m.num_items(),
        hyper: m.hyper.clone(),
        entries: vec!["anchor".into(), "target".into()],
    };
    let manifest = serde_json::to_vec_pretty(&manifest)?;
    let mut buf = CHECKPOINT_MAGIC.to_vec();
    buf.push(CHECKPOINT_VERSION);
    buf.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    buf.extend_from_slice(&manifest);
    for table in [&m.anchor, &m.target] {
        let raw = crate::corpus::EmbeddingMatrix::from_rows(m.dim(), table.clone()).to_raw(vocab);
        let blob = encode_binary(&raw)?;
        buf.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        buf.extend_from_slice(&blob);
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>, vocab: &Vocab) -> Result<IdLastModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |offset: usize, message: &str| Error::BadBinary {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.to_string(),
    };
    if bytes.len() < 9 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(fail(0, "bad magic, expected SRMC"));
    }
    if bytes[4] != CHECKPOINT_VERSION {
        return Err(fail(4, "unsupported checkpoint version"));
    }
    let mlen = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let mut pos = 9 + mlen;
    if bytes.len() < pos {
        return Err(fail(9, "truncated manifest"));
    }
    let manifest: CheckpointManifest = serde_json::from_slice(&bytes[9..pos])?;
    let mut tables = Vec::with_capacity(2);
    for _ in 0..2 {
        if bytes.len() < pos + 8 {
            return Err(fail(pos, "truncated entry length"));
        }
        let len = u64::from_le_bytes(bytes[pos..pos + 8].try_into().expect("8 bytes")) as usize;
        pos += 8;
        let blob = bytes.get(pos..pos + len).ok_or_else(|| fail(pos, "truncated entry"))?;
        let raw = decode_binary(blob, path)?;
        let (matrix, _) = align_to_vocab::<T>(&raw, vocab, AlignOptions::default())?;
        tables.push(matrix.as_slice().to_vec());
        pos += len;
    }
    if pos != bytes.len() {
        return Err(fail(pos, "trailing bytes after checkpoint entries"));
    }
    let target = tables.pop().expect("two tables");
    let anchor = tables.pop().expect("two tables");
    Ok(IdLastModel::from_tables(manifest.hyper, anchor, target))
}
