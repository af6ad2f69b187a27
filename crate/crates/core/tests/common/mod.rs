//! Synthetic worlds shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrec_audit::corpus::{EmbeddingMatrix, Vocab};

/// Sequences over a ring of `items` items. Each step moves to one of the
/// next `branching` ring positions with probability `1 - noise`, otherwise
/// to a uniformly random item. Ids are `i<position>`.
pub fn ring_world(
    users: usize,
    items: usize,
    branching: usize,
    noise: f64,
    len: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<(String, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..users)
        .map(|u| {
            let n = rng.gen_range(len.clone());
            let mut cur = rng.gen_range(0..items);
            let mut seq = vec![cur];
            while seq.len() < n {
                cur = if rng.gen_bool(noise) {
                    rng.gen_range(0..items)
                } else {
                    (cur + rng.gen_range(1..=branching)) % items
                };
                seq.push(cur);
            }
            (format!("u{u}"), seq.into_iter().map(|i| format!("i{i}")).collect())
        })
        .collect()
}

pub fn ring_position(id: &str) -> usize {
    id[1..].parse().expect("ids look like i<n>")
}

/// Unit vectors on a 4-d torus: ring neighbours are close, and the fast
/// second angle makes far-away positions (about `items / freq` apart)
/// look similar too.
pub fn torus_row(pos: usize, items: usize, freq: f64) -> [f64; 4] {
    let t = 2.0 * PI * pos as f64 / items as f64;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [t.cos() * s, t.sin() * s, (freq * t).cos() * s, (freq * t).sin() * s]
}

pub fn torus_embeddings(vocab: &Vocab, items: usize, freq: f64) -> EmbeddingMatrix<f64> {
    let data = vocab
        .ids()
        .iter()
        .flat_map(|id| torus_row(ring_position(id), items, freq))
        .collect();
    EmbeddingMatrix::from_rows(4, data).normalize_rows()
}

pub fn write_interactions(path: &Path, seqs: &[(String, Vec<String>)]) {
    let mut out = String::new();
    for (u, items) in seqs {
        for (t, i) in items.iter().enumerate() {
            writeln!(out, "{u}\t{i}\t{t}").unwrap();
        }
    }
    fs::write(path, out).unwrap();
}

pub fn write_torus_embeddings(path: &Path, items: usize, freq: f64) {
    let mut out = String::new();
    for pos in 0..items {
        let r = torus_row(pos, items, freq);
        writeln!(out, "i{pos} {} {} {} {}", r[0], r[1], r[2], r[3]).unwrap();
    }
    fs::write(path, out).unwrap();
}
