//! Item embedding files and the row-aligned matrix used by scorers.
//!
//! Two on-disk formats are supported:
//!
//! * text: one line per item, `item_id<sep>v1<sep>...<sep>vD`;
//! * binary (`SRAE`): magic `SRAE`, version byte `0x01`, `u32` LE dim,
//!   `u64` LE item count, then per item a `u16` LE id byte length, the UTF-8
//!   id bytes and `dim` little-endian `f32` values.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::sequences::{ItemIndex, Vocab};
use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Scalar};

pub const SRAE_MAGIC: &[u8; 4] = b"SRAE";
pub const SRAE_VERSION: u8 = 0x01;

/// Embeddings exactly as stored in a file: ids in file order, `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbeddings {
    pub dim: usize,
    pub ids: Vec<String>,
    pub values: Vec<f32>,
}

impl RawEmbeddings {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// Binary when the file starts with the `SRAE` magic, text otherwise.
    pub fn sniff(path: &Path) -> Result<Self> {
        use std::io::Read;
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut head = [0u8; 4];
        let n = f.read(&mut head).map_err(|e| Error::io(path, e))?;
        Ok(if n == 4 && &head == SRAE_MAGIC {
            EmbeddingFormat::Binary
        } else {
            EmbeddingFormat::Text
        })
    }
}

/// Reads either format, detecting it from the leading bytes.
pub fn read_embedding_file(path: impl AsRef<Path>, sep: Option<char>) -> Result<RawEmbeddings> {
    let path = path.as_ref();
    match EmbeddingFormat::sniff(path)? {
        EmbeddingFormat::Binary => read_binary(path),
        EmbeddingFormat::Text => read_text(path, sep),
    }
}

/// `sep = None` splits on any run of whitespace.
pub fn read_text(path: impl AsRef<Path>, sep: Option<char>) -> Result<RawEmbeddings> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = RawEmbeddings {
        dim: 0,
        ids: Vec::new(),
        values: Vec::new(),
    };
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::BadRow {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            message,
        };
        let mut fields: Box<dyn Iterator<Item = &str>> = match sep {
            Some(c) => Box::new(line.split(c)),
            None => Box::new(line.split_whitespace()),
        };
        let id = fields.next().unwrap_or_default().trim();
        if id.is_empty() {
            return Err(bad("empty item id".into()));
        }
        let start = out.values.len();
        for f in fields {
            let v = f
                .trim()
                .parse::<f32>()
                .map_err(|_| bad(format!("unparseable value `{f}`")))?;
            out.values.push(v);
        }
        let found = out.values.len() - start;
        if out.ids.is_empty() {
            if found == 0 {
                return Err(bad("no embedding values".into()));
            }
            out.dim = found;
        } else if found != out.dim {
            return Err(Error::DimensionMismatch {
                item: id.to_string(),
                expected: out.dim,
                found,
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(bad(format!("duplicate item id `{id}`")));
        }
        out.ids.push(id.to_string());
    }
    Ok(out)
}

pub fn write_text(path: impl AsRef<Path>, emb: &RawEmbeddings, sep: char) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    for (i, id) in emb.ids.iter().enumerate() {
        buf.push_str(id);
        for v in emb.row(i) {
            buf.push(sep);
            // Display for f32 is the shortest string that round-trips.
            buf.push_str(&v.to_string());
        }
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn encode_binary(emb: &RawEmbeddings) -> Result<Vec<u8>> {
    let dim = u32::try_from(emb.dim)
        .map_err(|_| Error::Config(format!("dimension {} too large", emb.dim)))?;
    let mut buf = Vec::with_capacity(17 + emb.ids.len() * (2 + 16 + 4 * emb.dim));
    buf.extend_from_slice(SRAE_MAGIC);
    buf.push(SRAE_VERSION);
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&(emb.ids.len() as u64).to_le_bytes());
    for (i, id) in emb.ids.iter().enumerate() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Config(format!("item id `{id}` longer than 65535 bytes")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for v in emb.row(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn write_binary(path: impl AsRef<Path>, emb: &RawEmbeddings) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_binary(emb)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<RawEmbeddings> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_binary(&bytes, path)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::BadBinary {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<RawEmbeddings> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        path,
    };
    if cur.take(4, "magic")? != SRAE_MAGIC {
        cur.pos = 0;
        return Err(cur.fail("bad magic, expected SRAE"));
    }
    let version = cur.take(1, "version")?[0];
    if version != SRAE_VERSION {
        cur.pos -= 1;
        return Err(cur.fail(format!("unsupported version {version:#04x}")));
    }
    let dim = u32::from_le_bytes(cur.array("dim")?) as usize;
    let count = u64::from_le_bytes(cur.array("item count")?);
    let count = usize::try_from(count).map_err(|_| cur.fail("item count overflows"))?;

    let mut out = RawEmbeddings {
        dim,
        ids: Vec::with_capacity(count.min(1 << 20)),
        values: Vec::with_capacity(count.min(1 << 20) * dim),
    };
    let mut seen = HashSet::new();
    for _ in 0..count {
        let id_start = cur.pos;
        let len = u16::from_le_bytes(cur.array("id length")?) as usize;
        let raw = cur.take(len, "id bytes")?;
        let id = std::str::from_utf8(raw).map_err(|_| Error::BadBinary {
            path: path.to_path_buf(),
            offset: id_start as u64 + 2,
            message: "id is not valid UTF-8".into(),
        })?;
        if !seen.insert(id) {
            cur.pos = id_start;
            return Err(cur.fail(format!("duplicate item id `{id}`")));
        }
        out.ids.push(id.to_string());
        for _ in 0..dim {
            out.values.push(f32::from_le_bytes(cur.array("vector")?));
        }
    }
    if cur.pos != bytes.len() {
        return Err(cur.fail(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(out)
}

/// Dense `num_items x dim` matrix row-aligned to a [`Vocab`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    dim: usize,
    data: Vec<T>,
    normalized: bool,
    zero_rows: BTreeSet<ItemIndex>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn from_rows(dim: usize, data: Vec<T>) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        assert_eq!(data.len() % dim, 0, "data length is not a multiple of dim");
        let zero_rows = data
            .chunks_exact(dim)
            .enumerate()
            .filter(|(_, r)| r.iter().all(|v| v.is_zero()))
            .map(|(i, _)| i as ItemIndex)
            .collect();
        EmbeddingMatrix {
            dim,
            data,
            normalized: false,
            zero_rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_items(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: ItemIndex) -> &[T] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// All-zero rows, either genuine or substituted for missing items.
    pub fn zero_rows(&self) -> &BTreeSet<ItemIndex> {
        &self.zero_rows
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Divides each nonzero row by its Euclidean norm. Idempotent.
    pub fn normalize_rows(mut self) -> Self {
        for row in self.data.chunks_exact_mut(self.dim) {
            let norm = l2_norm(row);
            if norm > T::zero() && norm.is_finite() {
                for v in row.iter_mut() {
                    *v = *v / norm;
                }
            }
        }
        self.normalized = true;
        self
    }

    /// Returns a matrix whose row `i` is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[ItemIndex]) -> Self {
        assert_eq!(perm.len(), self.num_items());
        let mut data = Vec::with_capacity(self.data.len());
        for &src in perm {
            data.extend_from_slice(self.row(src));
        }
        let mut out = Self::from_rows(self.dim, data);
        out.normalized = self.normalized;
        out
    }

    pub fn to_raw(&self, vocab: &Vocab) -> RawEmbeddings {
        assert_eq!(vocab.len(), self.num_items());
        RawEmbeddings {
            dim: self.dim,
            ids: vocab.ids().to_vec(),
            values: self.data.iter().map(|v| v.to_f32_lossy()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlignOptions {
    /// Substitute a zero row for vocabulary items absent from the file.
    pub zero_fill_missing: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignReport {
    /// File entries not in the vocabulary.
    pub ignored: usize,
    /// Vocabulary items given a zero row.
    pub zero_filled: Vec<String>,
}

/// Orders file rows by vocabulary index.
pub fn align_to_vocab<T: Scalar>(
    raw: &RawEmbeddings,
    vocab: &Vocab,
    opts: AlignOptions,
) -> Result<(EmbeddingMatrix<T>, AlignReport)> {
    if raw.dim == 0 {
        return Err(Error::Config("embedding file has dimension 0".into()));
    }
    let by_id: HashMap<&str, usize> = raw
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut report = AlignReport {
        ignored: raw.ids.iter().filter(|id| vocab.encode(id).is_none()).count(),
        zero_filled: Vec::new(),
    };
    let mut data = Vec::with_capacity(vocab.len() * raw.dim);
    for id in vocab.ids() {
        match by_id.get(id.as_str()) {
            Some(&r) => data.extend(raw.row(r).iter().map(|&v| T::from_f32_lossy(v))),
            None if opts.zero_fill_missing => {
                data.extend(std::iter::repeat(T::zero()).take(raw.dim));
                report.zero_filled.push(id.clone());
            }
            None => return Err(Error::MissingEmbedding(id.clone())),
        }
    }
    Ok((EmbeddingMatrix::from_rows(raw.dim, data), report))
}

/// Reads an embedding file (either format) and aligns it to `vocab`.
pub fn load_embeddings<T: Scalar>(
    path: impl AsRef<Path>,
    vocab: &Vocab,
    opts: AlignOptions,
) -> Result<(EmbeddingMatrix<T>, AlignReport)> {
    let raw = read_embedding_file(path, None)?;
    align_to_vocab(&raw, vocab, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vocab(ids: &[&str]) -> Vocab {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn text_line_parses_into_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "itemB 1 0\nitemA 0.6 0.8\n").unwrap();
        let (m, rep) = load_embeddings::<f32>(&p, &vocab(&["itemA", "itemB"]), AlignOptions::default()).unwrap();
        assert_eq!(m.row(0), &[0.6, 0.8]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
        assert_eq!(rep.ignored, 0);
    }

    #[test]
    fn missing_vocab_item_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "a 1 0\n").unwrap();
        let err = load_embeddings::<f32>(&p, &vocab(&["a", "ghost"]), AlignOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(ref id) if id == "ghost"));

        let (m, rep) = load_embeddings::<f32>(
            &p,
            &vocab(&["a", "ghost"]),
            AlignOptions { zero_fill_missing: true },
        )
        .unwrap();
        assert_eq!(rep.zero_filled, vec!["ghost".to_string()]);
        assert!(m.zero_rows().contains(&1));
    }

    #[test]
    fn extra_items_are_counted_and_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        fs::write(&p, "a\t1\t0\nzzz\t0\t1\n").unwrap();
        let (m, rep) = load_embeddings::<f64>(&p, &vocab(&["a"]), AlignOptions::default()).unwrap();
        assert_eq!(m.num_items(), 1);
        assert_eq!(rep.ignored, 1);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "a 1 0\nb 1 0 0\n").unwrap();
        let err = read_text(&p, None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3, .. }));
    }

    #[test]
    fn binary_layout_is_bit_exact() {
        let raw = RawEmbeddings {
            dim: 2,
            ids: vec!["ab".into()],
            values: vec![1.0, -2.5],
        };
        let bytes = encode_binary(&raw).unwrap();
        let mut expected = b"SRAE\x01".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let raw = RawEmbeddings {
            dim: 3,
            ids: vec!["x".into()],
            values: vec![1.0, 2.0, 3.0],
        };
        let bytes = encode_binary(&raw).unwrap();
        let err = decode_binary(&bytes[..bytes.len() - 2], Path::new("t.srae")).unwrap_err();
        match err {
            Error::BadBinary { offset, .. } => assert_eq!(offset, (bytes.len() - 4) as u64),
            other => panic!("unexpected {other:?}"),
        }
        let err = decode_binary(b"SRAX\x01", Path::new("t.srae")).unwrap_err();
        assert!(matches!(err, Error::BadBinary { offset: 0, .. }));
    }

    #[test]
    fn normalize_examples() {
        let m = EmbeddingMatrix::from_rows(2, vec![3.0f64, 4.0, 0.0, 0.0, 0.6, 0.8]).normalize_rows();
        assert!(m.is_normalized());
        assert_abs_diff_eq!(m.row(0)[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(m.row(0)[1], 0.8, epsilon = 1e-15);
        assert_eq!(m.row(1), &[0.0, 0.0]);
        assert!(m.zero_rows().contains(&1));
        let again = m.clone().normalize_rows();
        for (a, b) in again.as_slice().iter().zip(m.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_identical(
            rows in prop::collection::vec(prop::collection::vec(any::<f32>(), 3), 0..20)
        ) {
            let raw = RawEmbeddings {
                dim: 3,
                ids: (0..rows.len()).map(|i| format!("item-{i}-é")).collect(),
                values: rows.concat(),
            };
            let back = decode_binary(&encode_binary(&raw).unwrap(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.ids, raw.ids);
            let a: Vec<u32> = back.values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = raw.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn normalized_rows_have_unit_norm(
            rows in prop::collection::vec(prop::collection::vec(-100.0f32..100.0, 4), 1..30)
        ) {
            let m = EmbeddingMatrix::from_rows(4, rows.concat()).normalize_rows();
            for i in 0..m.num_items() {
                let n = l2_norm(m.row(i as ItemIndex));
                if n != 0.0 {
                    prop_assert!((n - 1.0).abs() <= 1e-4);
                }
            }
        }
    }
}
