//! Packed binary codes and exact hamming search.
//!
//! A code of `K` bits is stored in `ceil(K/64)` little-endian `u64` words; bit
//! `j` lives in word `j / 64` at position `j % 64`. A set bit encodes `+1`, a
//! clear bit `−1`, and padding bits are always zero.
//!
//! `RCBC` layout, little-endian:
//!
//! ```text
//! "RCBC" | u32 version=1 | u32 N | u32 K
//! N rows of ceil(K/8) bytes, LSB-first, padding zero
//! ```

use std::fs;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};

use crate::io::{packed_len, put_u32, to_u32, Reader};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RCBC";
const VERSION: u32 = 1;

fn words_for(k: usize) -> usize {
    k.div_ceil(64)
}

fn tail_mask(k: usize) -> u64 {
    match k % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// A single `K`-bit code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    words: Vec<u64>,
    k: usize,
}

impl BinaryCode {
    pub fn from_words(words: Vec<u64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("code length must be >= 1"));
        }
        if words.len() != words_for(k) {
            return Err(Error::dim(format!("{} words for a {k}-bit code", words.len())));
        }
        if words[words.len() - 1] & !tail_mask(k) != 0 {
            return Err(Error::invalid("padding bits set"));
        }
        Ok(BinaryCode { words, k })
    }

    /// Builds a code from `±1` signs (`true` = `+1`).
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut words = vec![0u64; words_for(bits.len())];
        for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[j / 64] |= 1 << (j % 64);
        }
        BinaryCode::from_words(words, bits.len())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, j: usize) -> bool {
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    /// The code as a `±1` vector.
    pub fn to_signs(&self) -> Vec<f64> {
        (0..self.k).map(|j| if self.bit(j) { 1.0 } else { -1.0 }).collect()
    }
}

/// `b = sign(u)` with `sign(0) = +1`, packed.
pub fn binarize(u: ArrayView1<'_, f64>) -> BinaryCode {
    let mut words = vec![0u64; words_for(u.len())];
    for (j, _) in u.iter().enumerate().filter(|(_, &x)| x >= 0.0) {
        words[j / 64] |= 1 << (j % 64);
    }
    BinaryCode { words, k: u.len() }
}

fn popcount_xor(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Number of differing bits.
pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.k != b.k {
        return Err(Error::dim(format!("codes of {} and {} bits", a.k, b.k)));
    }
    Ok(popcount_xor(&a.words, &b.words))
}

/// `N` codes of `K` bits in one contiguous buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashCodeSet {
    words: Vec<u64>,
    k: usize,
    n: usize,
}

impl HashCodeSet {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("code length must be >= 1"));
        }
        Ok(HashCodeSet { words: Vec::new(), k, n: 0 })
    }

    pub fn from_codes(k: usize, codes: &[BinaryCode]) -> Result<Self> {
        let mut set = HashCodeSet::new(k)?;
        for c in codes {
            set.push(c)?;
        }
        Ok(set)
    }

    /// Binarizes each row of an `N × K` output matrix.
    pub fn from_outputs(u: ArrayView2<'_, f64>) -> Result<Self> {
        let mut set = HashCodeSet::new(u.ncols())?;
        for row in u.outer_iter() {
            set.push(&binarize(row))?;
        }
        Ok(set)
    }

    pub fn push(&mut self, code: &BinaryCode) -> Result<()> {
        if code.k != self.k {
            return Err(Error::dim(format!("{}-bit code pushed into a {}-bit set", code.k, self.k)));
        }
        self.words.extend_from_slice(&code.words);
        self.n += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn row(&self, i: usize) -> &[u64] {
        let w = words_for(self.k);
        &self.words[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize) -> Result<BinaryCode> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        Ok(BinaryCode { words: self.row(i).to_vec(), k: self.k })
    }

    pub fn iter(&self) -> impl Iterator<Item = BinaryCode> + '_ {
        (0..self.n).map(|i| BinaryCode { words: self.row(i).to_vec(), k: self.k })
    }

    /// Hamming distance from `q` to every code, in index order.
    pub fn distances(&self, q: &BinaryCode) -> Result<Vec<u32>> {
        if q.k != self.k {
            return Err(Error::dim(format!("{}-bit query against {}-bit codes", q.k, self.k)));
        }
        Ok((0..self.n).map(|i| popcount_xor(self.row(i), &q.words)).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let row_bytes = packed_len(self.k);
        let mut out = Vec::with_capacity(16 + self.n * row_bytes);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(self.n, "N")?);
        put_u32(&mut out, to_u32(self.k, "K")?);
        for i in 0..self.n {
            let bytes: Vec<u8> = self.row(i).iter().flat_map(|w| w.to_le_bytes()).collect();
            out.extend_from_slice(&bytes[..row_bytes]);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "RCBC");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("RCBC: unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let k = r.u32()? as usize;
        let mut set = HashCodeSet::new(k).map_err(|_| Error::format("RCBC: K = 0"))?;
        let row_bytes = packed_len(k);
        let mut padded = vec![0u8; words_for(k) * 8];
        for i in 0..n {
            padded[..row_bytes].copy_from_slice(r.take(row_bytes)?);
            let words: Vec<u64> = padded.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
            let code = BinaryCode::from_words(words, k)
                .map_err(|_| Error::invalid(format!("RCBC: code {i} has padding bits set")))?;
            set.push(&code)?;
        }
        r.finish()?;
        Ok(set)
    }
}

pub fn save_codes(codes: &HashCodeSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, codes.to_bytes()?)?;
    Ok(())
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<HashCodeSet> {
    HashCodeSet::from_bytes(&fs::read(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hit {
    pub index: usize,
    pub distance: u32,
}

/// Hits in ascending `(distance, index)` order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub ranked: Vec<Hit>,
}

/// Full ranking of the gallery by hamming distance from `q`, ties by index.
///
/// A counting sort over the `K + 1` possible distances keeps each bucket in
/// index order, so the scan is `O(N + K)` after the distance pass.
pub fn rank_all(gallery: &HashCodeSet, q: &BinaryCode) -> Result<Vec<Hit>> {
    let dist = gallery.distances(q)?;
    let mut offsets = vec![0usize; gallery.k + 2];
    for &d in &dist {
        offsets[d as usize + 1] += 1;
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let mut ranked = vec![Hit { index: 0, distance: 0 }; dist.len()];
    for (index, &distance) in dist.iter().enumerate() {
        let slot = &mut offsets[distance as usize];
        ranked[*slot] = Hit { index, distance };
        *slot += 1;
    }
    Ok(ranked)
}

/// The `min(top, N)` nearest gallery codes.
pub fn query(gallery: &HashCodeSet, q: &BinaryCode, top: usize) -> Result<QueryResult> {
    if top == 0 {
        return Err(Error::invalid("top must be >= 1"));
    }
    let mut ranked = rank_all(gallery, q)?;
    ranked.truncate(top);
    Ok(QueryResult { ranked })
}
