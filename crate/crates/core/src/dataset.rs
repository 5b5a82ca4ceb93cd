//! Multi-label feature datasets.
//!
//! A dataset is `N` feature rows of dimension `D` paired with `N` multi-hot
//! label rows over `C` classes. Features are stored as `f32` (the on-disk
//! precision) so that a load/save round trip is bit-exact.
//!
//! `RCHD` layout, all integers little-endian:
//!
//! ```text
//! "RCHD" | u32 version=1 | u32 N | u32 D | u32 C
//! N*D f32 features, row-major
//! N label rows of ceil(C/8) bytes, bit t of row i = y[i][t], LSB-first, padding zero
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::io::{packed_len, put_u32, to_u32, Reader};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RCHD";
const VERSION: u32 = 1;

/// Radius of the hypersphere synthetic cluster means are drawn on.
pub const SYNTH_MEAN_RADIUS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLabelDataset {
    features: Array2<f32>,
    labels: Array2<u8>,
}

impl MultiLabelDataset {
    /// Builds a dataset, rejecting anything that breaks the invariants:
    /// matching row counts, binary labels, no unlabeled row, finite features.
    pub fn new(features: Array2<f32>, labels: Array2<u8>) -> Result<Self> {
        if features.nrows() != labels.nrows() {
            return Err(Error::dim(format!(
                "{} feature rows but {} label rows",
                features.nrows(),
                labels.nrows()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::invalid("dataset has no samples"));
        }
        if features.ncols() == 0 || labels.ncols() == 0 {
            return Err(Error::invalid("feature and label dimensions must be >= 1"));
        }
        for (i, row) in labels.outer_iter().enumerate() {
            if let Some(&bad) = row.iter().find(|&&y| y > 1) {
                return Err(Error::invalid(format!("row {i}: label value {bad} is not 0/1")));
            }
            if row.iter().all(|&y| y == 0) {
                return Err(Error::invalid(format!("row {i}: sample has no labels")));
            }
        }
        for (i, row) in features.outer_iter().enumerate() {
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("row {i}: feature {j} is not finite")));
            }
        }
        Ok(MultiLabelDataset { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn c(&self) -> usize {
        self.labels.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f32> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, u8> {
        self.labels.view()
    }

    pub fn feature_row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.features.row(i)
    }

    pub fn label_row(&self, i: usize) -> ArrayView1<'_, u8> {
        self.labels.row(i)
    }

    /// Features of the given rows widened to `f64`.
    pub fn features_f64(&self, rows: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), rows).mapv(f64::from)
    }

    /// Labels of the given rows.
    pub fn labels_of(&self, rows: &[usize]) -> Array2<u8> {
        self.labels.select(Axis(0), rows)
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.n() });
        }
        MultiLabelDataset::new(self.features.select(Axis(0), rows), self.labels.select(Axis(0), rows))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n, d, c) = (self.n(), self.d(), self.c());
        let row_bytes = packed_len(c);
        let mut out = Vec::with_capacity(20 + 4 * n * d + n * row_bytes);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(n, "N")?);
        put_u32(&mut out, to_u32(d, "D")?);
        put_u32(&mut out, to_u32(c, "C")?);
        for &x in self.features.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for row in self.labels.outer_iter() {
            let mut packed = vec![0u8; row_bytes];
            for (t, &y) in row.iter().enumerate() {
                if y == 1 {
                    packed[t / 8] |= 1 << (t % 8);
                }
            }
            out.extend_from_slice(&packed);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "RCHD");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("RCHD: unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let d = r.u32()? as usize;
        let c = r.u32()? as usize;
        let mut features = Vec::with_capacity(n.saturating_mul(d).min(buf.len() / 4));
        for _ in 0..n * d {
            features.push(r.f32()?);
        }
        let row_bytes = packed_len(c);
        let mut labels = Array2::<u8>::zeros((n, c));
        for i in 0..n {
            let packed = r.take(row_bytes)?;
            for t in 0..c {
                labels[[i, t]] = (packed[t / 8] >> (t % 8)) & 1;
            }
            for t in c..row_bytes * 8 {
                if (packed[t / 8] >> (t % 8)) & 1 == 1 {
                    return Err(Error::format(format!("RCHD: row {i} has padding bit {t} set")));
                }
            }
        }
        r.finish()?;
        let features = Array2::from_shape_vec((n, d), features).map_err(|e| Error::format(e.to_string()))?;
        MultiLabelDataset::new(features, labels)
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    MultiLabelDataset::from_bytes(&fs::read(path)?)
}

pub fn save_dataset(ds: &MultiLabelDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ds.to_bytes()?)?;
    Ok(())
}

/// Recipe for a Gaussian-cluster dataset with one cluster per label combination.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub c: usize,
    pub per_class: usize,
    pub d: usize,
    pub label_combos: Vec<Vec<u8>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 || self.d == 0 {
            return Err(Error::invalid("class count and feature dim must be >= 1"));
        }
        if self.per_class == 0 {
            return Err(Error::invalid("per_class must be >= 1"));
        }
        if self.label_combos.is_empty() {
            return Err(Error::invalid("at least one label combination is required"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        for (j, combo) in self.label_combos.iter().enumerate() {
            if combo.len() != self.c {
                return Err(Error::invalid(format!("combo {j} has {} entries, expected {}", combo.len(), self.c)));
            }
            if combo.iter().any(|&y| y > 1) {
                return Err(Error::invalid(format!("combo {j} is not binary")));
            }
            if combo.iter().all(|&y| y == 0) {
                return Err(Error::invalid(format!("combo {j} has no bit set")));
            }
        }
        Ok(())
    }
}

/// Parses combos written as bit strings, e.g. `"100,010,110"`.
pub fn parse_combos(text: &str) -> Result<Vec<Vec<u8>>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.chars()
                .map(|ch| match ch {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(Error::invalid(format!("combo {s:?}: unexpected character {other:?}"))),
                })
                .collect()
        })
        .collect()
}

/// Generates `per_class` samples around a seeded mean for each label combo.
///
/// Means are standard-normal directions scaled onto the sphere of radius
/// [`SYNTH_MEAN_RADIUS`]; samples add `noise_sigma` times standard normal
/// noise. Rows are grouped by combo in list order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiLabelDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means: Vec<Vec<f64>> = spec
        .label_combos
        .iter()
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break v.into_iter().map(|x| SYNTH_MEAN_RADIUS * x / norm).collect();
                }
            }
        })
        .collect();

    let n = spec.per_class * spec.label_combos.len();
    let mut features = Array2::<f32>::zeros((n, spec.d));
    let mut labels = Array2::<u8>::zeros((n, spec.c));
    let mut row = 0;
    for (combo, mean) in spec.label_combos.iter().zip(&means) {
        for _ in 0..spec.per_class {
            for (j, &m) in mean.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = (m + spec.noise_sigma * noise) as f32;
            }
            for (t, &y) in combo.iter().enumerate() {
                labels[[row, t]] = y;
            }
            row += 1;
        }
    }
    MultiLabelDataset::new(features, labels)
}

/// Deterministic train/test split: a seeded shuffle, the first
/// `round(n * test_fraction)` rows become the held-out set.
pub fn split_holdout(ds: &MultiLabelDataset, test_fraction: f64, seed: u64) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
    use rand::seq::SliceRandom;

    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((ds.n() as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= ds.n() {
        return Err(Error::invalid(format!("split of {} samples leaves an empty side", ds.n())));
    }
    let (test, train) = order.split_at(n_test);
    let mut test = test.to_vec();
    let mut train = train.to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}
