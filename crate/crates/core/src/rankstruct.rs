//! Per-anchor similarity partitions and their hamming intervals.
//!
//! For an anchor sample, candidates are grouped by how many labels they share
//! with it. Groups are ordered by descending common-label count and each one is
//! assigned an admissible hamming-distance band `(lower, upper)`: the more
//! labels shared, the closer to zero the band sits.

use std::collections::BTreeMap;

use ndarray::ArrayView1;

use crate::dataset::MultiLabelDataset;
use crate::{Error, Result};

/// How hamming intervals are derived from the common-label levels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum IntervalStrategy {
    /// Equal-width overlapping bands: step `s = K / (Δp + 2)`, band
    /// `(s·(p₁ − pⱼ), s·(p₁ − pⱼ + 2))` where `Δp = p₁ − p_m`.
    #[default]
    Crcdh,
    /// Bands tiling `[0, K]` with widths proportional to consecutive level
    /// gaps, the first gap fixed to 1.
    LegacyRcdh,
}

impl IntervalStrategy {
    pub fn name(self) -> &'static str {
        match self {
            IntervalStrategy::Crcdh => "crcdh",
            IntervalStrategy::LegacyRcdh => "legacy",
        }
    }
}

impl std::str::FromStr for IntervalStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crcdh" | "c-rcdh" => Ok(IntervalStrategy::Crcdh),
            "legacy" | "rcdh" => Ok(IntervalStrategy::LegacyRcdh),
            other => Err(Error::Config(format!("unknown interval strategy {other:?} (crcdh|legacy)"))),
        }
    }
}

/// Candidates sharing the same number of labels with the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct RankSubset {
    pub common: usize,
    /// Sample indices, ascending.
    pub members: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankPartition {
    pub anchor: usize,
    /// Ordered by strictly decreasing `common`.
    pub subsets: Vec<RankSubset>,
    pub k: usize,
}

impl RankPartition {
    pub fn num_pairs(&self) -> usize {
        self.subsets.iter().map(|s| s.members.len()).sum()
    }

    /// `(member, lower, upper)` for every candidate, in subset then member order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.subsets
            .iter()
            .flat_map(|s| s.members.iter().map(move |&m| (m, s.lower, s.upper)))
    }
}

/// `yᵢᵀyⱼ` for two multi-hot label vectors.
pub fn common_label_count(a: ArrayView1<'_, u8>, b: ArrayView1<'_, u8>) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("label vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b.iter()).map(|(&x, &y)| usize::from(x & y)).sum())
}

/// The `min(n_r, N − 1)` samples sharing the most labels with `anchor`,
/// ties broken by ascending index. Returned in that rank order.
pub fn select_candidates(ds: &MultiLabelDataset, anchor: usize, n_r: usize) -> Result<Vec<usize>> {
    if anchor >= ds.n() {
        return Err(Error::IndexOutOfRange { index: anchor, len: ds.n() });
    }
    if n_r == 0 {
        return Err(Error::invalid("n_r must be >= 1"));
    }
    let y = ds.label_row(anchor);
    let mut scored: Vec<(usize, usize)> = (0..ds.n())
        .filter(|&j| j != anchor)
        .map(|j| Ok((common_label_count(y, ds.label_row(j))?, j)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(n_r);
    Ok(scored.into_iter().map(|(_, j)| j).collect())
}

/// Hamming bands for distinct common-label levels given in strictly
/// descending order.
pub fn intervals(levels: &[usize], k: usize, strategy: IntervalStrategy) -> Result<Vec<(f64, f64)>> {
    if levels.is_empty() {
        return Err(Error::invalid("no common-label levels"));
    }
    if k == 0 {
        return Err(Error::invalid("code length must be >= 1"));
    }
    if levels.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid(format!("levels {levels:?} are not strictly descending")));
    }
    let kf = k as f64;
    let top = levels[0];
    Ok(match strategy {
        IntervalStrategy::Crcdh => {
            // Divide last so each bound is a single correctly rounded quotient.
            let denom = (top - levels[levels.len() - 1] + 2) as f64;
            levels
                .iter()
                .map(|&p| {
                    let gap = (top - p) as f64;
                    (kf * gap / denom, kf * (gap + 2.0) / denom)
                })
                .collect()
        }
        IntervalStrategy::LegacyRcdh => {
            let steps: Vec<usize> = std::iter::once(1)
                .chain(levels.windows(2).map(|w| w[0] - w[1]))
                .collect();
            let total: usize = steps.iter().sum();
            let mut acc = 0usize;
            steps
                .iter()
                .map(|&step| {
                    let lo = kf * acc as f64 / total as f64;
                    acc += step;
                    (lo, kf * acc as f64 / total as f64)
                })
                .collect()
        }
    })
}

/// Partition from precomputed `(candidate, common count)` pairs.
pub fn partition_from_counts(
    anchor: usize,
    counts: &[(usize, usize)],
    k: usize,
    strategy: IntervalStrategy,
) -> Result<RankPartition> {
    if counts.is_empty() {
        return Err(Error::invalid(format!("anchor {anchor}: empty candidate list")));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(idx, common) in counts {
        if idx == anchor {
            return Err(Error::invalid(format!("anchor {anchor} listed as its own candidate")));
        }
        groups.entry(common).or_default().push(idx);
    }
    let levels: Vec<usize> = groups.keys().rev().copied().collect();
    let bands = intervals(&levels, k, strategy)?;
    let subsets = groups
        .into_iter()
        .rev()
        .zip(bands)
        .map(|((common, mut members), (lower, upper))| {
            members.sort_unstable();
            members.dedup();
            RankSubset { common, members, lower, upper }
        })
        .collect();
    Ok(RankPartition { anchor, subsets, k })
}

/// Groups `candidates` by their common-label count with `anchor` and assigns
/// each group its hamming interval.
pub fn build_partition(
    ds: &MultiLabelDataset,
    anchor: usize,
    candidates: &[usize],
    k: usize,
    strategy: IntervalStrategy,
) -> Result<RankPartition> {
    if anchor >= ds.n() {
        return Err(Error::IndexOutOfRange { index: anchor, len: ds.n() });
    }
    let y = ds.label_row(anchor);
    let counts = candidates
        .iter()
        .map(|&j| {
            if j >= ds.n() {
                return Err(Error::IndexOutOfRange { index: j, len: ds.n() });
            }
            Ok((j, common_label_count(y, ds.label_row(j))?))
        })
        .collect::<Result<Vec<_>>>()?;
    partition_from_counts(anchor, &counts, k, strategy)
}
