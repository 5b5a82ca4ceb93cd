//! Graded ranking metrics over hamming-ranked retrieval lists.
//!
//! Relevance of a retrieved item is the number of labels it shares with the
//! query. DCG uses gain `2^r − 1` and discount `ln(1 + i)` for 1-based rank
//! `i`; the log base cancels in the NDCG ratio.

use ndarray::{ArrayView1, ArrayView2};

use crate::dataset::MultiLabelDataset;
use crate::rankstruct::common_label_count;
use crate::retrieval::{rank_all, HashCodeSet};
use crate::{Error, Result};

/// Relevance levels in retrieved order, truncated at depth `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevanceList {
    levels: Vec<u32>,
    depth: usize,
}

impl RelevanceList {
    /// Depth is clamped to the list length.
    pub fn new(levels: Vec<u32>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("truncation depth p must be >= 1"));
        }
        let depth = p.min(levels.len());
        Ok(RelevanceList { levels, depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The first `depth` levels.
    pub fn top(&self) -> &[u32] {
        &self.levels[..self.depth]
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// The same levels sorted descending, as the normalizer for [`ndcg`].
    pub fn ideal(&self) -> RelevanceList {
        let mut levels = self.levels.clone();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        RelevanceList { levels, depth: self.depth }
    }
}

/// `r_i = y_qᵀ y_{ranked[i]}`.
pub fn relevance(y_q: ArrayView1<'_, u8>, ranked: &[usize], labels: ArrayView2<'_, u8>, p: usize) -> Result<RelevanceList> {
    let levels = ranked
        .iter()
        .map(|&i| {
            if i >= labels.nrows() {
                return Err(Error::IndexOutOfRange { index: i, len: labels.nrows() });
            }
            Ok(common_label_count(y_q, labels.row(i))? as u32)
        })
        .collect::<Result<Vec<_>>>()?;
    RelevanceList::new(levels, p)
}

/// Discounted cumulative gain of `levels`.
pub fn dcg(levels: &[u32]) -> f64 {
    levels
        .iter()
        .enumerate()
        .map(|(i, &r)| (2f64.powi(r as i32) - 1.0) / ((i + 2) as f64).ln())
        .sum()
}

/// `DCG(rel@p) / DCG(ideal@p)`; zero when the ideal gain is zero.
pub fn ndcg(rel: &RelevanceList, ideal: &RelevanceList) -> f64 {
    let z = dcg(&ideal.levels[..rel.depth.min(ideal.levels.len())]);
    if z == 0.0 {
        return 0.0;
    }
    dcg(rel.top()) / z
}

/// Mean of the first `p` levels. An empty list scores zero.
pub fn acg(rel: &RelevanceList) -> f64 {
    if rel.depth == 0 {
        return 0.0;
    }
    rel.top().iter().map(|&r| f64::from(r)).sum::<f64>() / rel.depth as f64
}

/// Per-query scores and their means.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub p: usize,
    pub ndcg: f64,
    pub acg: f64,
    pub per_query: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Drop gallery item `i` from the ranking of query `i`. Only meaningful
    /// when the query and gallery sets are the same samples in the same order.
    pub exclude_self: bool,
}

/// Ranks the whole gallery for every query by hamming distance (ties by
/// index) and averages NDCG@p and ACG@p. The NDCG normalizer for a query is
/// built from that query's relevance to the full gallery.
pub fn evaluate(
    queries: &MultiLabelDataset,
    gallery: &MultiLabelDataset,
    query_codes: &HashCodeSet,
    gallery_codes: &HashCodeSet,
    p: usize,
    opts: EvalOptions,
) -> Result<EvalReport> {
    if p == 0 {
        return Err(Error::invalid("truncation depth p must be >= 1"));
    }
    if query_codes.len() != queries.n() || gallery_codes.len() != gallery.n() {
        return Err(Error::dim(format!(
            "{} query codes for {} queries, {} gallery codes for {} gallery samples",
            query_codes.len(),
            queries.n(),
            gallery_codes.len(),
            gallery.n()
        )));
    }
    if query_codes.k() != gallery_codes.k() {
        return Err(Error::dim(format!("query codes K={} vs gallery K={}", query_codes.k(), gallery_codes.k())));
    }
    if queries.c() != gallery.c() {
        return Err(Error::dim(format!("query C={} vs gallery C={}", queries.c(), gallery.c())));
    }
    if opts.exclude_self && queries.n() != gallery.n() {
        return Err(Error::invalid("exclude_self needs query and gallery sets of equal size"));
    }
    let mut per_query = Vec::with_capacity(queries.n());
    for (qi, code) in query_codes.iter().enumerate() {
        let ranked: Vec<usize> = rank_all(gallery_codes, &code)?
            .into_iter()
            .map(|h| h.index)
            .filter(|&g| !(opts.exclude_self && g == qi))
            .collect();
        let rel = relevance(queries.label_row(qi), &ranked, gallery.labels(), p)?;
        per_query.push((ndcg(&rel, &rel.ideal()), acg(&rel)));
    }
    let nq = per_query.len().max(1) as f64;
    Ok(EvalReport {
        p,
        ndcg: per_query.iter().map(|s| s.0).sum::<f64>() / nq,
        acg: per_query.iter().map(|s| s.1).sum::<f64>() / nq,
        per_query,
    })
}

/// Binarizes real outputs and evaluates them; convenience for in-memory runs.
pub fn evaluate_outputs(
    queries: &MultiLabelDataset,
    gallery: &MultiLabelDataset,
    query_u: ArrayView2<'_, f64>,
    gallery_u: ArrayView2<'_, f64>,
    p: usize,
    opts: EvalOptions,
) -> Result<EvalReport> {
    let qc = HashCodeSet::from_outputs(query_u)?;
    let gc = HashCodeSet::from_outputs(gallery_u)?;
    evaluate(queries, gallery, &qc, &gc, p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn list(levels: &[u32], p: usize) -> RelevanceList {
        RelevanceList::new(levels.to_vec(), p).unwrap()
    }

    #[test]
    fn relevance_levels() {
        let labels = array![[1u8, 0, 0], [1, 1, 0], [0, 0, 1]];
        let y_q = array![1u8, 1, 0];
        let rel = relevance(y_q.view(), &[0, 1, 2], labels.view(), 3).unwrap();
        assert_eq!(rel.top(), &[1, 2, 0]);
        assert!(relevance(y_q.view(), &[3], labels.view(), 1).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let perfect = list(&[2, 1, 0], 3);
        assert_abs_diff_eq!(ndcg(&perfect, &perfect.ideal()), 1.0, epsilon = 1e-15);

        let reversed = list(&[0, 1, 2], 3);
        let expected = (1.0 / 3f64.ln() + 3.0 / 4f64.ln()) / (3.0 / 2f64.ln() + 1.0 / 3f64.ln());
        assert_abs_diff_eq!(ndcg(&reversed, &reversed.ideal()), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(ndcg(&reversed, &reversed.ideal()), 0.5868, epsilon = 1e-4);

        let zeros = list(&[0, 0, 0], 3);
        assert_eq!(ndcg(&zeros, &zeros.ideal()), 0.0);
    }

    #[test]
    fn acg_examples() {
        assert_eq!(acg(&list(&[3, 1], 2)), 2.0);
        assert_eq!(acg(&list(&[4, 4, 4, 4], 3)), 4.0);
        assert_eq!(acg(&list(&[1, 3, 0], 2)), acg(&list(&[3, 1, 0], 2)));
        assert!(RelevanceList::new(vec![1], 0).is_err());
        assert_eq!(list(&[1, 2], 5).depth(), 2);
    }

    proptest! {
        #[test]
        fn ndcg_bounds_and_base_invariance(levels in prop::collection::vec(0u32..5, 1..30), p in 1usize..40) {
            let rel = list(&levels, p);
            let v = ndcg(&rel, &rel.ideal());
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            let ideal = rel.ideal();
            prop_assert!((ndcg(&ideal, &ideal) - 1.0).abs() < 1e-12 || ideal.top().iter().all(|&r| r == 0));

            let dcg2 = |l: &[u32]| -> f64 {
                l.iter().enumerate().map(|(i, &r)| (2f64.powi(r as i32) - 1.0) / ((i + 2) as f64).log2()).sum()
            };
            let z2 = dcg2(ideal.top());
            if z2 > 0.0 {
                prop_assert!((dcg2(rel.top()) / z2 - v).abs() < 1e-12);
            }
        }

        #[test]
        fn acg_linear_and_order_free(levels in prop::collection::vec(0u32..5, 1..30), p in 1usize..40, scale in 1u32..4) {
            let rel = list(&levels, p);
            let scaled = list(&levels.iter().map(|r| r * scale).collect::<Vec<_>>(), p);
            prop_assert!((acg(&scaled) - f64::from(scale) * acg(&rel)).abs() < 1e-12);
            let mut window = rel.top().to_vec();
            window.reverse();
            prop_assert!((acg(&list(&window, p)) - acg(&rel)).abs() < 1e-12);
        }
    }

    #[test]
    fn self_retrieval_on_single_combo() {
        let labels = Array2::from_elem((4, 2), 1u8);
        let ds = MultiLabelDataset::new(Array2::zeros((4, 1)), labels).unwrap();
        let u = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let r = evaluate_outputs(&ds, &ds, u.view(), u.view(), 3, EvalOptions::default()).unwrap();
        assert_abs_diff_eq!(r.ndcg, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.acg, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn exclusion_flag_drops_the_query() {
        let labels = array![[1u8, 0], [0, 1], [1, 0]];
        let ds = MultiLabelDataset::new(Array2::zeros((3, 1)), labels).unwrap();
        let u = array![[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        let keep = evaluate_outputs(&ds, &ds, u.view(), u.view(), 1, EvalOptions::default()).unwrap();
        // Self always ranks first and shares every label.
        assert_eq!(keep.acg, 1.0);
        let drop = evaluate_outputs(&ds, &ds, u.view(), u.view(), 1, EvalOptions { exclude_self: true }).unwrap();
        // Query 0 -> 2 (rel 1), query 1 -> 2 or 0 (rel 0), query 2 -> 0 (rel 1).
        assert_abs_diff_eq!(drop.acg, 2.0 / 3.0, epsilon = 1e-15);
    }
}
