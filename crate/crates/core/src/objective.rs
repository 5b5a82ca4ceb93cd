//! Loss terms over a minibatch of real-valued head outputs `u`.
//!
//! - rank consistency: relaxed hamming distances pushed inside their
//!   per-subset intervals with softplus margins scaled by `γ/K`
//! - multi-label softmax cross-entropy through a linear classifier `(W, v)`
//! - multi-label center loss against one center per class
//! - quantization: `‖sign(u) − u‖²`
//!
//! Everything is `f64`. Sums run in ascending anchor, subset, member order so
//! results are bit-reproducible.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::rankstruct::RankPartition;
use crate::{Error, Result};

/// Guard added to label counts in the center loss and center update.
pub const EPS: f64 = 1e-8;

/// `log(1 + e^z)` without overflow for large `|z|`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Relaxed hamming distance `(K − uᵢ·uₖ) / 2` with `K` the vector length.
pub fn relaxed_hamming(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("outputs of length {} and {}", a.len(), b.len())));
    }
    Ok((a.len() as f64 - a.dot(&b)) / 2.0)
}

/// Head outputs for the samples `indices`, one row each.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputBatch {
    pub u: Array2<f64>,
    pub indices: Vec<usize>,
}

impl OutputBatch {
    pub fn new(u: Array2<f64>, indices: Vec<usize>) -> Result<Self> {
        if u.nrows() != indices.len() {
            return Err(Error::dim(format!("{} output rows for {} indices", u.nrows(), indices.len())));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite output"));
        }
        Ok(OutputBatch { u, indices })
    }

    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    fn row_lookup(&self) -> HashMap<usize, usize> {
        self.indices.iter().enumerate().map(|(row, &idx)| (idx, row)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    /// `C × K`.
    pub w: Array2<f64>,
    pub v: Array1<f64>,
}

/// One center per class plus the center learning rate.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterBank {
    /// `C × K`.
    pub centers: Array2<f64>,
    pub alpha: f64,
    pub eps: f64,
}

impl CenterBank {
    pub fn new(centers: Array2<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("center rate alpha = {alpha} outside (0, 1]")));
        }
        Ok(CenterBank { centers, alpha, eps: EPS })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub gamma: f64,
    pub lambda_cla: f64,
    pub lambda_clu: f64,
    pub lambda_q: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { gamma: 16.0, lambda_cla: 20.0, lambda_clu: 20.0, lambda_q: 50.0 }
    }
}

/// Which loss terms participate. The rank term has no weight of its own, so
/// it is switched here rather than zeroed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermToggles {
    pub rank: bool,
    pub cla: bool,
    pub clu: bool,
    pub quant: bool,
}

impl TermToggles {
    pub const ALL: TermToggles = TermToggles { rank: true, cla: true, clu: true, quant: true };
    pub const NONE: TermToggles = TermToggles { rank: false, cla: false, clu: false, quant: false };
}

impl Default for TermToggles {
    fn default() -> Self {
        TermToggles::ALL
    }
}

fn check_labels(batch: &OutputBatch, labels: ArrayView2<'_, u8>, classes: usize) -> Result<()> {
    if labels.nrows() != batch.len() {
        return Err(Error::dim(format!("{} label rows for batch of {}", labels.nrows(), batch.len())));
    }
    if labels.ncols() != classes {
        return Err(Error::dim(format!("{} label columns, expected {classes}", labels.ncols())));
    }
    Ok(())
}

/// Visits every (anchor row, member row, lower, upper) in reduction order.
fn for_each_pair(
    batch: &OutputBatch,
    partitions: &[RankPartition],
    mut f: impl FnMut(usize, usize, f64, f64),
) -> Result<()> {
    let rows = batch.row_lookup();
    let row_of = |idx: usize| {
        rows.get(&idx)
            .copied()
            .ok_or_else(|| Error::invalid(format!("sample {idx} is not in the batch")))
    };
    for part in partitions {
        if part.k != batch.k() {
            return Err(Error::dim(format!("partition built for K={} but outputs have K={}", part.k, batch.k())));
        }
        let a = row_of(part.anchor)?;
        for (m, lo, hi) in part.pairs() {
            f(a, row_of(m)?, lo, hi);
        }
    }
    Ok(())
}

/// Margins `(A, B)` of one pair: `A = s·(D̃ − lower)`, `B = s·(upper − D̃)`.
fn margins(batch: &OutputBatch, a: usize, m: usize, lo: f64, hi: f64, scale: f64) -> (f64, f64) {
    let k = batch.k() as f64;
    let d = (k - batch.u.row(a).dot(&batch.u.row(m))) / 2.0;
    (scale * (d - lo), scale * (hi - d))
}

/// Rank-consistency loss `Σ softplus(−A) + softplus(−B)` over every pair of
/// every partition, with margin scale `γ/K`.
pub fn rank_loss(batch: &OutputBatch, partitions: &[RankPartition], weights: &LossWeights) -> Result<f64> {
    let scale = weights.gamma / batch.k() as f64;
    let mut total = 0.0;
    for_each_pair(batch, partitions, |a, m, lo, hi| {
        let (ma, mb) = margins(batch, a, m, lo, hi, scale);
        total += softplus(-ma) + softplus(-mb);
    })?;
    Ok(total)
}

/// Gradient of [`rank_loss`] with respect to each output row. Each pair adds
/// `(γ/2K)·[σ(B) − σ(A)]` times its partner to both the anchor and the member.
pub fn rank_loss_grad(batch: &OutputBatch, partitions: &[RankPartition], weights: &LossWeights) -> Result<Array2<f64>> {
    let scale = weights.gamma / batch.k() as f64;
    let mut grad = Array2::<f64>::zeros(batch.u.raw_dim());
    for_each_pair(batch, partitions, |a, m, lo, hi| {
        let (ma, mb) = margins(batch, a, m, lo, hi, scale);
        let coef = 0.5 * scale * (sigmoid(mb) - sigmoid(ma));
        if a == m {
            // Only hand-built partitions can pair a sample with itself.
            grad.row_mut(a).scaled_add(2.0 * coef, &batch.u.row(a));
            return;
        }
        grad.row_mut(a).scaled_add(coef, &batch.u.row(m));
        grad.row_mut(m).scaled_add(coef, &batch.u.row(a));
    })?;
    Ok(grad)
}

fn logits(head: &ClassifierHead, batch: &OutputBatch) -> Result<Array2<f64>> {
    if head.w.ncols() != batch.k() || head.v.len() != head.w.nrows() {
        return Err(Error::dim(format!(
            "classifier W is {}x{}, v has {}, outputs have K={}",
            head.w.nrows(),
            head.w.ncols(),
            head.v.len(),
            batch.k()
        )));
    }
    Ok(batch.u.dot(&head.w.t()) + &head.v)
}

fn log_sum_exp(z: ArrayView1<'_, f64>) -> f64 {
    let max = z.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    max + z.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `Σᵢ [logΣ_c exp(zᵢ_c) − yᵢᵀzᵢ]` with `zᵢ = W uᵢ + v`. Labels are used as
/// given (not normalized), so a multi-label sample can score below zero.
pub fn classification_loss(batch: &OutputBatch, labels: ArrayView2<'_, u8>, head: &ClassifierHead) -> Result<f64> {
    check_labels(batch, labels, head.w.nrows())?;
    let z = logits(head, batch)?;
    Ok(z.outer_iter()
        .zip(labels.outer_iter())
        .map(|(zi, yi)| {
            let picked: f64 = zi.iter().zip(yi.iter()).map(|(&z, &y)| f64::from(y) * z).sum();
            log_sum_exp(zi) - picked
        })
        .sum())
}

/// Gradients of [`classification_loss`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierGrads {
    pub du: Array2<f64>,
    pub dw: Array2<f64>,
    pub dv: Array1<f64>,
}

pub fn classification_grads(
    batch: &OutputBatch,
    labels: ArrayView2<'_, u8>,
    head: &ClassifierHead,
) -> Result<ClassifierGrads> {
    check_labels(batch, labels, head.w.nrows())?;
    let mut residual = logits(head, batch)?;
    for (mut zi, yi) in residual.outer_iter_mut().zip(labels.outer_iter()) {
        let lse = log_sum_exp(zi.view());
        Zip::from(&mut zi).and(&yi).for_each(|z, &y| *z = (*z - lse).exp() - f64::from(y));
    }
    Ok(ClassifierGrads {
        du: residual.dot(&head.w),
        dw: residual.t().dot(&batch.u),
        dv: residual.sum_axis(Axis(0)),
    })
}

fn check_bank(batch: &OutputBatch, labels: ArrayView2<'_, u8>, bank: &CenterBank) -> Result<()> {
    if bank.centers.ncols() != batch.k() {
        return Err(Error::dim(format!("centers have K={}, outputs K={}", bank.centers.ncols(), batch.k())));
    }
    check_labels(batch, labels, bank.centers.nrows())
}

fn label_count(y: ArrayView1<'_, u8>) -> f64 {
    y.iter().map(|&v| f64::from(v)).sum()
}

/// `½ Σᵢ [Σ_t yᵢₜ ‖uᵢ − c_t‖²] / (Σ_t yᵢₜ + ε)`.
pub fn clustering_loss(batch: &OutputBatch, labels: ArrayView2<'_, u8>, bank: &CenterBank) -> Result<f64> {
    check_bank(batch, labels, bank)?;
    let mut total = 0.0;
    for (ui, yi) in batch.u.outer_iter().zip(labels.outer_iter()) {
        let mut num = 0.0;
        for (t, _) in yi.iter().enumerate().filter(|(_, &y)| y == 1) {
            num += ui.iter().zip(bank.centers.row(t)).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
        }
        total += num / (label_count(yi) + bank.eps);
    }
    Ok(0.5 * total)
}

/// Row `p` is `[Σ_t y_pt (u_p − c_t)] / (Σ_t y_pt + ε)`.
pub fn clustering_grad(batch: &OutputBatch, labels: ArrayView2<'_, u8>, bank: &CenterBank) -> Result<Array2<f64>> {
    check_bank(batch, labels, bank)?;
    let mut grad = Array2::<f64>::zeros(batch.u.raw_dim());
    for ((mut g, ui), yi) in grad.outer_iter_mut().zip(batch.u.outer_iter()).zip(labels.outer_iter()) {
        let norm = label_count(yi) + bank.eps;
        for (t, _) in yi.iter().enumerate().filter(|(_, &y)| y == 1) {
            Zip::from(&mut g).and(&ui).and(bank.centers.row(t)).for_each(|g, &u, &c| *g += (u - c) / norm);
        }
    }
    Ok(grad)
}

/// Moves every center toward the mean of its batch members:
/// `c_t ← c_t − α·[Σᵢ yᵢₜ(c_t − uᵢ)] / (Σᵢ yᵢₜ + ε)`. Classes absent from
/// the batch do not move.
pub fn center_update(batch: &OutputBatch, labels: ArrayView2<'_, u8>, bank: &CenterBank) -> Result<CenterBank> {
    check_bank(batch, labels, bank)?;
    let mut next = bank.clone();
    for (t, mut center) in next.centers.outer_iter_mut().enumerate() {
        let old = bank.centers.row(t);
        let mut delta = Array1::<f64>::zeros(batch.k());
        let mut members = 0.0;
        for (ui, yi) in batch.u.outer_iter().zip(labels.outer_iter()) {
            if yi[t] == 1 {
                Zip::from(&mut delta).and(&old).and(&ui).for_each(|d, &c, &u| *d += c - u);
                members += 1.0;
            }
        }
        let step = bank.alpha / (members + bank.eps);
        center.scaled_add(-step, &delta);
    }
    Ok(next)
}

/// `Σ ‖sign(uᵢ) − uᵢ‖²`.
pub fn quantization_loss(batch: &OutputBatch) -> f64 {
    batch.u.iter().map(|&x| (sign(x) - x).powi(2)).sum()
}

/// `2(u − sign(u))`, treating the codes as constants.
pub fn quantization_grad(batch: &OutputBatch) -> Array2<f64> {
    batch.u.mapv(|x| 2.0 * (x - sign(x)))
}

/// Unweighted term values and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub j_r: f64,
    pub j_cla: f64,
    pub j_clu: f64,
    pub j_q: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn combine(j_r: f64, j_cla: f64, j_clu: f64, j_q: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            j_r,
            j_cla,
            j_clu,
            j_q,
            total: j_r + w.lambda_cla * j_cla + w.lambda_clu * j_clu + w.lambda_q * j_q,
        }
    }
}

/// Everything the objective needs besides the outputs.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveInputs<'a> {
    pub labels: ArrayView2<'a, u8>,
    pub partitions: &'a [RankPartition],
    pub classifier: &'a ClassifierHead,
    pub bank: &'a CenterBank,
    pub weights: &'a LossWeights,
    pub toggles: TermToggles,
}

/// `J = J_r + λ_cla J_cla + λ_clu J_clu + λ_q J_q`; disabled terms read zero.
pub fn total_loss(batch: &OutputBatch, inputs: &ObjectiveInputs<'_>) -> Result<LossBreakdown> {
    let t = inputs.toggles;
    let j_r = if t.rank { rank_loss(batch, inputs.partitions, inputs.weights)? } else { 0.0 };
    let j_cla = if t.cla { classification_loss(batch, inputs.labels, inputs.classifier)? } else { 0.0 };
    let j_clu = if t.clu { clustering_loss(batch, inputs.labels, inputs.bank)? } else { 0.0 };
    let j_q = if t.quant { quantization_loss(batch) } else { 0.0 };
    Ok(LossBreakdown::combine(j_r, j_cla, j_clu, j_q, inputs.weights))
}

/// Weighted gradients of [`total_loss`].
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveGrads {
    pub du: Array2<f64>,
    pub dw: Array2<f64>,
    pub dv: Array1<f64>,
}

pub fn total_loss_grads(batch: &OutputBatch, inputs: &ObjectiveInputs<'_>) -> Result<(LossBreakdown, ObjectiveGrads)> {
    let loss = total_loss(batch, inputs)?;
    let t = inputs.toggles;
    let w = inputs.weights;
    let mut du = Array2::<f64>::zeros(batch.u.raw_dim());
    let mut dw = Array2::<f64>::zeros(inputs.classifier.w.raw_dim());
    let mut dv = Array1::<f64>::zeros(inputs.classifier.v.len());
    if t.rank {
        du += &rank_loss_grad(batch, inputs.partitions, w)?;
    }
    if t.cla {
        let g = classification_grads(batch, inputs.labels, inputs.classifier)?;
        du.scaled_add(w.lambda_cla, &g.du);
        dw.scaled_add(w.lambda_cla, &g.dw);
        dv.scaled_add(w.lambda_cla, &g.dv);
    }
    if t.clu {
        du.scaled_add(w.lambda_clu, &clustering_grad(batch, inputs.labels, inputs.bank)?);
    }
    if t.quant {
        du.scaled_add(w.lambda_q, &quantization_grad(batch));
    }
    Ok((loss, ObjectiveGrads { du, dw, dv }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankstruct::{partition_from_counts, IntervalStrategy, RankSubset};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn batch(u: Array2<f64>) -> OutputBatch {
        let n = u.nrows();
        OutputBatch::new(u, (0..n).collect()).unwrap()
    }

    fn single_pair(lo: f64, hi: f64, k: usize) -> Vec<RankPartition> {
        vec![RankPartition {
            anchor: 0,
            subsets: vec![RankSubset { common: 1, members: vec![1], lower: lo, upper: hi }],
            k,
        }]
    }

    #[test]
    fn softplus_values() {
        assert_abs_diff_eq!(softplus(0.0), LN_2, epsilon = 1e-15);
        assert!(softplus(-100.0) < 1e-40);
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
        assert!(softplus(1000.0).is_finite());
    }

    proptest! {
        #[test]
        fn softplus_identities(z in -200.0f64..200.0) {
            prop_assert!(softplus(z) >= z.max(0.0));
            prop_assert!((softplus(z) - softplus(-z) - z).abs() <= 1e-12 * z.abs().max(1.0));
            let h = 1e-6;
            let fd = (softplus(z + h) - softplus(z - h)) / (2.0 * h);
            prop_assert!((fd - sigmoid(z)).abs() < 1e-8);
        }

        #[test]
        fn clustering_descends_with_small_steps(
            u in prop::collection::vec(-2.0f64..2.0, 12),
            c in prop::collection::vec(-1.0f64..1.0, 9),
        ) {
            let b = batch(Array2::from_shape_vec((4, 3), u).unwrap());
            let bank = CenterBank::new(Array2::from_shape_vec((3, 3), c).unwrap(), 0.5).unwrap();
            let labels = array![[1u8, 0, 0], [1, 1, 0], [0, 1, 1], [1, 1, 1]];
            let before = clustering_loss(&b, labels.view(), &bank).unwrap();
            let g = clustering_grad(&b, labels.view(), &bank).unwrap();
            let stepped = batch(&b.u - &(0.1 * &g));
            let after = clustering_loss(&stepped, labels.view(), &bank).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn relaxed_hamming_values() {
        let ones = Array1::<f64>::ones(8);
        assert_eq!(relaxed_hamming(ones.view(), ones.view()).unwrap(), 0.0);
        assert_eq!(relaxed_hamming(ones.view(), (-&ones).view()).unwrap(), 8.0);
        assert_eq!(relaxed_hamming(array![1.0, -1.0].view(), array![1.0, 1.0].view()).unwrap(), 1.0);
        assert!(relaxed_hamming(ones.view(), array![1.0].view()).is_err());
    }

    #[test]
    fn rank_loss_at_interval_midpoint() {
        // K = 16, γ = 16 so γ/K = 1. u·v = 9.6 gives D̃ = (16 − 9.6)/2 = 3.2.
        let mut u = Array2::<f64>::zeros((2, 16));
        u[[0, 0]] = 1.0;
        u[[1, 0]] = 9.6;
        let b = batch(u);
        let w = LossWeights::default();
        let loss = rank_loss(&b, &single_pair(0.0, 6.4, 16), &w).unwrap();
        assert_abs_diff_eq!(loss, 2.0 * (1.0 + (-3.2f64).exp()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(loss, 0.079907, epsilon = 1e-6);
        // A = B there, so the pair contributes no gradient.
        let g = rank_loss_grad(&b, &single_pair(0.0, 6.4, 16), &w).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn rank_loss_on_lower_boundary() {
        let mut u = Array2::<f64>::zeros((2, 4));
        u[[0, 0]] = 2.0;
        u[[1, 0]] = 1.0;
        // D̃ = (4 − 2)/2 = 1 = lower.
        let b = batch(u);
        let w = LossWeights { gamma: 4.0, ..Default::default() };
        let loss = rank_loss(&b, &single_pair(1.0, 3.0, 4), &w).unwrap();
        assert_abs_diff_eq!(loss, LN_2 + softplus(-2.0), epsilon = 1e-15);
    }

    #[test]
    fn rank_terms_vanish_without_partitions() {
        let b = batch(Array2::ones((3, 4)));
        let w = LossWeights::default();
        assert_eq!(rank_loss(&b, &[], &w).unwrap(), 0.0);
        assert_eq!(rank_loss_grad(&b, &[], &w).unwrap(), Array2::zeros((3, 4)));
    }

    #[test]
    fn rank_loss_rejects_foreign_members() {
        let b = OutputBatch::new(Array2::ones((2, 4)), vec![5, 6]).unwrap();
        let parts = vec![partition_from_counts(5, &[(9, 1)], 4, IntervalStrategy::Crcdh).unwrap()];
        assert!(rank_loss(&b, &parts, &LossWeights::default()).is_err());
    }

    #[test]
    fn single_pair_gradient_matches_closed_form() {
        let u = array![[0.3, -0.7, 1.1, 0.2], [-0.4, 0.9, 0.5, -1.2]];
        let b = batch(u.clone());
        let w = LossWeights { gamma: 16.0, ..Default::default() };
        let (lo, hi) = (1.0, 3.0);
        let g = rank_loss_grad(&b, &single_pair(lo, hi, 4), &w).unwrap();
        let s = 16.0 / 4.0;
        let d = (4.0 - u.row(0).dot(&u.row(1))) / 2.0;
        let coef = s / 2.0 * (sigmoid(s * (hi - d)) - sigmoid(s * (d - lo)));
        for j in 0..4 {
            assert_abs_diff_eq!(g[[0, j]], coef * u[[1, j]], epsilon = 1e-15);
            assert_abs_diff_eq!(g[[1, j]], coef * u[[0, j]], epsilon = 1e-15);
        }
    }

    #[test]
    fn rank_loss_symmetric_under_role_swap() {
        let u = array![[0.3, -0.7, 1.1, 0.2], [-0.4, 0.9, 0.5, -1.2]];
        let b = batch(u);
        let w = LossWeights::default();
        let forward = single_pair(0.5, 2.5, 4);
        let swapped = vec![RankPartition {
            anchor: 1,
            subsets: vec![RankSubset { common: 1, members: vec![0], lower: 0.5, upper: 2.5 }],
            k: 4,
        }];
        assert_eq!(rank_loss(&b, &forward, &w).unwrap(), rank_loss(&b, &swapped, &w).unwrap());
    }

    fn head2(w: Array2<f64>) -> ClassifierHead {
        let c = w.nrows();
        ClassifierHead { w, v: Array1::zeros(c) }
    }

    #[test]
    fn classification_uniform_logits() {
        let b = batch(Array2::zeros((2, 3)));
        let head = head2(Array2::zeros((4, 3)));
        let labels = array![[1u8, 0, 0, 0], [1, 1, 0, 1]];
        let loss = classification_loss(&b, labels.view(), &head).unwrap();
        assert_abs_diff_eq!(loss, 2.0 * 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn classification_confident_and_multi_hot() {
        let b = batch(array![[1.0]]);
        let head = ClassifierHead { w: array![[10.0], [-10.0]], v: Array1::zeros(2) };
        let loss = classification_loss(&b, array![[1u8, 0]].view(), &head).unwrap();
        assert_abs_diff_eq!(loss, (-20f64).exp().ln_1p(), epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 2.06e-9, epsilon = 1e-11);

        let b = batch(array![[0.0]]);
        let multi = classification_loss(&b, array![[1u8, 1]].view(), &head).unwrap();
        assert_abs_diff_eq!(multi, LN_2, epsilon = 1e-15);
    }

    #[test]
    fn classification_grad_at_uniform_logits() {
        let b = batch(array![[0.0, 0.0]]);
        let w = array![[1.0, 2.0], [3.0, -1.0]];
        let head = ClassifierHead { w: w.clone(), v: Array1::zeros(2) };
        let g = classification_grads(&b, array![[1u8, 0]].view(), &head).unwrap();
        let expected = array![-0.5, 0.5].dot(&w);
        assert_abs_diff_eq!(g.du.row(0), expected.view(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.dv, array![-0.5, 0.5], epsilon = 1e-15);
    }

    #[test]
    fn classification_shape_mismatch() {
        let b = batch(Array2::zeros((2, 3)));
        let head = head2(Array2::zeros((4, 3)));
        assert!(classification_loss(&b, Array2::<u8>::zeros((2, 3)).view(), &head).is_err());
        assert!(classification_loss(&b, Array2::<u8>::zeros((1, 4)).view(), &head).is_err());
    }

    fn bank(centers: Array2<f64>) -> CenterBank {
        CenterBank::new(centers, 0.5).unwrap()
    }

    #[test]
    fn clustering_values() {
        let centers = array![[1.0, 0.0], [0.0, 1.0]];
        let at_center = batch(array![[1.0, 0.0]]);
        let l = array![[1u8, 0]];
        assert_eq!(clustering_loss(&at_center, l.view(), &bank(centers.clone())).unwrap(), 0.0);
        assert!(clustering_grad(&at_center, l.view(), &bank(centers.clone())).unwrap().iter().all(|&x| x == 0.0));

        let unit = batch(array![[1.0, 1.0]]);
        let loss = clustering_loss(&unit, l.view(), &bank(centers.clone())).unwrap();
        assert_abs_diff_eq!(loss, 0.5 / (1.0 + EPS), epsilon = 1e-15);

        // Equidistant from both centers: r² = 0.5.
        let mid = batch(array![[0.5, 0.5]]);
        let both = array![[1u8, 1]];
        let loss = clustering_loss(&mid, both.view(), &bank(centers.clone())).unwrap();
        assert_abs_diff_eq!(loss, 0.5 * 2.0 * 0.5 / (2.0 + EPS), epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 0.25, epsilon = 1e-8);

        let g = clustering_grad(&unit, both.view(), &bank(centers.clone())).unwrap();
        let expected: Array1<f64> = (2.0 * array![1.0, 1.0] - centers.row(0) - centers.row(1)) / (2.0 + EPS);
        assert_abs_diff_eq!(g.row(0), expected.view(), epsilon = 1e-15);
    }

    #[test]
    fn center_update_cases() {
        let centers = array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]];
        let b = batch(array![[1.0, 0.0]]);
        let next = center_update(&b, array![[1u8, 0, 0]].view(), &bank(centers.clone())).unwrap();
        assert_eq!(next.centers.row(0), centers.row(0));
        assert_eq!(next.centers.row(1), centers.row(1));
        assert_eq!(next.centers.row(2), centers.row(2));

        // m identical outputs at v with alpha = 1 land within ε of v.
        let v = array![3.0, -1.0];
        let m = 4;
        let u = Array2::from_shape_fn((m, 2), |(_, j)| v[j]);
        let labels = Array2::from_shape_fn((m, 3), |(_, t)| u8::from(t == 1));
        let full = CenterBank::new(centers.clone(), 1.0).unwrap();
        let next = center_update(&batch(u), labels.view(), &full).unwrap();
        let dist = (&centers.row(1) - &v).mapv(|x| x * x).sum().sqrt();
        let err = (&next.centers.row(1) - &v).mapv(|x| x * x).sum().sqrt();
        assert!(err < EPS * dist, "{err}");
        assert_eq!(next.centers.row(0), centers.row(0));
    }

    #[test]
    fn center_update_contracts_toward_member_mean() {
        let centers = array![[0.5, -2.0, 1.0]];
        let u = array![[1.0, 0.0, 2.0], [3.0, 1.0, -1.0], [0.5, 0.5, 0.5]];
        let labels = array![[1u8], [1], [1]];
        let b = bank(centers.clone());
        let next = center_update(&batch(u.clone()), labels.view(), &b).unwrap();
        let mean = u.mean_axis(Axis(0)).unwrap();
        let before = (&centers.row(0) - &mean).mapv(|x| x * x).sum().sqrt();
        let after = (&next.centers.row(0) - &mean).mapv(|x| x * x).sum().sqrt();
        let factor = 1.0 - 0.5 * 3.0 / (3.0 + EPS);
        assert_abs_diff_eq!(after, factor * before, epsilon = 1e-12);
    }

    #[test]
    fn quantization_values() {
        let binary = batch(array![[1.0, -1.0, 1.0], [-1.0, -1.0, 1.0]]);
        assert_eq!(quantization_loss(&binary), 0.0);
        assert!(quantization_grad(&binary).iter().all(|&x| x == 0.0));

        let zero = batch(Array2::zeros((1, 5)));
        assert_eq!(quantization_loss(&zero), 5.0);
        assert_eq!(quantization_grad(&zero), Array2::from_elem((1, 5), -2.0));
    }

    #[test]
    fn total_loss_combination() {
        let u = array![[0.3, -0.7, 1.1], [-0.4, 0.9, 0.5]];
        let b = batch(u);
        let labels = array![[1u8, 0], [1, 1]];
        let classifier = ClassifierHead { w: array![[0.2, 0.1, -0.3], [0.5, -0.2, 0.4]], v: array![0.1, -0.1] };
        let centers = bank(array![[0.1, 0.2, 0.3], [-0.1, 0.0, 0.4]]);
        let parts = vec![partition_from_counts(0, &[(1, 1)], 3, IntervalStrategy::Crcdh).unwrap()];
        let weights = LossWeights { gamma: 8.0, lambda_cla: 2.0, lambda_clu: 3.0, lambda_q: 5.0 };
        let mut inputs = ObjectiveInputs {
            labels: labels.view(),
            partitions: &parts,
            classifier: &classifier,
            bank: &centers,
            weights: &weights,
            toggles: TermToggles::ALL,
        };
        let l = total_loss(&b, &inputs).unwrap();
        assert_abs_diff_eq!(l.total, l.j_r + 2.0 * l.j_cla + 3.0 * l.j_clu + 5.0 * l.j_q, epsilon = 1e-12);

        let zero = LossWeights { gamma: 8.0, lambda_cla: 0.0, lambda_clu: 0.0, lambda_q: 0.0 };
        inputs.weights = &zero;
        inputs.partitions = &[];
        assert_eq!(total_loss(&b, &inputs).unwrap().total, 0.0);

        let quant_only = TermToggles { quant: true, ..TermToggles::NONE };
        let binary = batch(array![[1.0, -1.0, 1.0], [-1.0, 1.0, 1.0]]);
        inputs.weights = &weights;
        inputs.toggles = quant_only;
        assert_eq!(total_loss(&binary, &inputs).unwrap().total, 0.0);
    }
}
