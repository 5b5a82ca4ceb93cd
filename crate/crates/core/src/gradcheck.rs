//! Central finite-difference verification of every analytic gradient.
//!
//! Each check perturbs one scalar at a time by `±STEP` and compares the
//! resulting slope of the loss against the analytic gradient entry. The error
//! of an entry is `|analytic − numeric| / max(|analytic|, |numeric|, REL_FLOOR)`;
//! the floor keeps entries that are zero up to rounding from dominating.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::objective::{
    classification_grads, classification_loss, clustering_grad, clustering_loss, quantization_grad,
    quantization_loss, rank_loss, rank_loss_grad, total_loss, CenterBank, ClassifierHead, LossWeights,
    ObjectiveInputs, OutputBatch, TermToggles,
};
use crate::rankstruct::{common_label_count, partition_from_counts, IntervalStrategy, RankPartition};
use crate::trainer::{init_params, param_gradients, ModelParams, TrainConfig};
use crate::Result;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradcheckDims {
    pub k: usize,
    pub batch: usize,
    pub classes: usize,
    pub features: usize,
    pub hidden: usize,
}

impl Default for GradcheckDims {
    fn default() -> Self {
        GradcheckDims { k: 16, batch: 8, classes: 5, features: 6, hidden: 4 }
    }
}

/// A gradient whose analytic value can be deliberately corrupted, to prove
/// the checker notices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    Rank,
    ClaU,
    ClaW,
    ClaV,
    Clu,
    Quant,
    Head,
}

impl Term {
    pub const ALL: [Term; 7] = [Term::Rank, Term::ClaU, Term::ClaW, Term::ClaV, Term::Clu, Term::Quant, Term::Head];

    pub fn name(self) -> &'static str {
        match self {
            Term::Rank => "rank/du",
            Term::ClaU => "cla/du",
            Term::ClaW => "cla/dW",
            Term::ClaV => "cla/dv",
            Term::Clu => "clu/du",
            Term::Quant => "quant/du",
            Term::Head => "head+classifier/dtheta",
        }
    }
}

impl std::str::FromStr for Term {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "rank" | "rank/du" => Term::Rank,
            "cla" | "cla/du" => Term::ClaU,
            "cla/dw" => Term::ClaW,
            "cla/dv" => Term::ClaV,
            "clu" | "clu/du" => Term::Clu,
            "quant" | "quant/du" => Term::Quant,
            "head" | "head+classifier/dtheta" => Term::Head,
            _ => return Err(crate::Error::Config(format!("unknown gradient term {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermReport {
    pub term: Term,
    pub max_rel_error: f64,
    pub entries: usize,
}

impl TermReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub seed: u64,
    pub dims: GradcheckDims,
    pub terms: Vec<TermReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.terms.iter().all(TermReport::passed)
    }

    pub fn worst(&self) -> f64 {
        self.terms.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.dims;
        writeln!(
            f,
            "gradcheck seed={} K={} B={} C={} D={} hidden={} step={STEP:e} tol={TOLERANCE:e}",
            self.seed, d.k, d.batch, d.classes, d.features, d.hidden
        )?;
        writeln!(f, "{:<24} {:>8} {:>14}  result", "term", "entries", "max_rel_err")?;
        for t in &self.terms {
            writeln!(
                f,
                "{:<24} {:>8} {:>14.3e}  {}",
                t.term.name(),
                t.entries,
                t.max_rel_error,
                if t.passed() { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Relative error with the fixed denominator floor.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    rel_error_floor(analytic, numeric, REL_FLOOR)
}

pub fn rel_error_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Denominator floor for a loss of size `|f|`. A central difference at
/// [`STEP`] carries roundoff up to about `ε·|f|/STEP`; entries smaller than
/// that over [`TOLERANCE`] are judged against this floor instead.
pub fn noise_floor(f: f64) -> f64 {
    (f64::EPSILON * f.abs() / (STEP * TOLERANCE)).max(REL_FLOOR)
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_gradient(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let plus = f(x);
            x[i] = orig - STEP;
            let minus = f(x);
            x[i] = orig;
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

fn max_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_error_floor(a, n, floor)).fold(0.0, f64::max)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Problem {
    u: Array2<f64>,
    labels: Array2<u8>,
    partitions: Vec<RankPartition>,
    classifier: ClassifierHead,
    bank: CenterBank,
    x: Array2<f64>,
    params: ModelParams,
}

fn problem(dims: GradcheckDims, seed: u64) -> Result<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, k, c) = (dims.batch, dims.k, dims.classes);
    // Keep every coordinate away from the sign jump at zero.
    let u = Array2::from_shape_simple_fn((b, k), || {
        let v: f64 = normal(&mut rng);
        if v.abs() < 0.05 {
            0.05f64.copysign(v) + v
        } else {
            v
        }
    });
    let mut labels = Array2::<u8>::from_shape_simple_fn((b, c), || u8::from(rng.random_bool(0.4)));
    for i in 0..b {
        let t = rng.random_range(0..c);
        labels[[i, t]] = 1;
    }
    let mut partitions = Vec::new();
    for a in 0..b {
        let counts = (0..b)
            .filter(|&j| j != a)
            .map(|j| Ok((j, common_label_count(labels.row(a), labels.row(j))?)))
            .collect::<Result<Vec<_>>>()?;
        if !counts.is_empty() {
            partitions.push(partition_from_counts(a, &counts, k, IntervalStrategy::Crcdh)?);
        }
    }
    let classifier = ClassifierHead {
        w: Array2::from_shape_simple_fn((c, k), || 0.5 * normal(&mut rng)),
        v: Array1::from_shape_simple_fn(c, || 0.5 * normal(&mut rng)),
    };
    let bank = CenterBank::new(Array2::from_shape_simple_fn((c, k), || 0.5 * normal(&mut rng)), 0.5)?;
    let x = Array2::from_shape_simple_fn((b, dims.features), || normal(&mut rng));
    let cfg = TrainConfig { bits: k, hidden: dims.hidden, seed: seed ^ 0x5eed, ..Default::default() };
    let mut params = init_params(dims.features, c, &cfg)?;
    params.classifier = classifier.clone();
    params.bank = bank.clone();
    Ok(Problem { u, labels, partitions, classifier, bank, x, params })
}

fn flip(term: Term, mutation: Option<Term>, g: &mut [f64]) {
    if mutation == Some(term) {
        g.iter_mut().for_each(|v| *v = -*v);
    }
}

fn batch_of(u: &Array2<f64>) -> OutputBatch {
    OutputBatch { u: u.clone(), indices: (0..u.nrows()).collect() }
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// Runs every check on one random problem. `mutation` negates the analytic
/// gradient of that term before comparing.
pub fn run(dims: GradcheckDims, seed: u64, mutation: Option<Term>) -> Result<GradcheckReport> {
    let p = problem(dims, seed)?;
    let weights = LossWeights::default();
    let shape = p.u.raw_dim();
    let mut terms = Vec::new();
    let mut push = |term: Term, f0: f64, mut analytic: Vec<f64>, numeric: Vec<f64>| {
        flip(term, mutation, &mut analytic);
        let max_rel_error = max_error(&analytic, &numeric, noise_floor(f0));
        terms.push(TermReport { term, max_rel_error, entries: analytic.len() });
    };
    let with_u = |data: &[f64]| batch_of(&Array2::from_shape_vec(shape, data.to_vec()).unwrap());

    let base = batch_of(&p.u);
    let mut u_flat = flat(&p.u);

    let analytic = flat(&rank_loss_grad(&base, &p.partitions, &weights)?);
    let numeric = numeric_gradient(&mut u_flat, |d| rank_loss(&with_u(d), &p.partitions, &weights).unwrap());
    push(Term::Rank, rank_loss(&base, &p.partitions, &weights)?, analytic, numeric);

    let cg = classification_grads(&base, p.labels.view(), &p.classifier)?;
    let cla0 = classification_loss(&base, p.labels.view(), &p.classifier)?;
    let numeric =
        numeric_gradient(&mut u_flat, |d| classification_loss(&with_u(d), p.labels.view(), &p.classifier).unwrap());
    push(Term::ClaU, cla0, flat(&cg.du), numeric);

    let mut w_flat = flat(&p.classifier.w);
    let numeric = numeric_gradient(&mut w_flat, |d| {
        let head = ClassifierHead { w: Array2::from_shape_vec(p.classifier.w.raw_dim(), d.to_vec()).unwrap(), v: p.classifier.v.clone() };
        classification_loss(&base, p.labels.view(), &head).unwrap()
    });
    push(Term::ClaW, cla0, flat(&cg.dw), numeric);

    let mut v_flat = p.classifier.v.to_vec();
    let numeric = numeric_gradient(&mut v_flat, |d| {
        let head = ClassifierHead { w: p.classifier.w.clone(), v: Array1::from(d.to_vec()) };
        classification_loss(&base, p.labels.view(), &head).unwrap()
    });
    push(Term::ClaV, cla0, cg.dv.to_vec(), numeric);

    let analytic = flat(&clustering_grad(&base, p.labels.view(), &p.bank)?);
    let numeric = numeric_gradient(&mut u_flat, |d| clustering_loss(&with_u(d), p.labels.view(), &p.bank).unwrap());
    push(Term::Clu, clustering_loss(&base, p.labels.view(), &p.bank)?, analytic, numeric);

    let analytic = flat(&quantization_grad(&base));
    let numeric = numeric_gradient(&mut u_flat, |d| quantization_loss(&with_u(d)));
    push(Term::Quant, quantization_loss(&base), analytic, numeric);

    // Whole objective through the head, against every head and classifier entry.
    let indices: Vec<usize> = (0..dims.batch).collect();
    let (_, grads, _) = param_gradients(
        &p.params,
        p.x.view(),
        &indices,
        p.labels.view(),
        &p.partitions,
        &weights,
        TermToggles::ALL,
    )?;
    let mut analytic = Vec::new();
    if let Some(h) = &grads.head.hidden {
        analytic.extend(h.weight.iter().chain(h.bias.iter()));
    }
    analytic.extend(grads.head.output.weight.iter().chain(grads.head.output.bias.iter()));
    analytic.extend(grads.dw.iter().chain(grads.dv.iter()));

    let mut theta = Vec::new();
    if let Some(h) = &p.params.head.hidden {
        theta.extend(h.weight.iter().chain(h.bias.iter()));
    }
    theta.extend(p.params.head.output.weight.iter().chain(p.params.head.output.bias.iter()));
    theta.extend(p.params.classifier.w.iter().chain(p.params.classifier.v.iter()));

    let unpack = |d: &[f64]| -> ModelParams {
        let mut m = p.params.clone();
        let mut it = d.iter().copied();
        if let Some(h) = m.head.hidden.as_mut() {
            h.weight.iter_mut().chain(h.bias.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        let o = &mut m.head.output;
        o.weight.iter_mut().chain(o.bias.iter_mut()).for_each(|v| *v = it.next().unwrap());
        let cl = &mut m.classifier;
        cl.w.iter_mut().chain(cl.v.iter_mut()).for_each(|v| *v = it.next().unwrap());
        m
    };
    let objective = |d: &[f64]| {
        let m = unpack(d);
        let u = m.head.forward_batch(p.x.view()).unwrap();
        let inputs = ObjectiveInputs {
            labels: p.labels.view(),
            partitions: &p.partitions,
            classifier: &m.classifier,
            bank: &m.bank,
            weights: &weights,
            toggles: TermToggles::ALL,
        };
        total_loss(&batch_of(&u), &inputs).unwrap().total
    };
    let f0 = objective(&theta);
    let numeric = numeric_gradient(&mut theta, objective);
    push(Term::Head, f0, analytic, numeric);

    Ok(GradcheckReport { seed, dims, terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dims_pass() {
        let r = run(GradcheckDims::default(), 1, None).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.terms.len(), Term::ALL.len());
    }

    #[test]
    fn sign_flip_is_caught() {
        for term in Term::ALL {
            let r = run(GradcheckDims::default(), 2, Some(term)).unwrap();
            let t = r.terms.iter().find(|t| t.term == term).unwrap();
            assert!(!t.passed(), "{}", r);
        }
    }

    #[test]
    fn floor_tracks_loss_size() {
        assert_eq!(noise_floor(1.0), REL_FLOOR);
        assert_eq!(noise_floor(-1.0), REL_FLOOR);
        let big = noise_floor(1e4);
        assert!(big > REL_FLOOR);
        assert!((big - f64::EPSILON * 1e4 / (STEP * TOLERANCE)).abs() < 1e-15);
        assert_eq!(rel_error(2.0, 1.0), 0.5);
        assert_eq!(rel_error(0.0, 1e-6), 1e-3);
    }

    #[test]
    fn terms_parse() {
        assert_eq!("rank".parse::<Term>().unwrap(), Term::Rank);
        assert_eq!("cla/dw".parse::<Term>().unwrap(), Term::ClaW);
        assert!("foo".parse::<Term>().is_err());
    }
}
