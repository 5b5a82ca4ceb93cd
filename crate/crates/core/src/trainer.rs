//! Hashing head and minibatch SGD over the full objective.
//!
//! The head maps a `D`-dimensional feature vector to `K` real outputs, either
//! linearly or through one `tanh` hidden layer. Each step forwards a batch,
//! builds rank partitions among the batch members, evaluates the enabled loss
//! terms, backpropagates into the head, takes a plain SGD step on the head and
//! the classifier, then moves the class centers.
//!
//! `RCCK` checkpoint layout, little-endian:
//!
//! ```text
//! "RCCK" | u32 version=1 | u32 D | u32 C | u32 K | u32 hidden
//! f64 tensors, row-major: H1, b1 (only if hidden > 0), H2, b2, W, v, centers
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::MultiLabelDataset;
use crate::io::{put_u32, to_u32, Reader};
use crate::objective::{
    center_update, total_loss_grads, CenterBank, ClassifierHead, LossBreakdown, LossWeights, ObjectiveInputs,
    OutputBatch, TermToggles, EPS,
};
use crate::rankstruct::{common_label_count, partition_from_counts, select_candidates, IntervalStrategy, RankPartition};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RCCK";
const VERSION: u32 = 1;

/// Center rate assigned to banks read back from a checkpoint.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Affine layer `y = W x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    fn sgd(&mut self, grad: &Dense, lr: f64) {
        self.weight.scaled_add(-lr, &grad.weight);
        self.bias.scaled_add(-lr, &grad.bias);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashingHead {
    pub hidden: Option<Dense>,
    pub output: Dense,
}

/// Activations kept from the forward pass for backprop.
pub struct ForwardCache {
    x: Array2<f64>,
    hidden: Option<Array2<f64>>,
}

/// Gradients with the same shapes as the head parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads {
    pub hidden: Option<Dense>,
    pub output: Dense,
}

impl HashingHead {
    pub fn k(&self) -> usize {
        self.output.weight.nrows()
    }

    pub fn d(&self) -> usize {
        match &self.hidden {
            Some(h) => h.weight.ncols(),
            None => self.output.weight.ncols(),
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden.as_ref().map_or(0, |h| h.weight.nrows())
    }

    /// `u = H2·x + b2`, or `u = H2·tanh(H1·x + b1) + b2` with a hidden layer.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.forward_batch(batch)?.row(0).to_owned())
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.d() {
            return Err(Error::dim(format!("input has {} features, head expects {}", x.ncols(), self.d())));
        }
        let hidden = self.hidden.as_ref().map(|h| h.apply(x).mapv(f64::tanh));
        let u = match &hidden {
            Some(a) => self.output.apply(a.view()),
            None => self.output.apply(x),
        };
        Ok((u, ForwardCache { x: x.to_owned(), hidden }))
    }

    /// Pulls `∂J/∂u` (one row per input) back to every head parameter.
    pub fn backward(&self, cache: &ForwardCache, du: ArrayView2<'_, f64>) -> HeadGrads {
        let input = cache.hidden.as_ref().unwrap_or(&cache.x);
        let output = Dense { weight: du.t().dot(input), bias: du.sum_axis(Axis(0)) };
        let hidden = match (&self.hidden, &cache.hidden) {
            (Some(_), Some(act)) => {
                let mut dpre = du.dot(&self.output.weight);
                dpre.zip_mut_with(act, |g, &a| *g *= 1.0 - a * a);
                Some(Dense { weight: dpre.t().dot(&cache.x), bias: dpre.sum_axis(Axis(0)) })
            }
            _ => None,
        };
        HeadGrads { hidden, output }
    }
}

/// Everything that is learned.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub head: HashingHead,
    pub classifier: ClassifierHead,
    pub bank: CenterBank,
}

impl ModelParams {
    pub fn d(&self) -> usize {
        self.head.d()
    }

    pub fn k(&self) -> usize {
        self.head.k()
    }

    pub fn c(&self) -> usize {
        self.classifier.w.nrows()
    }

    /// Errors unless the model consumes `d` features and emits `k` bits.
    pub fn check_dims(&self, d: usize, k: Option<usize>) -> Result<()> {
        if self.d() != d {
            return Err(Error::dim(format!("model expects D={}, data has D={d}", self.d())));
        }
        if let Some(k) = k {
            if self.k() != k {
                return Err(Error::dim(format!("model produces K={}, expected K={k}", self.k())));
            }
        }
        Ok(())
    }

    /// Real outputs for every sample of `ds`.
    pub fn encode(&self, ds: &MultiLabelDataset) -> Result<Array2<f64>> {
        self.check_dims(ds.d(), None)?;
        self.head.forward_batch(ds.features().mapv(f64::from).view())
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        if let Some(h) = &self.head.hidden {
            out.push(h.weight.as_slice().unwrap());
            out.push(h.bias.as_slice().unwrap());
        }
        out.push(self.head.output.weight.as_slice().unwrap());
        out.push(self.head.output.bias.as_slice().unwrap());
        out.push(self.classifier.w.as_slice().unwrap());
        out.push(self.classifier.v.as_slice().unwrap());
        out.push(self.bank.centers.as_slice().unwrap());
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(self.d(), "D")?);
        put_u32(&mut out, to_u32(self.c(), "C")?);
        put_u32(&mut out, to_u32(self.k(), "K")?);
        put_u32(&mut out, to_u32(self.head.hidden_units(), "hidden")?);
        for t in self.tensors() {
            for &x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf, "RCCK");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("RCCK: unsupported version {version}")));
        }
        let d = r.u32()? as usize;
        let c = r.u32()? as usize;
        let k = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        if d == 0 || c == 0 || k == 0 {
            return Err(Error::format(format!("RCCK: degenerate shape D={d} C={c} K={k}")));
        }
        let mut matrix = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let mut v = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                v.push(r.f64()?);
            }
            Ok(Array2::from_shape_vec((rows, cols), v).unwrap())
        };
        let hidden_layer = if hidden > 0 {
            let w = matrix(hidden, d)?;
            let b = matrix(1, hidden)?.remove_axis(Axis(0));
            Some(Dense { weight: w, bias: b })
        } else {
            None
        };
        let in_dim = if hidden > 0 { hidden } else { d };
        let output = Dense { weight: matrix(k, in_dim)?, bias: matrix(1, k)?.remove_axis(Axis(0)) };
        let classifier = ClassifierHead { w: matrix(c, k)?, v: matrix(1, c)?.remove_axis(Axis(0)) };
        let centers = matrix(c, k)?;
        r.finish()?;
        let params = ModelParams {
            head: HashingHead { hidden: hidden_layer, output },
            classifier,
            bank: CenterBank { centers, alpha: DEFAULT_ALPHA, eps: EPS },
        };
        if params.tensors().iter().any(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("RCCK: non-finite parameter"));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, params.to_bytes()?)?;
    Ok(())
}

/// Reads a checkpoint. The center rate is not stored and comes back as
/// [`DEFAULT_ALPHA`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    ModelParams::from_bytes(&fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Code length `K`.
    pub bits: usize,
    pub gamma: f64,
    pub lambda_cla: f64,
    pub lambda_clu: f64,
    pub lambda_q: f64,
    pub alpha: f64,
    pub n_r: usize,
    pub strategy: IntervalStrategy,
    /// Scale rank margins by `γ/K`; when off the scale is 1.
    pub normalize: bool,
    pub toggles: TermToggles,
    pub seed: u64,
    /// Hidden units; 0 gives a linear head.
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch: 48,
            epochs: 50,
            bits: 16,
            gamma: 16.0,
            lambda_cla: 20.0,
            lambda_clu: 20.0,
            lambda_q: 50.0,
            alpha: 0.5,
            n_r: 10_000,
            strategy: IntervalStrategy::Crcdh,
            normalize: true,
            toggles: TermToggles::ALL,
            seed: 0,
            hidden: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be > 0", self.lr));
        }
        if self.batch < 2 {
            return bad(format!("batch = {} must be >= 2", self.batch));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.bits == 0 {
            return bad("bits must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be > 0", self.gamma));
        }
        for (name, v) in [("lambda_cla", self.lambda_cla), ("lambda_clu", self.lambda_clu), ("lambda_q", self.lambda_q)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be >= 0"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} outside (0, 1]", self.alpha));
        }
        if self.n_r == 0 {
            return bad("n_r must be >= 1".into());
        }
        Ok(())
    }

    /// Loss weights with the effective `γ`: without normalization the margin
    /// scale `γ/K` collapses to 1, i.e. `γ = K`.
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            gamma: if self.normalize { self.gamma } else { self.bits as f64 },
            lambda_cla: self.lambda_cla,
            lambda_clu: self.lambda_clu,
            lambda_q: self.lambda_q,
        }
    }
}

/// Model variants from the ablation study. Every variant except `Nq` keeps
/// the quantization term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Full,
    R,
    RCla,
    RClu,
    Cla,
    Clu,
    Nq,
    Rcdh,
    RcdhInterval,
    RcdhNorm,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Full,
        Preset::R,
        Preset::RCla,
        Preset::RClu,
        Preset::Cla,
        Preset::Clu,
        Preset::Nq,
        Preset::Rcdh,
        Preset::RcdhInterval,
        Preset::RcdhNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Full => "c-rcdh",
            Preset::R => "c-rcdh_r",
            Preset::RCla => "c-rcdh_r+cla",
            Preset::RClu => "c-rcdh_r+clu",
            Preset::Cla => "c-rcdh_cla",
            Preset::Clu => "c-rcdh_clu",
            Preset::Nq => "c-rcdh_nq",
            Preset::Rcdh => "rcdh",
            Preset::RcdhInterval => "rcdh_interval",
            Preset::RcdhNorm => "rcdh_norm",
        }
    }

    pub fn apply(self, cfg: &mut TrainConfig) {
        let t = |rank, cla, clu, quant| TermToggles { rank, cla, clu, quant };
        let (toggles, strategy, normalize) = match self {
            Preset::Full => (t(true, true, true, true), IntervalStrategy::Crcdh, true),
            Preset::R => (t(true, false, false, true), IntervalStrategy::Crcdh, true),
            Preset::RCla => (t(true, true, false, true), IntervalStrategy::Crcdh, true),
            Preset::RClu => (t(true, false, true, true), IntervalStrategy::Crcdh, true),
            Preset::Cla => (t(false, true, false, true), IntervalStrategy::Crcdh, true),
            Preset::Clu => (t(false, false, true, true), IntervalStrategy::Crcdh, true),
            Preset::Nq => (t(true, true, true, false), IntervalStrategy::Crcdh, true),
            Preset::Rcdh => (t(true, true, false, true), IntervalStrategy::LegacyRcdh, false),
            Preset::RcdhInterval => (t(true, true, false, true), IntervalStrategy::Crcdh, false),
            Preset::RcdhNorm => (t(true, true, false, true), IntervalStrategy::LegacyRcdh, true),
        };
        cfg.toggles = toggles;
        cfg.strategy = strategy;
        cfg.normalize = normalize;
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights, zero biases, centers uniform in `(−0.1, 0.1)`,
/// all drawn from `cfg.seed` in the order H1, H2, W, centers.
pub fn init_params(d: usize, c: usize, cfg: &TrainConfig) -> Result<ModelParams> {
    if d == 0 || c == 0 {
        return Err(Error::invalid("feature dim and class count must be >= 1"));
    }
    cfg.validate()?;
    let k = cfg.bits;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hidden = (cfg.hidden > 0).then(|| Dense {
        weight: uniform_matrix(&mut rng, cfg.hidden, d, glorot(d, cfg.hidden)),
        bias: Array1::zeros(cfg.hidden),
    });
    let in_dim = if cfg.hidden > 0 { cfg.hidden } else { d };
    let output = Dense { weight: uniform_matrix(&mut rng, k, in_dim, glorot(in_dim, k)), bias: Array1::zeros(k) };
    let classifier = ClassifierHead { w: uniform_matrix(&mut rng, c, k, glorot(k, c)), v: Array1::zeros(c) };
    let centers = Array2::from_shape_simple_fn((c, k), || rng.random_range(-0.1..0.1));
    Ok(ModelParams {
        head: HashingHead { hidden, output },
        classifier,
        bank: CenterBank::new(centers, cfg.alpha)?,
    })
}

/// Gradients for every trainable tensor (centers move by their own rule).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub head: HeadGrads,
    pub dw: Array2<f64>,
    pub dv: Array1<f64>,
}

/// Forward, objective and full backward pass for one batch of inputs.
#[allow(clippy::too_many_arguments)]
pub fn param_gradients(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    indices: &[usize],
    labels: ArrayView2<'_, u8>,
    partitions: &[RankPartition],
    weights: &LossWeights,
    toggles: TermToggles,
) -> Result<(LossBreakdown, ParamGrads, OutputBatch)> {
    let (u, cache) = params.head.forward_cached(x)?;
    let batch = OutputBatch::new(u, indices.to_vec())?;
    let inputs = ObjectiveInputs {
        labels,
        partitions,
        classifier: &params.classifier,
        bank: &params.bank,
        weights,
        toggles,
    };
    let (loss, g) = total_loss_grads(&batch, &inputs)?;
    let head = params.head.backward(&cache, g.du.view());
    Ok((loss, ParamGrads { head, dw: g.dw, dv: g.dv }, batch))
}

/// Per-term losses averaged over the batches of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub batches: usize,
    pub mean: LossBreakdown,
}

/// Training state tied to one dataset and configuration.
pub struct Trainer<'a> {
    ds: &'a MultiLabelDataset,
    cfg: TrainConfig,
    weights: LossWeights,
    features: Array2<f64>,
    /// Sorted global top-`n_r` lists; `None` when nothing is truncated.
    candidates: Option<Vec<Vec<usize>>>,
}

impl<'a> Trainer<'a> {
    pub fn new(ds: &'a MultiLabelDataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.batch > ds.n() {
            return Err(Error::Config(format!("batch {} larger than dataset of {}", cfg.batch, ds.n())));
        }
        let candidates = if cfg.toggles.rank && cfg.n_r < ds.n() - 1 {
            let lists = (0..ds.n())
                .map(|i| {
                    let mut c = select_candidates(ds, i, cfg.n_r)?;
                    c.sort_unstable();
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(lists)
        } else {
            None
        };
        let features = ds.features().mapv(f64::from);
        let weights = cfg.loss_weights();
        Ok(Trainer { ds, cfg, weights, features, candidates })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn admits(&self, anchor: usize, j: usize) -> bool {
        self.candidates.as_ref().is_none_or(|c| c[anchor].binary_search(&j).is_ok())
    }

    /// Partitions for every anchor of the batch over its batch co-members,
    /// ascending by anchor index.
    pub fn batch_partitions(&self, rows: &[usize]) -> Result<Vec<RankPartition>> {
        let mut anchors = rows.to_vec();
        anchors.sort_unstable();
        let mut out = Vec::with_capacity(anchors.len());
        for &a in &anchors {
            let y = self.ds.label_row(a);
            let counts = rows
                .iter()
                .filter(|&&j| j != a && self.admits(a, j))
                .map(|&j| Ok((j, common_label_count(y, self.ds.label_row(j))?)))
                .collect::<Result<Vec<_>>>()?;
            if !counts.is_empty() {
                out.push(partition_from_counts(a, &counts, self.cfg.bits, self.cfg.strategy)?);
            }
        }
        Ok(out)
    }

    /// One SGD step on the given rows; returns the loss before the step.
    pub fn step(&self, params: &mut ModelParams, rows: &[usize]) -> Result<LossBreakdown> {
        let x = self.features.select(Axis(0), rows);
        let labels = self.ds.labels_of(rows);
        let partitions = if self.cfg.toggles.rank { self.batch_partitions(rows)? } else { Vec::new() };
        let (loss, grads, batch) =
            param_gradients(params, x.view(), rows, labels.view(), &partitions, &self.weights, self.cfg.toggles)?;
        let lr = self.cfg.lr;
        if let (Some(h), Some(g)) = (params.head.hidden.as_mut(), grads.head.hidden.as_ref()) {
            h.sgd(g, lr);
        }
        params.head.output.sgd(&grads.head.output, lr);
        params.classifier.w.scaled_add(-lr, &grads.dw);
        params.classifier.v.scaled_add(-lr, &grads.dv);
        if self.cfg.toggles.clu {
            params.bank = center_update(&batch, labels.view(), &params.bank)?;
        }
        Ok(loss)
    }

    /// Sample order for `epoch`: a shuffle driven by `(seed, epoch)`.
    pub fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..self.ds.n()).collect();
        order.shuffle(&mut rng);
        order
    }

    pub fn train_epoch(&self, params: &mut ModelParams, epoch: usize) -> Result<EpochStats> {
        if params.d() != self.ds.d() || params.c() != self.ds.c() || params.k() != self.cfg.bits {
            return Err(Error::dim(format!(
                "model D={} C={} K={} vs data D={} C={} and bits={}",
                params.d(),
                params.c(),
                params.k(),
                self.ds.d(),
                self.ds.c(),
                self.cfg.bits
            )));
        }
        let order = self.epoch_order(epoch);
        let mut sum = LossBreakdown::default();
        let mut batches = 0;
        for rows in order.chunks(self.cfg.batch) {
            let l = self.step(params, rows)?;
            sum.j_r += l.j_r;
            sum.j_cla += l.j_cla;
            sum.j_clu += l.j_clu;
            sum.j_q += l.j_q;
            sum.total += l.total;
            batches += 1;
        }
        let b = batches as f64;
        Ok(EpochStats {
            epoch,
            batches,
            mean: LossBreakdown {
                j_r: sum.j_r / b,
                j_cla: sum.j_cla / b,
                j_clu: sum.j_clu / b,
                j_q: sum.j_q / b,
                total: sum.total / b,
            },
        })
    }
}

/// Runs one epoch from scratch state; `epoch` picks the shuffle.
pub fn train_epoch(
    ds: &MultiLabelDataset,
    params: &ModelParams,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(ModelParams, EpochStats)> {
    let trainer = Trainer::new(ds, cfg.clone())?;
    let mut next = params.clone();
    let stats = trainer.train_epoch(&mut next, epoch)?;
    Ok((next, stats))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
}

/// Initializes from `cfg.seed` and runs `cfg.epochs` epochs.
pub fn train(ds: &MultiLabelDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    ds: &MultiLabelDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let trainer = Trainer::new(ds, cfg.clone())?;
    let mut params = init_params(ds.d(), ds.c(), cfg)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let stats = trainer.train_epoch(&mut params, epoch)?;
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { params, history })
}
