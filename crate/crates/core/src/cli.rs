//! Command-line surface: `gen-synth`, `train`, `encode`, `query`, `eval`,
//! `gradcheck`.
//!
//! Every `cmd_*` function writes its normal output to the supplied writer and
//! returns an error for anything that should end in a nonzero exit. The binary
//! prints errors to standard error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{generate_synthetic, load_dataset, parse_combos, save_dataset, SyntheticSpec};
use crate::gradcheck::{self, GradcheckDims, Term};
use crate::metrics::{evaluate, EvalOptions};
use crate::rankstruct::IntervalStrategy;
use crate::retrieval::{binarize, load_codes, query, save_codes, HashCodeSet};
use crate::trainer::{load_checkpoint, save_checkpoint, train_with, Preset, TrainConfig};
use crate::{Error, Result};

pub const DEFAULT_P: usize = 100;

const U_DUMP_MAGIC: &[u8; 4] = b"RCUM";

#[derive(Parser, Debug)]
#[command(name = "rcdh", version, about = "Rank-consistency deep hashing for multi-label retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic multi-label dataset (RCHD).
    GenSynth(GenSynthArgs),
    /// Train from a key=value config file.
    Train(TrainArgs),
    /// Encode a dataset with a trained checkpoint (RCBC).
    Encode(EncodeArgs),
    /// Rank gallery codes against one query.
    Query(QueryArgs),
    /// Mean NDCG@p and ACG@p over a query set.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub per_class: usize,
    #[arg(long)]
    pub dim: usize,
    /// Comma-separated label combos, e.g. `100,010,110`.
    #[arg(long)]
    pub combos: String,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EncodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the real-valued outputs as an f32 matrix.
    #[arg(long)]
    pub dump_u: Option<PathBuf>,
    /// Fail unless the checkpoint produces codes of this length.
    #[arg(long)]
    pub bits: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct QueryArgs {
    #[arg(long)]
    pub gallery: PathBuf,
    /// Use gallery code `index` as the query.
    #[arg(long, conflicts_with = "features")]
    pub index: Option<usize>,
    /// Comma-separated raw feature vector; needs `--checkpoint`.
    #[arg(long, requires = "checkpoint", allow_hyphen_values = true)]
    pub features: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long)]
    pub query_codes: PathBuf,
    #[arg(long)]
    pub gallery_codes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_P)]
    pub p: usize,
    /// Drop item `i` from query `i`'s ranking.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 6)]
    pub features: usize,
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negate one analytic gradient; the check must then fail.
    #[arg(long, hide = true)]
    pub inject_sign_flip: Option<String>,
}

/// Training config plus the paths and evaluation depth a run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub preset: Option<Preset>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub codes: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub loss_log: Option<PathBuf>,
    pub p: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            preset: None,
            dataset: None,
            checkpoint: None,
            codes: None,
            report: None,
            loss_log: None,
            p: DEFAULT_P,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("line {line}: bad value {value:?} for {key}: {e}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("line {line}: bad boolean {value:?} for {key}"))),
    }
}

impl RunConfig {
    /// Parses `key = value` lines. Relative paths resolve against `base`.
    /// A `preset` is applied before every other key, wherever it appears, so
    /// individual toggles can refine it.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if pairs.iter().any(|(key, _, _)| key == &k) {
                return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
            }
            pairs.push((k, v, i + 1));
        }

        let mut cfg = RunConfig::default();
        if let Some((_, v, _)) = pairs.iter().find(|(k, _, _)| k == "preset") {
            let preset: Preset = v.parse()?;
            preset.apply(&mut cfg.train);
            cfg.preset = Some(preset);
        }
        let path = |v: &str| base.join(v);
        for (k, v, line) in &pairs {
            let (v, line) = (v.as_str(), *line);
            let t = &mut cfg.train;
            match k.as_str() {
                "preset" => {}
                "dataset" => cfg.dataset = Some(path(v)),
                "checkpoint" => cfg.checkpoint = Some(path(v)),
                "codes" => cfg.codes = Some(path(v)),
                "report" => cfg.report = Some(path(v)),
                "loss_log" => cfg.loss_log = Some(path(v)),
                "p" => cfg.p = parse_value(k, v, line)?,
                "lr" => t.lr = parse_value(k, v, line)?,
                "batch" => t.batch = parse_value(k, v, line)?,
                "epochs" => t.epochs = parse_value(k, v, line)?,
                "bits" => t.bits = parse_value(k, v, line)?,
                "gamma" => t.gamma = parse_value(k, v, line)?,
                "lambda_cla" => t.lambda_cla = parse_value(k, v, line)?,
                "lambda_clu" => t.lambda_clu = parse_value(k, v, line)?,
                "lambda_q" => t.lambda_q = parse_value(k, v, line)?,
                "alpha" => t.alpha = parse_value(k, v, line)?,
                "n_r" => t.n_r = parse_value(k, v, line)?,
                "strategy" => t.strategy = v.parse::<IntervalStrategy>()?,
                "normalize" => t.normalize = parse_bool(k, v, line)?,
                "rank" => t.toggles.rank = parse_bool(k, v, line)?,
                "cla" => t.toggles.cla = parse_bool(k, v, line)?,
                "clu" => t.toggles.clu = parse_bool(k, v, line)?,
                "quant" => t.toggles.quant = parse_bool(k, v, line)?,
                "seed" => t.seed = parse_value(k, v, line)?,
                "hidden" => t.hidden = parse_value(k, v, line)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key {k:?}"))),
            }
        }
        if cfg.p == 0 {
            return Err(Error::Config("p must be >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every training key with its resolved value, in a fixed order.
    pub fn resolved_lines(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        if let Some(p) = self.preset {
            writeln!(s, "preset={}", p.name()).unwrap();
        }
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        for (k, v) in [
            ("dataset", show(&self.dataset)),
            ("checkpoint", show(&self.checkpoint)),
            ("codes", show(&self.codes)),
            ("loss_log", show(&self.loss_log)),
            ("p", self.p.to_string()),
            ("lr", t.lr.to_string()),
            ("batch", t.batch.to_string()),
            ("epochs", t.epochs.to_string()),
            ("bits", t.bits.to_string()),
            ("gamma", t.gamma.to_string()),
            ("lambda_cla", t.lambda_cla.to_string()),
            ("lambda_clu", t.lambda_clu.to_string()),
            ("lambda_q", t.lambda_q.to_string()),
            ("alpha", t.alpha.to_string()),
            ("n_r", t.n_r.to_string()),
            ("strategy", t.strategy.name().to_string()),
            ("normalize", t.normalize.to_string()),
            ("rank", t.toggles.rank.to_string()),
            ("cla", t.toggles.cla.to_string()),
            ("clu", t.toggles.clu.to_string()),
            ("quant", t.toggles.quant.to_string()),
            ("seed", t.seed.to_string()),
            ("hidden", t.hidden.to_string()),
        ] {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    fn require<'a>(&self, field: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
        field
            .as_ref()
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }
}

pub const LOSS_LOG_HEADER: &str = "epoch,j_r,j_cla,j_clu,j_q,total";

pub fn cmd_gen_synth(args: &GenSynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SyntheticSpec {
        c: args.classes,
        per_class: args.per_class,
        d: args.dim,
        label_combos: parse_combos(&args.combos)?,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, &args.out)?;
    writeln!(out, "N={} D={} C={}", ds.n(), ds.d(), ds.c())?;
    Ok(())
}

/// Trains per the config at `path`, writing the checkpoint, the CSV loss log
/// and, when configured, a report echoing the resolved config.
pub fn cmd_train(path: &Path, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    if cfg.train.epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    let dataset = cfg.require(&cfg.dataset, "dataset")?;
    let checkpoint = cfg.require(&cfg.checkpoint, "checkpoint")?;
    let loss_log = cfg.require(&cfg.loss_log, "loss_log")?;
    let ds = load_dataset(dataset)?;

    let mut log = String::from(LOSS_LOG_HEADER);
    log.push('\n');
    let outcome = train_with(&ds, &cfg.train, |s| {
        let m = &s.mean;
        writeln!(log, "{},{},{},{},{},{}", s.epoch, m.j_r, m.j_cla, m.j_clu, m.j_q, m.total).unwrap();
    })?;
    save_checkpoint(&outcome.params, checkpoint)?;
    fs::write(loss_log, &log)?;

    let last = outcome.history.last().map(|s| s.mean.total).unwrap_or(f64::NAN);
    let mut report = cfg.resolved_lines();
    writeln!(report, "n={}\nd={}\nc={}\nfinal_total={last}", ds.n(), ds.d(), ds.c()).unwrap();
    if let Some(r) = &cfg.report {
        fs::write(r, &report)?;
    }
    writeln!(out, "trained {} epochs on N={}: final total loss {last:.6}", cfg.train.epochs, ds.n())?;
    Ok(())
}

fn u_dump_bytes(u: &ndarray::Array2<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(12 + 4 * u.len());
    buf.extend_from_slice(U_DUMP_MAGIC);
    for dim in u.shape() {
        let dim = u32::try_from(*dim).map_err(|_| Error::format("output matrix too large"))?;
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    for &x in u.iter() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn cmd_encode(args: &EncodeArgs, out: &mut dyn Write) -> Result<()> {
    let params = load_checkpoint(&args.checkpoint)?;
    let ds = load_dataset(&args.dataset)?;
    params.check_dims(ds.d(), args.bits)?;
    let u = params.encode(&ds)?;
    let codes = HashCodeSet::from_outputs(u.view())?;
    save_codes(&codes, &args.out)?;
    if let Some(p) = &args.dump_u {
        fs::write(p, u_dump_bytes(&u)?)?;
    }
    writeln!(out, "encoded N={} K={}", codes.len(), codes.k())?;
    Ok(())
}

pub fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let gallery = load_codes(&args.gallery)?;
    let q = match (args.index, &args.features, &args.checkpoint) {
        (Some(i), None, _) => gallery.get(i)?,
        (None, Some(text), Some(ckpt)) => {
            let x = text
                .split(',')
                .map(|v| parse_value::<f64>("features", v.trim(), 1))
                .collect::<Result<Vec<_>>>()?;
            let params = load_checkpoint(ckpt)?;
            params.check_dims(x.len(), Some(gallery.k()))?;
            binarize(params.head.forward(ndarray::Array1::from(x).view())?.view())
        }
        _ => return Err(Error::Config("give either --index or --features with --checkpoint".into())),
    };
    let top = args.top.min(gallery.len());
    if top == 0 {
        return Err(Error::Config("top must be >= 1 and the gallery non-empty".into()));
    }
    for (rank, hit) in query(&gallery, &q, top)?.ranked.iter().enumerate() {
        writeln!(out, "{} {} {}", rank + 1, hit.index, hit.distance)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let queries = load_dataset(&args.queries)?;
    let gallery = load_dataset(&args.gallery)?;
    let qc = load_codes(&args.query_codes)?;
    let gc = load_codes(&args.gallery_codes)?;
    let r = evaluate(&queries, &gallery, &qc, &gc, args.p, EvalOptions { exclude_self: args.exclude_self })?;
    let text = format!("p={}\nndcg={:.6}\nacg={:.6}\nqueries={}\n", r.p, r.ndcg, r.acg, r.per_query.len());
    if let Some(path) = &args.report {
        fs::write(path, &text)?;
    }
    writeln!(out, "ndcg@{}={:.6}\nacg@{}={:.6}", r.p, r.ndcg, r.p, r.acg)?;
    Ok(())
}

/// Prints the per-term table. A failing check is an error.
pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let dims = GradcheckDims {
        k: args.k,
        batch: args.batch,
        classes: args.classes,
        features: args.features,
        hidden: args.hidden,
    };
    let mutation = args.inject_sign_flip.as_deref().map(Term::from_str).transpose()?;
    let report = gradcheck::run(dims, args.seed, mutation)?;
    write!(out, "{report}")?;
    if !report.passed() {
        return Err(Error::invalid(format!("gradcheck failed: worst relative error {:.3e}", report.worst())));
    }
    Ok(())
}

/// Dispatches one parsed command.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::GenSynth(a) => cmd_gen_synth(a, out),
        Command::Train(a) => cmd_train(&a.config, out),
        Command::Encode(a) => cmd_encode(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    }
}
