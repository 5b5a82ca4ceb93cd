//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Errors cross the boundary as strings so the same functions run natively
//! in tests.

use wasm_bindgen::prelude::*;

use rcdh::dataset::{generate_synthetic, parse_combos, MultiLabelDataset, SyntheticSpec};
use rcdh::metrics::{acg, evaluate_outputs, ndcg, EvalOptions, RelevanceList};
use rcdh::objective::TermToggles;
use rcdh::rankstruct::{partition_from_counts, IntervalStrategy};
use rcdh::trainer::{init_params, train_epoch, ModelParams, Preset, TrainConfig};

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Hamming bands for an anchor whose candidates share `counts[i]` labels with
/// it. Returns `[common, lower, upper, members]` per subset, flattened, best
/// level first.
#[wasm_bindgen]
pub fn intervals(counts: Vec<u32>, k: usize, strategy: &str) -> Result<Vec<f64>, String> {
    let strategy: IntervalStrategy = strategy.parse().map_err(text)?;
    let pairs: Vec<(usize, usize)> = counts.iter().enumerate().map(|(i, &c)| (i + 1, c as usize)).collect();
    let part = partition_from_counts(0, &pairs, k, strategy).map_err(text)?;
    Ok(part
        .subsets
        .iter()
        .flat_map(|s| [s.common as f64, s.lower, s.upper, s.members.len() as f64])
        .collect())
}

/// `[ndcg, acg]` of a relevance list in retrieved order, at depth `p`.
#[wasm_bindgen]
pub fn ranking_metrics(levels: Vec<u32>, p: usize) -> Result<Vec<f64>, String> {
    let rel = RelevanceList::new(levels, p).map_err(text)?;
    Ok(vec![ndcg(&rel, &rel.ideal()), acg(&rel)])
}

/// A small synthetic problem trained one epoch at a time.
#[wasm_bindgen]
pub struct ToyTrainer {
    ds: MultiLabelDataset,
    combo: Vec<u8>,
    cfg: TrainConfig,
    params: ModelParams,
    epoch: usize,
}

const TOY_COMBOS: &str = "100,010,001,110,011,101";

#[wasm_bindgen]
impl ToyTrainer {
    /// Six label combos over three classes, 30 samples each, 16-d features.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, bits: usize, preset: &str, lr: f64) -> Result<ToyTrainer, String> {
        let combos = parse_combos(TOY_COMBOS).map_err(text)?;
        let per_class = 30;
        let spec = SyntheticSpec { c: 3, per_class, d: 16, label_combos: combos.clone(), noise_sigma: 0.8, seed };
        let ds = generate_synthetic(&spec).map_err(text)?;
        let mut cfg = TrainConfig { bits, lr, batch: 30, seed, ..TrainConfig::default() };
        preset.parse::<Preset>().map_err(text)?.apply(&mut cfg);
        cfg.validate().map_err(text)?;
        let params = init_params(ds.d(), ds.c(), &cfg).map_err(text)?;
        let combo = (0..combos.len()).flat_map(|i| std::iter::repeat_n(i as u8, per_class)).collect();
        Ok(ToyTrainer { ds, combo, cfg, params, epoch: 0 })
    }

    /// Runs `epochs` epochs and returns the last epoch's mean weighted loss.
    pub fn step(&mut self, epochs: usize) -> Result<f64, String> {
        let mut last = f64::NAN;
        for _ in 0..epochs {
            self.epoch += 1;
            let (next, stats) = train_epoch(&self.ds, &self.params, &self.cfg, self.epoch).map_err(text)?;
            self.params = next;
            last = stats.mean.total;
        }
        Ok(last)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn bits(&self) -> usize {
        self.cfg.bits
    }

    pub fn len(&self) -> usize {
        self.ds.n()
    }

    pub fn is_empty(&self) -> bool {
        self.ds.n() == 0
    }

    /// Real-valued outputs, row-major `n × bits`.
    pub fn embeddings(&self) -> Result<Vec<f64>, String> {
        Ok(self.params.encode(&self.ds).map_err(text)?.iter().copied().collect())
    }

    /// Label-combo index of every sample, for colouring.
    pub fn combos(&self) -> Vec<u8> {
        self.combo.clone()
    }

    /// Mean NDCG@p of every sample against the rest.
    pub fn ndcg(&self, p: usize) -> Result<f64, String> {
        let u = self.params.encode(&self.ds).map_err(text)?;
        let r = evaluate_outputs(&self.ds, &self.ds, u.view(), u.view(), p, EvalOptions { exclude_self: true })
            .map_err(text)?;
        Ok(r.ndcg)
    }

    /// Enabled loss terms as `[rank, cla, clu, quant]`.
    pub fn toggles(&self) -> Vec<u8> {
        let TermToggles { rank, cla, clu, quant } = self.cfg.toggles;
        vec![rank as u8, cla as u8, clu as u8, quant as u8]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(
            intervals(vec![3, 1, 0], 16, "crcdh").unwrap(),
            vec![3.0, 0.0, 6.4, 1.0, 1.0, 6.4, 12.8, 1.0, 0.0, 9.6, 16.0, 1.0]
        );
        assert_eq!(
            intervals(vec![0, 3, 3, 1], 16, "legacy").unwrap(),
            vec![3.0, 0.0, 4.0, 2.0, 1.0, 4.0, 12.0, 1.0, 0.0, 12.0, 16.0, 1.0]
        );
        assert!(intervals(vec![], 16, "crcdh").is_err());
        assert!(intervals(vec![1], 16, "nope").is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = ranking_metrics(vec![2, 1, 0], 3).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-15);
        assert_eq!(m[1], 1.0);
        let r = ranking_metrics(vec![0, 1, 2], 3).unwrap();
        assert!((r[0] - 0.58688267143572).abs() < 1e-12);
        assert!(ranking_metrics(vec![1], 0).is_err());
    }

    #[test]
    fn toy_trainer_learns() {
        let mut t = ToyTrainer::new(3, 2, "c-rcdh", 1e-5).unwrap();
        assert_eq!((t.len(), t.bits()), (180, 2));
        assert_eq!(t.embeddings().unwrap().len(), 360);
        assert_eq!(t.combos()[179], 5);
        let before = t.ndcg(20).unwrap();
        let first = t.step(1).unwrap();
        let last = t.step(29).unwrap();
        assert_eq!(t.epoch(), 30);
        assert!(last.is_finite() && last < first, "{first} -> {last}");
        assert!(t.ndcg(20).unwrap() >= before - 0.05);
    }

    #[test]
    fn toy_trainer_rejects_bad_settings() {
        assert!(ToyTrainer::new(0, 0, "c-rcdh", 1e-5).is_err());
        assert!(ToyTrainer::new(0, 2, "nope", 1e-5).is_err());
        assert!(ToyTrainer::new(0, 2, "c-rcdh", -1.0).is_err());
        assert_eq!(ToyTrainer::new(0, 2, "c-rcdh_r", 1e-5).unwrap().toggles(), vec![1, 0, 0, 1]);
    }
}
