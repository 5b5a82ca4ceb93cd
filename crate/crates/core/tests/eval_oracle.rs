use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcdh::dataset::MultiLabelDataset;
use rcdh::metrics::{evaluate, EvalOptions};
use rcdh::retrieval::{BinaryCode, HashCodeSet};

fn random_labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Array2<u8> {
    let mut y = Array2::from_shape_simple_fn((n, c), || u8::from(rng.random_bool(0.35)));
    for mut row in y.rows_mut() {
        if row.iter().all(|&v| v == 0) {
            row[rng.random_range(0..c)] = 1;
        }
    }
    y
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<bool>> {
    (0..n).map(|_| (0..k).map(|_| rng.random()).collect()).collect()
}

fn code_set(bits: &[Vec<bool>]) -> HashCodeSet {
    let codes: Vec<BinaryCode> = bits.iter().map(|b| BinaryCode::from_bits(b).unwrap()).collect();
    HashCodeSet::from_codes(bits[0].len(), &codes).unwrap()
}

/// Rank by unpacked hamming distance, score with log2 discounts.
fn brute_force(
    ql: &Array2<u8>,
    gl: &Array2<u8>,
    qb: &[Vec<bool>],
    gb: &[Vec<bool>],
    p: usize,
    exclude_self: bool,
) -> (f64, f64) {
    let mut ndcg_sum = 0.0;
    let mut acg_sum = 0.0;
    for (qi, q) in qb.iter().enumerate() {
        let mut order: Vec<(usize, usize)> = gb
            .iter()
            .enumerate()
            .filter(|(g, _)| !(exclude_self && *g == qi))
            .map(|(g, b)| (b.iter().zip(q).filter(|(x, y)| x != y).count(), g))
            .collect();
        order.sort();
        let rel: Vec<f64> = order
            .iter()
            .map(|&(_, g)| (0..ql.ncols()).filter(|&t| ql[[qi, t]] == 1 && gl[[g, t]] == 1).count() as f64)
            .collect();
        let depth = p.min(rel.len());
        let dcg = |r: &[f64]| r.iter().take(depth).enumerate().map(|(i, &x)| (x.exp2() - 1.0) / ((i + 2) as f64).log2()).sum::<f64>();
        let mut ideal = rel.clone();
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let z = dcg(&ideal);
        ndcg_sum += if z > 0.0 { dcg(&rel) / z } else { 0.0 };
        acg_sum += rel[..depth].iter().sum::<f64>() / depth as f64;
    }
    (ndcg_sum / qb.len() as f64, acg_sum / qb.len() as f64)
}

#[test]
fn evaluate_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..20 {
        let (nq, ng, c, k) = (rng.random_range(1..12), rng.random_range(1..40), rng.random_range(1..6), rng.random_range(1..20));
        let p = rng.random_range(1..50);
        let (ql, gl) = (random_labels(&mut rng, nq, c), random_labels(&mut rng, ng, c));
        let (qb, gb) = (random_bits(&mut rng, nq, k), random_bits(&mut rng, ng, k));
        let queries = MultiLabelDataset::new(Array2::zeros((nq, 1)), ql.clone()).unwrap();
        let gallery = MultiLabelDataset::new(Array2::zeros((ng, 1)), gl.clone()).unwrap();
        let r = evaluate(&queries, &gallery, &code_set(&qb), &code_set(&gb), p, EvalOptions::default()).unwrap();
        let (n, a) = brute_force(&ql, &gl, &qb, &gb, p, false);
        assert!((r.ndcg - n).abs() < 1e-12, "trial {trial}: {} vs {n}", r.ndcg);
        assert!((r.acg - a).abs() < 1e-12, "trial {trial}: {} vs {a}", r.acg);
    }
}

#[test]
fn exclude_self_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let (n, c, k, p) = (rng.random_range(2..30), 4, 10, rng.random_range(1..10));
        let labels = random_labels(&mut rng, n, c);
        let bits = random_bits(&mut rng, n, k);
        let ds = MultiLabelDataset::new(Array2::zeros((n, 1)), labels.clone()).unwrap();
        let codes = code_set(&bits);
        let r = evaluate(&ds, &ds, &codes, &codes, p, EvalOptions { exclude_self: true }).unwrap();
        let (nd, ac) = brute_force(&labels, &labels, &bits, &bits, p, true);
        assert!((r.ndcg - nd).abs() < 1e-12 && (r.acg - ac).abs() < 1e-12);
    }
}

/// With uniformly random codes the expected ACG@p of a query is its mean
/// relevance over the gallery.
#[test]
fn random_codes_acg_is_mean_relevance() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (nq, ng, c, k, p) = (40, 200, 4, 16, 20);
    let ql = random_labels(&mut rng, nq, c);
    let gl = random_labels(&mut rng, ng, c);
    let queries = MultiLabelDataset::new(Array2::zeros((nq, 1)), ql.clone()).unwrap();
    let gallery = MultiLabelDataset::new(Array2::zeros((ng, 1)), gl.clone()).unwrap();
    let expected = (0..nq)
        .map(|q| {
            (0..ng)
                .map(|g| (0..c).filter(|&t| ql[[q, t]] == 1 && gl[[g, t]] == 1).count() as f64)
                .sum::<f64>()
                / ng as f64
        })
        .sum::<f64>()
        / nq as f64;
    let trials = 200;
    let mean = (0..trials)
        .map(|_| {
            let qc = code_set(&random_bits(&mut rng, nq, k));
            let gc = code_set(&random_bits(&mut rng, ng, k));
            evaluate(&queries, &gallery, &qc, &gc, p, EvalOptions::default()).unwrap().acg
        })
        .sum::<f64>()
        / trials as f64;
    // Per-trial ACG has sd well under 0.1; 200 trials puts the mean within ~0.01.
    assert!((mean - expected).abs() < 0.03, "{mean} vs {expected}");
}
