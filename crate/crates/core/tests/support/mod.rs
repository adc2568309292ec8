//! Independent oracles and synthetic fixtures shared by the integration
//! tests. Nothing here calls the code under test for the quantity it checks.

#![allow(dead_code)]

use rand::Rng;

pub mod gradcheck;

/// Two-sample KS distance from scratch: evaluate both empirical CDFs at
/// every pooled value.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

/// Exact permutation p-value `P(D* >= D_obs)` over every split of the
/// pooled sample into groups of the original sizes.
pub fn exact_ks_p(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len();
    let (na, nb) = (a.len(), b.len());
    let observed = ks_distance(a, b);
    // Boundaries between distinct pooled values: CDFs are compared only there.
    let cuts: Vec<usize> = (1..=n)
        .filter(|&i| i == n || pooled[i] != pooled[i - 1])
        .collect();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        total += 1;
        let mut d: f64 = 0.0;
        let mut ca = 0usize;
        let mut prev = 0usize;
        for &c in &cuts {
            ca += (prev..c).filter(|&i| mask >> i & 1 == 1).count();
            let cb = c - ca;
            d = d.max((ca as f64 / na as f64 - cb as f64 / nb as f64).abs());
            prev = c;
        }
        if d >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Per-sentence projection objective `KL(q||p) + C * max(0, 1 - E_q[r])`
/// for binary distributions given by their positive mass.
pub fn projection_objective(q: f64, p: f64, r: (f64, f64), c: f64) -> f64 {
    let term = |qy: f64, py: f64| if qy == 0.0 { 0.0 } else { qy * (qy / py).ln() };
    let kl = term(q, p) + term(1.0 - q, 1.0 - p);
    let expected_r = q * r.0 + (1.0 - q) * r.1;
    kl + c * (1.0 - expected_r).max(0.0)
}

/// Minimum of [`projection_objective`] over `q` on a grid of `steps + 1`
/// points covering `[0, 1]`.
pub fn grid_minimum(p: f64, r: (f64, f64), c: f64, steps: usize) -> (f64, f64) {
    (0..=steps)
        .map(|i| {
            let q = i as f64 / steps as f64;
            (q, projection_objective(q, p, r, c))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

/// Fleiss' kappa over categories {0, 0.5, 1}, written out from the
/// textbook definition.
pub fn fleiss_kappa_oracle(rows: &[Vec<f64>]) -> Option<f64> {
    let n = rows[0].len() as f64;
    let cat = |s: f64| {
        if s == 0.0 {
            0
        } else if s == 1.0 {
            2
        } else {
            1
        }
    };
    let mut totals = [0.0; 3];
    let mut p_bar = 0.0;
    for row in rows {
        let mut counts = [0.0; 3];
        for &s in row {
            counts[cat(s)] += 1.0;
        }
        for k in 0..3 {
            totals[k] += counts[k];
        }
        p_bar += (counts.iter().map(|c| c * c).sum::<f64>() - n) / (n * (n - 1.0));
    }
    p_bar /= rows.len() as f64;
    let all = rows.len() as f64 * n;
    let p_e: f64 = totals.iter().map(|t| (t / all).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return None;
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

/// Mean and 1.96-sigma half-width by the two-pass algorithm.
pub fn two_pass_mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    (mean, 1.96 * sd / n.sqrt())
}

/// Integer-valued sample of size `n` drawn uniformly from `lo..=hi`.
pub fn int_sample<R: Rng>(rng: &mut R, n: usize, lo: i32, hi: i32) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..=hi) as f64).collect()
}

use logicsent::cnn::TrainConfig;
use logicsent::dataset::examples_from_table;
use logicsent::embeddings::EmbeddingTable;
use logicsent::experiment::{ExperimentData, ModelInput};
use logicsent::sst::{Label, LabeledInstance, NegationLexicon};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const POSITIVE: [&str; 6] = ["good", "great", "fine", "lovely", "fun", "sharp"];
pub const NEGATIVE: [&str; 6] = ["bad", "dull", "awful", "weak", "flat", "boring"];
pub const FILLER: [&str; 6] = ["the", "film", "plot", "cast", "is", "was"];

fn clause<R: Rng>(rng: &mut R, label: Label) -> Vec<String> {
    let words = match label {
        Label::Positive => &POSITIVE,
        Label::Negative => &NEGATIVE,
    };
    let mut out: Vec<String> = (0..rng.gen_range(1..=3))
        .map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string())
        .collect();
    out.push(words[rng.gen_range(0..words.len())].to_string());
    out
}

/// Toy sentiment sentences. A fraction `but_frac` are "A but B" with A and
/// B of opposite polarity and the label of B.
pub fn toy_instances<R: Rng>(rng: &mut R, n: usize, but_frac: f64) -> Vec<LabeledInstance> {
    let lexicon = NegationLexicon::default();
    (0..n)
        .map(|_| {
            let label = if rng.gen_bool(0.5) {
                Label::Positive
            } else {
                Label::Negative
            };
            let other = match label {
                Label::Positive => Label::Negative,
                Label::Negative => Label::Positive,
            };
            let tokens = if rng.gen_bool(but_frac) {
                let mut t = clause(rng, other);
                t.push("but".into());
                t.extend(clause(rng, label));
                t
            } else {
                clause(rng, label)
            };
            LabeledInstance::new(tokens, label, &lexicon)
        })
        .collect()
}

/// Train/dev/test toy data over a random embedding table of size `dim`.
pub fn toy_data(seed: u64, sizes: [usize; 3], but_frac: f64, dim: usize) -> ExperimentData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splits: Vec<Vec<LabeledInstance>> = sizes
        .iter()
        .map(|&n| toy_instances(&mut rng, n, but_frac))
        .collect();
    let vocab: std::collections::BTreeSet<&str> = splits
        .iter()
        .flatten()
        .flat_map(|i| i.tokens.iter().map(String::as_str))
        .collect();
    let table = EmbeddingTable::random(vocab, dim, 0.25, &mut rng).unwrap();
    ExperimentData {
        train: examples_from_table(&table, &splits[0]),
        dev: examples_from_table(&table, &splits[1]),
        test: examples_from_table(&table, &splits[2]),
        input: ModelInput::Table(table),
    }
}

/// A model small enough to train in well under a second.
pub fn tiny_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        widths: vec![1, 2],
        maps: 4,
        dropout: 0.5,
        batch_size: 8,
        max_epochs: 6,
        patience: 3,
        seed,
        ..TrainConfig::default()
    }
}
