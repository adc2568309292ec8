//! Central finite-difference check of the analytic CNN gradients.

use logicsent::cnn::{ModelParams, ParamGrads, ProbDist};
use logicsent::dataset::Encoded;
use logicsent::embeddings::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Below this magnitude both gradients count as zero.
pub const FLOOR: f64 = 1e-7;

pub struct Case {
    pub model: ModelParams,
    pub input: Encoded,
    pub mask: Option<Vec<f64>>,
    pub target: ProbDist,
}

pub fn case(seed: u64, trainable: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 4;
    let words: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
    let mut table =
        EmbeddingTable::random(words.iter().map(String::as_str), dim, 0.5, &mut rng).unwrap();
    table.trainable = trainable;
    let widths = if seed.is_multiple_of(2) {
        vec![2]
    } else {
        vec![1, 3]
    };
    let mut model = ModelParams::init(dim, &widths, 2, Some(table), &mut rng).unwrap();
    model.for_each_param_mut(|_, _, v| *v = rng.gen_range(-1.0..1.0));
    let len = rng.gen_range(3..7);
    let mut ids: Vec<Option<usize>> = (0..len).map(|_| Some(rng.gen_range(0..6))).collect();
    // an unknown word in the middle reads as a zero row
    ids[1] = None;
    let total = model.total_maps();
    let mask = seed.is_multiple_of(3).then(|| {
        (0..total)
            .map(|_| if rng.gen_bool(0.5) { 2.0 } else { 0.0 })
            .collect()
    });
    let target = ProbDist::from_pos(rng.gen_range(0.0..1.0));
    Case {
        model,
        input: Encoded::Ids(ids),
        mask,
        target,
    }
}

fn loss(c: &Case, model: &ModelParams) -> f64 {
    let p = model.forward(&c.input, c.mask.as_deref()).unwrap().probs;
    -(c.target.pos * p.pos.ln() + c.target.neg * p.neg.ln())
}

fn analytic(c: &Case) -> Vec<Vec<f64>> {
    let cache = c.model.forward(&c.input, c.mask.as_deref()).unwrap();
    let p = cache.probs;
    let g: ParamGrads = c
        .model
        .backward(&cache, [p.pos - c.target.pos, p.neg - c.target.neg])
        .unwrap();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (w, b) in &g.banks {
        out.push(w.clone());
        out.push(b.clone());
    }
    out.push(g.dense_w.clone());
    out.push(g.dense_b.to_vec());
    if let Some(t) = c.model.embeddings.as_ref().filter(|t| t.trainable) {
        let mut e = vec![0.0; t.len() * t.dim()];
        for (row, v) in &g.embedding {
            e[row * t.dim()..(row + 1) * t.dim()].copy_from_slice(v);
        }
        out.push(e);
    }
    out
}

fn nudge(model: &ModelParams, tensor: usize, index: usize, delta: f64) -> ModelParams {
    let mut m = model.clone();
    m.for_each_param_mut(|t, i, v| {
        if t == tensor && i == index {
            *v += delta;
        }
    });
    m
}

/// Largest relative error over every scalar parameter of the case.
pub fn max_relative_error(c: &Case) -> f64 {
    let grads = analytic(c);
    let mut worst: f64 = 0.0;
    for (t, g) in grads.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let up = loss(c, &nudge(&c.model, t, i, EPS));
            let down = loss(c, &nudge(&c.model, t, i, -EPS));
            let numeric = (up - down) / (2.0 * EPS);
            let scale = a.abs().max(numeric.abs());
            if scale < FLOOR {
                continue;
            }
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}
