//! Convolutional sentence classifier: parallel filter banks over word
//! vectors, ReLU, max-over-time pooling, dropout on the pooled features and a
//! two-way softmax.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use train::{
    train, train_with, Adadelta, BatchTargets, EarlyStopping, EpochStats, OneHotTargets,
    StopDecision, TrainConfig, TrainOutcome,
};

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Encoded, Example, SubsetFilter};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::sst::Label;

/// Distribution over `{+, -}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbDist {
    pub pos: f64,
    pub neg: f64,
}

impl ProbDist {
    pub const UNIFORM: ProbDist = ProbDist { pos: 0.5, neg: 0.5 };

    pub fn new(pos: f64, neg: f64) -> Result<Self> {
        let p = ProbDist { pos, neg };
        if !(pos >= 0.0 && neg >= 0.0) || ((pos + neg) - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "({pos}, {neg}) is not a probability distribution"
            )));
        }
        Ok(p)
    }

    pub fn from_pos(pos: f64) -> Self {
        ProbDist {
            pos,
            neg: 1.0 - pos,
        }
    }

    pub fn one_hot(label: Label) -> Self {
        match label {
            Label::Positive => ProbDist { pos: 1.0, neg: 0.0 },
            Label::Negative => ProbDist { pos: 0.0, neg: 1.0 },
        }
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Positive => self.pos,
            Label::Negative => self.neg,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.pos, self.neg]
    }

    /// Ties go to positive.
    pub fn argmax(&self) -> Label {
        if self.pos >= self.neg {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Both components clamped into `[lo, 1 - lo]` and renormalized.
    pub fn clamped(&self, lo: f64) -> ProbDist {
        let pos = self.pos.clamp(lo, 1.0 - lo);
        let neg = self.neg.clamp(lo, 1.0 - lo);
        let z = pos + neg;
        ProbDist {
            pos: pos / z,
            neg: neg / z,
        }
    }

    pub fn softmax(logits: [f64; 2]) -> ProbDist {
        let m = logits[0].max(logits[1]);
        let a = (logits[0] - m).exp();
        let b = (logits[1] - m).exp();
        ProbDist {
            pos: a / (a + b),
            neg: b / (a + b),
        }
    }
}

/// Anything that maps an encoded sentence to a label distribution.
pub trait Classifier: Sync {
    fn predict(&self, input: &Encoded) -> Result<ProbDist>;
}

/// Predictors that may look at more than the sentence itself (e.g. the B
/// clause when projecting).
impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict(&self, input: &Encoded) -> Result<ProbDist> {
        (**self).predict(input)
    }
}

pub trait ExamplePredictor: Sync {
    fn predict_example(&self, example: &Example) -> Result<ProbDist>;
}

impl<C: Classifier> ExamplePredictor for C {
    fn predict_example(&self, example: &Example) -> Result<ProbDist> {
        self.predict(&example.input)
    }
}

/// Filters of one width. `weight` is `maps × width × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub width: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub maps: usize,
    pub banks: Vec<ConvBank>,
    /// `2 × total_maps`, row 0 scores positive.
    pub dense_w: Vec<f64>,
    pub dense_b: [f64; 2],
    pub embeddings: Option<EmbeddingTable>,
    generation: u64,
}

/// A padded sentence matrix with the embedding row behind each position.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub ids: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    input: SentenceMatrix,
    /// Window start of the max for each map.
    argmax: Vec<usize>,
    /// Max pre-activation for each map.
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    hidden: Vec<f64>,
    pub probs: ProbDist,
    pub logits: [f64; 2],
}

/// Gradients shaped like [`ModelParams`]; embedding rows are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub banks: Vec<(Vec<f64>, Vec<f64>)>,
    pub dense_w: Vec<f64>,
    pub dense_b: [f64; 2],
    pub embedding: BTreeMap<usize, Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ParamGrads {
            banks: params
                .banks
                .iter()
                .map(|b| (vec![0.0; b.weight.len()], vec![0.0; b.bias.len()]))
                .collect(),
            dense_w: vec![0.0; params.dense_w.len()],
            dense_b: [0.0; 2],
            embedding: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, other: &ParamGrads) {
        for ((w, b), (ow, ob)) in self.banks.iter_mut().zip(&other.banks) {
            axpy(1.0, ow, w);
            axpy(1.0, ob, b);
        }
        axpy(1.0, &other.dense_w, &mut self.dense_w);
        self.dense_b[0] += other.dense_b[0];
        self.dense_b[1] += other.dense_b[1];
        for (row, g) in &other.embedding {
            match self.embedding.get_mut(row) {
                Some(acc) => axpy(1.0, g, acc),
                None => {
                    self.embedding.insert(*row, g.clone());
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.banks
            .iter()
            .all(|(w, b)| w.iter().chain(b).all(|&x| x == 0.0))
            && self.dense_w.iter().all(|&x| x == 0.0)
            && self.dense_b == [0.0; 2]
            && self.embedding.values().flatten().all(|&x| x == 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl ModelParams {
    /// Randomly initialized filters, zero dense layer. `embeddings` is `None`
    /// when inputs arrive as frozen vectors of dimension `dim`.
    pub fn init<R: Rng + ?Sized>(
        dim: usize,
        widths: &[usize],
        maps: usize,
        embeddings: Option<EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || maps == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::Validation(
                "model needs positive dimension, maps and filter widths".into(),
            ));
        }
        if let Some(t) = &embeddings {
            if t.dim() != dim {
                return Err(Error::Validation(format!(
                    "embedding dimension {} does not match model dimension {dim}",
                    t.dim()
                )));
            }
        }
        let banks = widths
            .iter()
            .map(|&w| {
                let bound = (6.0 / ((w * dim + maps * w) as f64)).sqrt();
                ConvBank {
                    width: w,
                    weight: (0..maps * w * dim)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; maps],
                }
            })
            .collect::<Vec<_>>();
        let total = maps * widths.len();
        Ok(ModelParams {
            dim,
            maps,
            banks,
            dense_w: vec![0.0; 2 * total],
            dense_b: [0.0; 2],
            embeddings,
            generation: 0,
        })
    }

    pub fn total_maps(&self) -> usize {
        self.maps * self.banks.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.banks.iter().map(|b| b.width).collect()
    }

    pub fn max_width(&self) -> usize {
        self.banks.iter().map(|b| b.width).max().unwrap_or(1)
    }

    pub fn embeddings_trainable(&self) -> bool {
        self.embeddings.as_ref().is_some_and(|t| t.trainable)
    }

    /// Bumped on every parameter update; caches from older generations are
    /// rejected by [`ModelParams::backward`].
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn touch(&mut self) {
        self.generation += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.banks
            .iter()
            .all(|b| b.weight.iter().chain(&b.bias).all(|x| x.is_finite()))
            && self
                .dense_w
                .iter()
                .chain(&self.dense_b)
                .all(|x| x.is_finite())
            && self
                .embeddings
                .as_ref()
                .is_none_or(|t| t.data().iter().all(|x| x.is_finite()))
    }

    /// Builds the zero-padded sentence matrix. Trailing padding (unknown or
    /// pad ids, or all-zero frozen vectors) is trimmed first, then the matrix
    /// is padded to the widest filter.
    pub fn embed(&self, input: &Encoded) -> Result<SentenceMatrix> {
        let d = self.dim;
        let (mut data, mut ids) = match input {
            Encoded::Ids(ids) => {
                let table = self.embeddings.as_ref().ok_or_else(|| {
                    Error::Validation("token ids given to a model without embeddings".into())
                })?;
                let mut data = Vec::with_capacity(ids.len() * d);
                for id in ids {
                    match id {
                        Some(i) if *i < table.len() => data.extend_from_slice(table.row(*i)),
                        Some(i) => {
                            return Err(Error::Validation(format!(
                                "token id {i} outside embedding table of {} rows",
                                table.len()
                            )))
                        }
                        None => data.extend(std::iter::repeat_n(0.0, d)),
                    }
                }
                (data, ids.clone())
            }
            Encoded::Vectors { dim, data } => {
                if *dim != d {
                    return Err(Error::Validation(format!(
                        "input vectors have dimension {dim}, model expects {d}"
                    )));
                }
                (data.clone(), vec![None; data.len() / d])
            }
        };
        if ids.is_empty() {
            return Err(Error::Empty("sentence".into()));
        }
        let mut rows = ids.len();
        while rows > 0
            && ids[rows - 1].is_none()
            && data[(rows - 1) * d..rows * d].iter().all(|&x| x == 0.0)
        {
            rows -= 1;
        }
        let rows_padded = rows.max(self.max_width());
        data.resize(rows_padded * d, 0.0);
        ids.resize(rows_padded, None);
        Ok(SentenceMatrix {
            rows: rows_padded,
            dim: d,
            data,
            ids,
        })
    }

    /// Forward pass. `mask` (one entry per pooled feature) multiplies the
    /// pooled vector; inverted-dropout masks hold `0` or `1 / (1 - rate)`.
    pub fn forward(&self, input: &Encoded, mask: Option<&[f64]>) -> Result<ForwardCache> {
        let x = self.embed(input)?;
        self.forward_matrix(x, mask)
    }

    pub fn forward_matrix(&self, x: SentenceMatrix, mask: Option<&[f64]>) -> Result<ForwardCache> {
        let d = self.dim;
        let total = self.total_maps();
        if let Some(m) = mask {
            if m.len() != total {
                return Err(Error::Validation(format!(
                    "dropout mask has {} entries, expected {total}",
                    m.len()
                )));
            }
        }
        let mut argmax = Vec::with_capacity(total);
        let mut pre = Vec::with_capacity(total);
        for bank in &self.banks {
            let w = bank.width;
            let span = w * d;
            let positions = x.rows + 1 - w;
            for m in 0..self.maps {
                let filt = &bank.weight[m * span..(m + 1) * span];
                let mut best = f64::NEG_INFINITY;
                let mut best_t = 0;
                for t in 0..positions {
                    let z = dot(filt, &x.data[t * d..t * d + span]);
                    if z > best {
                        best = z;
                        best_t = t;
                    }
                }
                argmax.push(best_t);
                pre.push(best + bank.bias[m]);
            }
        }
        let hidden: Vec<f64> = match mask {
            Some(mask) => pre
                .iter()
                .zip(mask)
                .map(|(&z, &k)| z.max(0.0) * k)
                .collect(),
            None => pre.iter().map(|&z| z.max(0.0)).collect(),
        };
        let logits = [
            dot(&self.dense_w[..total], &hidden) + self.dense_b[0],
            dot(&self.dense_w[total..], &hidden) + self.dense_b[1],
        ];
        let probs = ProbDist::softmax(logits);
        Ok(ForwardCache {
            generation: self.generation,
            input: x,
            argmax,
            pre,
            mask: mask.map(<[f64]>::to_vec),
            hidden,
            probs,
            logits,
        })
    }

    /// Accumulates the gradient of a loss with upstream `d_logits` into
    /// `grads`. Only the pooled (argmax) window of each map receives
    /// gradient; embedding rows get gradient only when trainable.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        d_logits: [f64; 2],
        grads: &mut ParamGrads,
    ) -> Result<()> {
        let total = self.total_maps();
        if cache.generation != self.generation
            || cache.pre.len() != total
            || cache.input.dim != self.dim
            || grads.banks.len() != self.banks.len()
        {
            return Err(Error::StaleCache);
        }
        let d = self.dim;
        axpy(d_logits[0], &cache.hidden, &mut grads.dense_w[..total]);
        axpy(d_logits[1], &cache.hidden, &mut grads.dense_w[total..]);
        grads.dense_b[0] += d_logits[0];
        grads.dense_b[1] += d_logits[1];

        let want_embedding = self.embeddings_trainable();
        let x = &cache.input;
        let mut d_input = if want_embedding {
            vec![0.0; x.data.len()]
        } else {
            Vec::new()
        };
        for (b, bank) in self.banks.iter().enumerate() {
            let span = bank.width * d;
            let (gw, gb) = &mut grads.banks[b];
            for m in 0..self.maps {
                let k = b * self.maps + m;
                if cache.pre[k] <= 0.0 {
                    continue;
                }
                let mut g = d_logits[0] * self.dense_w[k] + d_logits[1] * self.dense_w[total + k];
                if let Some(mask) = &cache.mask {
                    g *= mask[k];
                }
                if g == 0.0 {
                    continue;
                }
                gb[m] += g;
                let t = cache.argmax[k];
                let window = &x.data[t * d..t * d + span];
                axpy(g, window, &mut gw[m * span..(m + 1) * span]);
                if want_embedding {
                    axpy(
                        g,
                        &bank.weight[m * span..(m + 1) * span],
                        &mut d_input[t * d..t * d + span],
                    );
                }
            }
        }
        if want_embedding {
            for (pos, id) in x.ids.iter().enumerate() {
                if let Some(row) = id {
                    let g = &d_input[pos * d..(pos + 1) * d];
                    match grads.embedding.get_mut(row) {
                        Some(acc) => axpy(1.0, g, acc),
                        None => {
                            grads.embedding.insert(*row, g.to_vec());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backward(&self, cache: &ForwardCache, d_logits: [f64; 2]) -> Result<ParamGrads> {
        let mut g = ParamGrads::zeros_like(self);
        self.backward_into(cache, d_logits, &mut g)?;
        Ok(g)
    }

    /// Flattened views of every parameter tensor, in a fixed order shared
    /// with [`ModelParams::tensors_mut`] and the checkpoint format.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        for b in &self.banks {
            out.push((
                format!("conv{}.weight", b.width),
                vec![self.maps, b.width, self.dim],
                &b.weight,
            ));
            out.push((format!("conv{}.bias", b.width), vec![self.maps], &b.bias));
        }
        out.push((
            "dense.weight".into(),
            vec![2, self.total_maps()],
            &self.dense_w,
        ));
        out.push(("dense.bias".into(), vec![2], &self.dense_b));
        if let Some(t) = &self.embeddings {
            out.push(("embedding".into(), vec![t.len(), self.dim], t.data()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.banks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        if let Some(t) = &mut self.embeddings {
            out.push(t.data_mut());
        }
        out
    }

    /// Applies `f(tensor_index, flat_index, value)` to every scalar parameter.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, usize, &mut f64)) {
        for (ti, t) in self.tensors_mut().into_iter().enumerate() {
            for (i, v) in t.iter_mut().enumerate() {
                f(ti, i, v);
            }
        }
        self.touch();
    }
}

impl Classifier for ModelParams {
    fn predict(&self, input: &Encoded) -> Result<ProbDist> {
        Ok(self.forward(input, None)?.probs)
    }
}

/// Draws an inverted-dropout mask over `n` pooled features.
pub fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Fraction of filtered examples whose argmax matches the gold label.
pub fn accuracy<P: ExamplePredictor + ?Sized>(
    model: &P,
    examples: &[Example],
    filter: SubsetFilter,
) -> Result<f64> {
    let picked: Vec<&Example> = examples
        .iter()
        .filter(|e| filter.accepts(e.discourse))
        .collect();
    if picked.is_empty() {
        return Err(Error::Empty(format!("{filter:?} subset")));
    }
    let correct = picked
        .par_iter()
        .map(|e| Ok(usize::from(model.predict_example(e)?.argmax() == e.label)))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / picked.len() as f64)
}
