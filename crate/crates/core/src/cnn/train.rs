use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, dropout_mask, ForwardCache, ModelParams, ParamGrads, ProbDist};
use crate::dataset::{Example, SubsetFilter};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Examples per gradient-accumulation task. Fixed so that the reduction
/// order, and therefore the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 4;

/// Lower clamp on predicted probabilities inside log-losses.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub maps: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub rho: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub train_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            widths: vec![3, 4, 5],
            maps: 100,
            dropout: 0.5,
            batch_size: 50,
            rho: 0.95,
            epsilon: 1e-6,
            max_epochs: 20,
            patience: 5,
            seed: 0,
            train_embeddings: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("filter widths must be non-empty and positive");
        }
        if self.maps == 0 {
            return bad("maps must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon <= 0.0 {
            return bad("adadelta needs rho in [0, 1) and epsilon > 0");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        Ok(())
    }

    /// Initializes a model for this config. `table` is `None` for frozen
    /// vector inputs of dimension `dim`.
    pub fn init_model(&self, dim: usize, table: Option<EmbeddingTable>) -> Result<ModelParams> {
        self.validate()?;
        let table = table.map(|mut t| {
            t.trainable = self.train_embeddings;
            t
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        ModelParams::init(dim, &self.widths, self.maps, table, &mut rng)
    }
}

/// Per-epoch training record. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub pi: f64,
    pub dev_acc: f64,
    pub dev_acc_but: Option<f64>,
    pub mean_teacher_kl: Option<f64>,
    #[serde(skip)]
    pub train_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best dev accuracy; ties keep the earlier epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn update(&mut self, epoch: usize, dev_acc: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if dev_acc <= best => {}
            _ => {
                self.best = Some((epoch, dev_acc));
                return StopDecision::Improved;
            }
        }
        let (best_epoch, _) = self.best.expect("set above");
        if epoch - best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Adadelta with per-parameter running averages. Embedding rows are
/// updated lazily: only rows that received gradient in a step.
#[derive(Debug, Clone)]
pub struct Adadelta {
    rho: f64,
    eps: f64,
    sq_grad: Vec<Vec<f64>>,
    sq_delta: Vec<Vec<f64>>,
}

impl Adadelta {
    pub fn new(model: &ModelParams, rho: f64, eps: f64) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|(_, _, t)| t.len()).collect();
        Adadelta {
            rho,
            eps,
            sq_grad: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            sq_delta: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn update(
        &mut self,
        tensor: usize,
        offset: usize,
        param: &mut [f64],
        grad: &[f64],
        scale: f64,
    ) {
        let (rho, eps) = (self.rho, self.eps);
        let eg = &mut self.sq_grad[tensor][offset..offset + param.len()];
        let ed = &mut self.sq_delta[tensor][offset..offset + param.len()];
        for i in 0..param.len() {
            let g = grad[i] * scale;
            eg[i] = rho * eg[i] + (1.0 - rho) * g * g;
            let step = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g;
            ed[i] = rho * ed[i] + (1.0 - rho) * step * step;
            param[i] += step;
        }
    }

    /// Applies `scale * grads`.
    pub fn step(&mut self, model: &mut ModelParams, grads: &ParamGrads, scale: f64) {
        let mut ti = 0;
        for (bank, (gw, gb)) in model.banks.iter_mut().zip(&grads.banks) {
            self.update(ti, 0, &mut bank.weight, gw, scale);
            self.update(ti + 1, 0, &mut bank.bias, gb, scale);
            ti += 2;
        }
        self.update(ti, 0, &mut model.dense_w, &grads.dense_w, scale);
        self.update(ti + 1, 0, &mut model.dense_b, &grads.dense_b, scale);
        ti += 2;
        if let Some(table) = model.embeddings.as_mut().filter(|t| t.trainable) {
            let d = table.dim();
            for (&row, g) in &grads.embedding {
                self.update(ti, row * d, table.row_mut(row), g, scale);
            }
        }
        model.touch();
    }
}

/// Supplies the soft targets each training example is fit against.
pub trait BatchTargets {
    /// `student` holds the training-mode predictions for `batch`.
    fn targets(
        &mut self,
        epoch: usize,
        model: &ModelParams,
        batch: &[&Example],
        student: &[ProbDist],
    ) -> Result<Vec<ProbDist>>;

    /// Ground-truth weight reported for `epoch` (1-based).
    fn pi(&self, _epoch: usize) -> f64 {
        1.0
    }

    /// Called once per epoch; returns the mean teacher KL if one exists.
    fn finish_epoch(&mut self) -> Option<f64> {
        None
    }
}

/// Plain cross-entropy against the gold label.
#[derive(Debug, Clone, Copy, Default)]
pub struct OneHotTargets;

impl BatchTargets for OneHotTargets {
    fn targets(
        &mut self,
        _epoch: usize,
        _model: &ModelParams,
        batch: &[&Example],
        _student: &[ProbDist],
    ) -> Result<Vec<ProbDist>> {
        Ok(batch.iter().map(|e| ProbDist::one_hot(e.label)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best dev accuracy.
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

pub fn cross_entropy(pred: ProbDist, target: ProbDist) -> f64 {
    -(target.pos * pred.pos.max(PROB_FLOOR).ln() + target.neg * pred.neg.max(PROB_FLOOR).ln())
}

/// Minibatch cross-entropy training with early stopping on dev accuracy.
pub fn train(
    model: ModelParams,
    train_set: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(
        model,
        train_set,
        dev,
        cfg,
        &mut OneHotTargets,
        &mut |_, _| Ok(()),
    )
}

pub fn train_with(
    mut model: ModelParams,
    train_set: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    targets: &mut dyn BatchTargets,
    on_epoch: &mut dyn FnMut(&EpochStats, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if dev.is_empty() {
        return Err(Error::Empty("dev set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Adadelta::new(&model, cfg.rho, cfg.epsilon);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let total = model.total_maps();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train_set[i]).collect();
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| (cfg.dropout > 0.0).then(|| dropout_mask(total, cfg.dropout, &mut rng)))
                .collect();
            let caches: Vec<ForwardCache> = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(e, m)| model.forward(&e.input, m.as_deref()))
                .collect::<Result<_>>()?;
            let student: Vec<ProbDist> = caches.iter().map(|c| c.probs).collect();
            let tgts = targets.targets(epoch, &model, &batch, &student)?;

            let batch_loss: f64 = student
                .iter()
                .zip(&tgts)
                .map(|(&p, &t)| cross_entropy(p, t))
                .sum::<f64>()
                / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss * batch.len() as f64;

            let d_logits: Vec<[f64; 2]> = student
                .iter()
                .zip(&tgts)
                .map(|(p, t)| [p.pos - t.pos, p.neg - t.neg])
                .collect();
            let partial: Vec<ParamGrads> = caches
                .par_chunks(GRAD_CHUNK)
                .zip(d_logits.par_chunks(GRAD_CHUNK))
                .map(|(cs, ds)| {
                    let mut g = ParamGrads::zeros_like(&model);
                    for (c, d) in cs.iter().zip(ds) {
                        model.backward_into(c, *d, &mut g)?;
                    }
                    Ok(g)
                })
                .collect::<Result<_>>()?;
            let mut grads = ParamGrads::zeros_like(&model);
            for g in &partial {
                grads.add(g);
            }
            opt.step(&mut model, &grads, 1.0 / batch.len() as f64);
            if !model.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: f64::NAN,
                });
            }
        }

        let dev_acc = accuracy(&model, dev, SubsetFilter::All)?;
        let dev_acc_but = accuracy(&model, dev, SubsetFilter::But).ok();
        let stats = EpochStats {
            epoch,
            pi: targets.pi(epoch),
            dev_acc,
            dev_acc_but,
            mean_teacher_kl: targets.finish_epoch(),
            train_loss: loss_sum / train_set.len() as f64,
        };
        on_epoch(&stats, &model)?;
        history.push(stats);
        match stopper.update(epoch, dev_acc) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }

    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch: stopper.best_epoch().expect("at least one epoch ran"),
    })
}
