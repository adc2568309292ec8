//! Iterative rule-knowledge distillation. The student is fit against
//! `pi * onehot(y) + (1 - pi) * q`, where `q` is the projection of the
//! student's own current prediction, recomputed for every minibatch.

use serde::{Deserialize, Serialize};

use crate::cnn::{
    train_with, BatchTargets, Classifier, EpochStats, ExamplePredictor, ModelParams, ProbDist,
    TrainConfig, TrainOutcome,
};
use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::rules::{kl_divergence, project, rule_score, ProjectionConfig, PROB_CLAMP};
use crate::sst::Label;

/// Per-epoch decay of the ground-truth weight in distillation mode.
pub const PI_DECAY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistillMode {
    NoDistill,
    Distill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub mode: DistillMode,
    pub final_project: bool,
    pub projection: ProjectionConfig,
    pub train: TrainConfig,
}

impl DistillConfig {
    pub fn baseline(train: TrainConfig) -> Self {
        DistillConfig {
            mode: DistillMode::NoDistill,
            final_project: false,
            projection: ProjectionConfig::default(),
            train,
        }
    }

    /// Canonical `distill,project`-style label of the grid cell.
    pub fn variant_name(&self) -> String {
        format!(
            "{},{}",
            match self.mode {
                DistillMode::NoDistill => "no-distill",
                DistillMode::Distill => "distill",
            },
            if self.final_project {
                "project"
            } else {
                "no-project"
            }
        )
    }
}

/// Ground-truth weight at 0-based epoch `t`.
pub fn pi_schedule(t: usize, mode: DistillMode) -> f64 {
    match mode {
        DistillMode::NoDistill => 1.0,
        DistillMode::Distill => PI_DECAY.powi(t.min(i32::MAX as usize) as i32),
    }
}

/// `pi * H(p, onehot(y)) + (1 - pi) * H(p, q)` with `H(a, b) = -Σ b ln a`.
pub fn distill_loss(p_pred: ProbDist, y_true: Label, q_teacher: ProbDist, pi: f64) -> f64 {
    let ce = |target: ProbDist| {
        -(target.pos * p_pred.pos.max(PROB_CLAMP).ln()
            + target.neg * p_pred.neg.max(PROB_CLAMP).ln())
    };
    pi * ce(ProbDist::one_hot(y_true)) + (1.0 - pi) * ce(q_teacher)
}

/// Projected teacher for one example given the student's prediction.
pub fn teacher<C: Classifier + ?Sized>(
    model: &C,
    example: &Example,
    student: ProbDist,
    cfg: ProjectionConfig,
) -> Result<ProbDist> {
    let r = rule_score(model, example)?;
    if r.is_vacuous() {
        return Ok(student);
    }
    project(student.clamped(PROB_CLAMP), r, cfg)
}

type TeacherObserver<'a> = dyn FnMut(&[&Example], &[ProbDist], &[ProbDist]) + 'a;

struct TeacherTargets<'a> {
    mode: DistillMode,
    projection: ProjectionConfig,
    kl_sum: f64,
    kl_n: usize,
    observer: Option<&'a mut TeacherObserver<'a>>,
}

impl BatchTargets for TeacherTargets<'_> {
    fn targets(
        &mut self,
        epoch: usize,
        model: &ModelParams,
        batch: &[&Example],
        student: &[ProbDist],
    ) -> Result<Vec<ProbDist>> {
        let pi = self.pi(epoch);
        if self.mode == DistillMode::NoDistill {
            return Ok(batch.iter().map(|e| ProbDist::one_hot(e.label)).collect());
        }
        let teachers: Vec<ProbDist> = batch
            .iter()
            .zip(student)
            .map(|(e, &p)| teacher(model, e, p, self.projection))
            .collect::<Result<_>>()?;
        for ((e, &p), &q) in batch.iter().zip(student).zip(&teachers) {
            if e.is_a_but_b() {
                self.kl_sum += kl_divergence(q, p.clamped(PROB_CLAMP));
                self.kl_n += 1;
            }
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(batch, student, &teachers);
        }
        Ok(batch
            .iter()
            .zip(&teachers)
            .map(|(e, q)| {
                let y = ProbDist::one_hot(e.label);
                ProbDist {
                    pos: pi * y.pos + (1.0 - pi) * q.pos,
                    neg: pi * y.neg + (1.0 - pi) * q.neg,
                }
            })
            .collect())
    }

    fn pi(&self, epoch: usize) -> f64 {
        pi_schedule(epoch.saturating_sub(1), self.mode)
    }

    fn finish_epoch(&mut self) -> Option<f64> {
        let out = match self.mode {
            DistillMode::NoDistill => None,
            DistillMode::Distill if self.kl_n == 0 => Some(0.0),
            DistillMode::Distill => Some(self.kl_sum / self.kl_n as f64),
        };
        self.kl_sum = 0.0;
        self.kl_n = 0;
        out
    }
}

pub fn train_distilled(
    model: ModelParams,
    train_set: &[Example],
    dev: &[Example],
    cfg: &DistillConfig,
    on_epoch: &mut dyn FnMut(&EpochStats, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    train_distilled_observed(model, train_set, dev, cfg, on_epoch, None)
}

/// As [`train_distilled`]; `observer` sees every batch's student
/// predictions and teacher distributions.
pub fn train_distilled_observed<'a>(
    model: ModelParams,
    train_set: &[Example],
    dev: &[Example],
    cfg: &DistillConfig,
    on_epoch: &mut dyn FnMut(&EpochStats, &ModelParams) -> Result<()>,
    observer: Option<&'a mut TeacherObserver<'a>>,
) -> Result<TrainOutcome> {
    ProjectionConfig::new(cfg.projection.c)?;
    let mut targets = TeacherTargets {
        mode: cfg.mode,
        projection: cfg.projection,
        kl_sum: 0.0,
        kl_n: 0,
        observer,
    };
    train_with(model, train_set, dev, &cfg.train, &mut targets, on_epoch)
}

/// A trained classifier, optionally followed by one final projection.
#[derive(Debug, Clone)]
pub struct InferenceModel<C = ModelParams> {
    pub model: C,
    pub final_project: bool,
    pub projection: ProjectionConfig,
}

pub fn finalize<C: Classifier>(model: C, cfg: &DistillConfig) -> InferenceModel<C> {
    InferenceModel {
        model,
        final_project: cfg.final_project,
        projection: cfg.projection,
    }
}

impl<C: Classifier> ExamplePredictor for InferenceModel<C> {
    fn predict_example(&self, example: &Example) -> Result<ProbDist> {
        let p = self.model.predict(&example.input)?;
        if !self.final_project {
            return Ok(p);
        }
        teacher(&self.model, example, p, self.projection)
    }
}

impl std::str::FromStr for DistillMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "distill" => Ok(DistillMode::Distill),
            "no-distill" | "no_distill" => Ok(DistillMode::NoDistill),
            other => Err(Error::Config(format!(
                "unknown distillation mode `{other}`"
            ))),
        }
    }
}

/// Parses `distill,project`-style variant labels into `(mode, final_project)`.
pub fn parse_variant(s: &str) -> Result<(DistillMode, bool)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [mode, proj] = parts.as_slice() else {
        return Err(Error::Config(format!(
            "variant `{s}` must look like `no-distill,no-project`"
        )));
    };
    let project = match *proj {
        "project" => true,
        "no-project" | "no_project" => false,
        other => return Err(Error::Config(format!("unknown projection flag `{other}`"))),
    };
    Ok((mode.parse()?, project))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Encoded;
    use crate::sst::DiscourseTag;

    #[test]
    fn pi_values() {
        assert_eq!(pi_schedule(0, DistillMode::Distill), 1.0);
        assert_eq!(pi_schedule(1, DistillMode::Distill), 0.95);
        assert!((pi_schedule(2, DistillMode::Distill) - 0.9025).abs() < 1e-15);
        for t in 0..50 {
            assert_eq!(pi_schedule(t, DistillMode::NoDistill), 1.0);
            assert!(
                pi_schedule(t + 1, DistillMode::Distill) <= pi_schedule(t, DistillMode::Distill)
            );
        }
    }

    #[test]
    fn loss_reduces_to_cross_entropy() {
        let p = ProbDist::from_pos(0.7);
        let ce = -(0.7f64).ln();
        assert_eq!(
            distill_loss(p, Label::Positive, ProbDist::from_pos(0.2), 1.0),
            ce
        );
        assert_eq!(
            distill_loss(p, Label::Positive, ProbDist::one_hot(Label::Positive), 0.0),
            ce
        );
    }

    #[test]
    fn loss_hand_value() {
        let v = distill_loss(
            ProbDist::from_pos(0.7),
            Label::Positive,
            ProbDist::from_pos(0.9),
            0.5,
        );
        let expect = 0.5 * -(0.7f64.ln()) + 0.5 * (-0.9 * 0.7f64.ln() - 0.1 * 0.3f64.ln());
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.3990).abs() < 5e-5, "{v}");
    }

    #[test]
    fn variant_labels() {
        assert_eq!(
            parse_variant("distill,project").unwrap(),
            (DistillMode::Distill, true)
        );
        assert_eq!(
            parse_variant("no-distill,no-project").unwrap(),
            (DistillMode::NoDistill, false)
        );
        assert!(parse_variant("distill").is_err());
        assert!(parse_variant("distill,maybe").is_err());
        let cfg = DistillConfig {
            mode: DistillMode::Distill,
            final_project: true,
            projection: ProjectionConfig::default(),
            train: TrainConfig::default(),
        };
        assert_eq!(cfg.variant_name(), "distill,project");
    }

    struct Fixed;
    impl Classifier for Fixed {
        fn predict(&self, input: &Encoded) -> Result<ProbDist> {
            Ok(ProbDist::from_pos(if input.len() > 1 { 0.6 } else { 0.9 }))
        }
    }

    fn ex(a_but_b: bool) -> Example {
        Example {
            id: "x".into(),
            input: Encoded::Vectors {
                dim: 1,
                data: vec![1.0, 2.0],
            },
            label: Label::Negative,
            discourse: DiscourseTag {
                a_but_b,
                negation: false,
            },
            but_input: a_but_b.then(|| Encoded::Vectors {
                dim: 1,
                data: vec![2.0],
            }),
        }
    }

    #[test]
    fn finalize_behaviour() {
        let base = DistillConfig::baseline(TrainConfig::default());
        let proj = DistillConfig {
            final_project: true,
            ..base.clone()
        };
        let plain = finalize(Fixed, &base);
        let projected = finalize(Fixed, &proj);
        assert_eq!(
            plain.predict_example(&ex(false)).unwrap(),
            projected.predict_example(&ex(false)).unwrap()
        );
        let q = projected.predict_example(&ex(true)).unwrap();
        let expect = project(
            ProbDist::from_pos(0.6),
            ProbDist::from_pos(0.9).into(),
            ProjectionConfig::default(),
        )
        .unwrap();
        assert!((q.pos - expect.pos).abs() < 1e-12);
        assert!((q.pos - 0.9945).abs() < 5e-5);

        let zero_c = DistillConfig {
            projection: ProjectionConfig::new(0.0).unwrap(),
            ..proj
        };
        assert_eq!(
            finalize(Fixed, &zero_c).predict_example(&ex(true)).unwrap(),
            plain.predict_example(&ex(true)).unwrap()
        );
    }
}
