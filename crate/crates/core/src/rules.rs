//! The A-but-B rule: rule scores from the B clause, projection of a model
//! distribution into the rule-regularized space, and KL diagnostics.
//!
//! Projection solves, per sentence,
//! `min_q KL(q || p) + C * max(0, 1 - E_q[r])`. Since `r` lies in `[0, 1]`
//! the hinge is always active and the optimum is
//! `q(y) ∝ p(y) * exp(-C * (1 - r(y)))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cnn::{Classifier, ProbDist};
use crate::dataset::Example;
use crate::error::{Error, Result};

/// Clamp applied to model outputs before projection so KL stays finite.
pub const PROB_CLAMP: f64 = 1e-12;

/// How well labeling a sentence `+` / `-` satisfies the rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleScore {
    pub pos: f64,
    pub neg: f64,
}

impl RuleScore {
    /// Score of a sentence the rule does not apply to.
    pub const VACUOUS: RuleScore = RuleScore { pos: 1.0, neg: 1.0 };

    pub fn new(pos: f64, neg: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pos) || !(0.0..=1.0).contains(&neg) {
            return Err(Error::Validation(format!(
                "rule score ({pos}, {neg}) outside [0, 1]"
            )));
        }
        Ok(RuleScore { pos, neg })
    }

    pub fn is_vacuous(&self) -> bool {
        self.pos == self.neg
    }
}

impl From<ProbDist> for RuleScore {
    fn from(p: ProbDist) -> Self {
        RuleScore {
            pos: p.pos,
            neg: p.neg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub c: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { c: 6.0 }
    }
}

impl ProjectionConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Validation(format!(
                "C must be finite and >= 0, got {c}"
            )));
        }
        Ok(ProjectionConfig { c })
    }
}

/// `p(y | B)` for A-but-B sentences, `(1, 1)` otherwise.
pub fn rule_score<C: Classifier + ?Sized>(model: &C, example: &Example) -> Result<RuleScore> {
    match &example.but_input {
        None => Ok(RuleScore::VACUOUS),
        Some(b) => Ok(model.predict(b)?.into()),
    }
}

/// Closed-form projection of `p` under rule score `r`.
pub fn project(p: ProbDist, r: RuleScore, cfg: ProjectionConfig) -> Result<ProbDist> {
    ProbDist::new(p.pos, p.neg)?;
    RuleScore::new(r.pos, r.neg)?;
    ProjectionConfig::new(cfg.c)?;
    // Equal penalties cancel in the normalization.
    if cfg.c == 0.0 || r.is_vacuous() {
        return Ok(p);
    }
    let log_pos = p.pos.ln() - cfg.c * (1.0 - r.pos);
    let log_neg = p.neg.ln() - cfg.c * (1.0 - r.neg);
    let m = log_pos.max(log_neg);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return Err(Error::Numeric(format!(
            "projection of ({}, {}) has no mass left",
            p.pos, p.neg
        )));
    }
    let a = (log_pos - m).exp();
    let b = (log_neg - m).exp();
    Ok(ProbDist {
        pos: a / (a + b),
        neg: b / (a + b),
    })
}

/// `KL(q || p)` in nats with `0 ln 0 = 0`; infinite when `q` puts mass where
/// `p` has none.
pub fn kl_divergence(q: ProbDist, p: ProbDist) -> f64 {
    let term = |qy: f64, py: f64| {
        if qy == 0.0 {
            0.0
        } else if py == 0.0 {
            f64::INFINITY
        } else {
            qy * (qy / py).ln()
        }
    };
    (term(q.pos, p.pos) + term(q.neg, p.neg)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub sentence_id: String,
    pub a_but_b: bool,
    pub p: ProbDist,
    pub r: RuleScore,
    pub q: ProbDist,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub c: f64,
    pub rows: Vec<ProjectionRow>,
    pub n_a_but_b: usize,
    /// Mean `KL(q || p)` over A-but-B instances only.
    pub mean_kl: f64,
}

pub fn project_example<C: Classifier + ?Sized>(
    model: &C,
    example: &Example,
    cfg: ProjectionConfig,
) -> Result<ProjectionRow> {
    let p = model.predict(&example.input)?.clamped(PROB_CLAMP);
    let r = rule_score(model, example)?;
    let q = project(p, r, cfg)?;
    Ok(ProjectionRow {
        sentence_id: example.id.clone(),
        a_but_b: example.is_a_but_b(),
        p,
        r,
        q,
        kl: kl_divergence(q, p),
    })
}

pub fn project_dataset<C: Classifier + ?Sized>(
    model: &C,
    examples: &[Example],
    cfg: ProjectionConfig,
) -> Result<ProjectionReport> {
    use rayon::prelude::*;
    let rows: Vec<ProjectionRow> = examples
        .par_iter()
        .map(|e| project_example(model, e, cfg))
        .collect::<Result<_>>()?;
    let but: Vec<f64> = rows.iter().filter(|r| r.a_but_b).map(|r| r.kl).collect();
    if but.is_empty() {
        return Err(Error::Empty("A-but-B subset".into()));
    }
    Ok(ProjectionReport {
        c: cfg.c,
        n_a_but_b: but.len(),
        mean_kl: but.iter().sum::<f64>() / but.len() as f64,
        rows,
    })
}

impl ProjectionReport {
    /// Columns `sentence_id, p_pos, q_pos, r_pos, kl`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sentence_id", "p_pos", "q_pos", "r_pos", "kl"])?;
        for r in &self.rows {
            wr.write_record([
                r.sentence_id.clone(),
                r.p.pos.to_string(),
                r.q.pos.to_string(),
                r.r.pos.to_string(),
                r.kl.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<projection>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "c": self.c,
            "n_instances": self.rows.len(),
            "n_a_but_b": self.n_a_but_b,
            "mean_kl": self.mean_kl,
        })
    }
}
