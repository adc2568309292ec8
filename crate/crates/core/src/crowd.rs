//! Crowd judgments: averaging, ambiguity thresholds, Fleiss' kappa and
//! accuracy on the non-neutral subset.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sst::Label;

/// Raters per sentence in the published judgment files.
pub const DEFAULT_RATERS: usize = 9;

/// Thresholds of the published report.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.50, 0.66, 0.75, 0.90];

const CATEGORIES: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrowdLabel {
    Positive,
    Negative,
    Neutral,
}

impl CrowdLabel {
    pub fn polarity(self) -> Option<Label> {
        match self {
            CrowdLabel::Positive => Some(Label::Positive),
            CrowdLabel::Negative => Some(Label::Negative),
            CrowdLabel::Neutral => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub sentence_id: String,
    pub sst2_label: Label,
    /// Each score is 0 (negative), 0.5 (neutral) or 1 (positive).
    pub scores: Vec<f64>,
}

fn category(score: f64) -> Option<usize> {
    CATEGORIES.iter().position(|&c| c == score)
}

impl JudgmentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::Empty(format!(
                "scores of sentence `{}`",
                self.sentence_id
            )));
        }
        if let Some(s) = self.scores.iter().find(|&&s| category(s).is_none()) {
            return Err(Error::Validation(format!(
                "sentence `{}`: score {s} is not one of 0, 0.5, 1",
                self.sentence_id
            )));
        }
        Ok(())
    }
}

/// Reads `sentence_id, sst2_label, score_1..score_n`; every row must carry
/// exactly `raters` scores.
pub fn read_judgments<R: Read>(reader: R, raters: usize) -> Result<Vec<JudgmentRecord>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        // header is line 1
        let line = i + 2;
        let bad = |message: String| Error::Parse { line, message };
        if row.len() != raters + 2 {
            return Err(bad(format!(
                "expected {} scores, found {}",
                raters,
                row.len().saturating_sub(2)
            )));
        }
        let sst2_label = Label::parse(&row[1])
            .ok_or_else(|| bad(format!("unknown SST2 label `{}`", &row[1])))?;
        let scores = row
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("score `{s}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = JudgmentRecord {
            sentence_id: row[0].to_string(),
            sst2_label,
            scores,
        };
        rec.validate().map_err(|e| bad(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn aggregate(record: &JudgmentRecord) -> Result<f64> {
    record.validate()?;
    Ok(record.scores.iter().sum::<f64>() / record.scores.len() as f64)
}

/// `(x, 1]` positive, `[0, 1 - x)` negative, `[1 - x, x]` neutral.
pub fn classify_with_threshold(mean: f64, x: f64) -> Result<CrowdLabel> {
    if !(0.5..1.0).contains(&x) {
        return Err(Error::Validation(format!("threshold {x} outside [0.5, 1)")));
    }
    if !(0.0..=1.0).contains(&mean) {
        return Err(Error::Validation(format!(
            "mean score {mean} outside [0, 1]"
        )));
    }
    Ok(if mean > x {
        CrowdLabel::Positive
    } else if mean < 1.0 - x {
        CrowdLabel::Negative
    } else {
        CrowdLabel::Neutral
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdedLabel {
    pub sentence_id: String,
    pub mean: f64,
    pub label: CrowdLabel,
    /// Non-neutral and disagreeing with the SST2 label.
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub x: f64,
    pub n_neutral: usize,
    pub n_flipped: usize,
    pub labels: Vec<ThresholdedLabel>,
}

pub fn threshold_report(records: &[JudgmentRecord], x: f64) -> Result<ThresholdReport> {
    let labels = records
        .iter()
        .map(|r| {
            let mean = aggregate(r)?;
            let label = classify_with_threshold(mean, x)?;
            Ok(ThresholdedLabel {
                sentence_id: r.sentence_id.clone(),
                mean,
                label,
                flipped: label.polarity().is_some_and(|l| l != r.sst2_label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdReport {
        x,
        n_neutral: labels
            .iter()
            .filter(|l| l.label == CrowdLabel::Neutral)
            .count(),
        n_flipped: labels.iter().filter(|l| l.flipped).count(),
        labels,
    })
}

/// Fleiss' kappa over the three score categories. `None` when every rating
/// falls in one category, where the statistic is undefined.
pub fn fleiss_kappa<'a, I>(records: I) -> Result<Option<f64>>
where
    I: IntoIterator<Item = &'a JudgmentRecord>,
{
    let mut n = None;
    let mut items = 0usize;
    let mut p_sum = 0.0;
    let mut totals = [0usize; 3];
    for r in records {
        r.validate()?;
        let k = r.scores.len();
        match n {
            None => n = Some(k),
            Some(n0) if n0 != k => {
                return Err(Error::Validation(format!(
                    "sentence `{}` has {k} ratings, expected {n0}",
                    r.sentence_id
                )))
            }
            _ => {}
        }
        if k < 2 {
            return Err(Error::Validation(
                "Fleiss' kappa needs at least 2 raters".into(),
            ));
        }
        let mut counts = [0usize; 3];
        for &s in &r.scores {
            counts[category(s).expect("validated")] += 1;
        }
        let sq: usize = counts.iter().map(|c| c * c).sum();
        p_sum += (sq - k) as f64 / (k * (k - 1)) as f64;
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
        items += 1;
    }
    let Some(n) = n else {
        return Err(Error::Empty("judgment set".into()));
    };
    let all = (items * n) as f64;
    let p_bar = p_sum / items as f64;
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / all).powi(2)).sum();
    if p_e >= 1.0 {
        return Ok(None);
    }
    Ok(Some((p_bar - p_e) / (1.0 - p_e)))
}

/// Accuracy on the sentences that are non-neutral at `x`, scored against
/// the thresholded crowd label.
pub fn filtered_accuracy(
    predictions: &HashMap<String, Label>,
    records: &[JudgmentRecord],
    x: f64,
) -> Result<f64> {
    let report = threshold_report(records, x)?;
    let mut n = 0usize;
    let mut correct = 0usize;
    for l in &report.labels {
        let Some(gold) = l.label.polarity() else {
            continue;
        };
        let pred = predictions
            .get(&l.sentence_id)
            .ok_or_else(|| Error::missing("prediction", &l.sentence_id))?;
        n += 1;
        correct += usize::from(*pred == gold);
    }
    if n == 0 {
        return Err(Error::Empty(format!("non-neutral subset at x = {x}")));
    }
    Ok(correct as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdColumn {
    pub x: f64,
    pub n_neutral: usize,
    pub n_flipped: usize,
    /// Kappa over the non-neutral sentences at this threshold.
    pub kappa: Option<f64>,
    /// Per-model accuracy, in the order of [`CrowdTable::models`]; `None`
    /// when every sentence is neutral at this threshold.
    pub accuracy: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdTable {
    pub models: Vec<String>,
    pub columns: Vec<ThresholdColumn>,
}

pub fn crowd_table(
    records: &[JudgmentRecord],
    thresholds: &[f64],
    models: &[(String, HashMap<String, Label>)],
) -> Result<CrowdTable> {
    let columns = thresholds
        .iter()
        .map(|&x| {
            let rep = threshold_report(records, x)?;
            let kept: Vec<&JudgmentRecord> = records
                .iter()
                .zip(&rep.labels)
                .filter(|(_, l)| l.label != CrowdLabel::Neutral)
                .map(|(r, _)| r)
                .collect();
            let kappa = if kept.is_empty() {
                None
            } else {
                fleiss_kappa(kept)?
            };
            let accuracy = models
                .iter()
                .map(|(_, preds)| match filtered_accuracy(preds, records, x) {
                    Ok(a) => Ok(Some(a)),
                    Err(Error::Empty(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?;
            Ok(ThresholdColumn {
                x,
                n_neutral: rep.n_neutral,
                n_flipped: rep.n_flipped,
                kappa,
                accuracy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CrowdTable {
        models: models.iter().map(|(m, _)| m.clone()).collect(),
        columns,
    })
}

impl CrowdTable {
    /// One row per quantity, one column per threshold.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["threshold".to_string()];
        header.extend(self.columns.iter().map(|c| format!("{:.2}", c.x)));
        wr.write_record(&header)?;
        let row = |name: &str, f: &dyn Fn(&ThresholdColumn) -> String| {
            let mut r = vec![name.to_string()];
            r.extend(self.columns.iter().map(f));
            r
        };
        wr.write_record(row("Neutral Sentiment", &|c| c.n_neutral.to_string()))?;
        wr.write_record(row("Flipped Sentiment", &|c| c.n_flipped.to_string()))?;
        wr.write_record(row("Fleiss' Kappa", &|c| {
            c.kappa
                .map_or_else(|| "undefined".into(), |k| format!("{k:.2}"))
        }))?;
        for (i, m) in self.models.iter().enumerate() {
            wr.write_record(row(m, &|c| {
                c.accuracy[i].map_or_else(|| "undefined".into(), |a| format!("{:.2}", 100.0 * a))
            }))?;
        }
        wr.flush().map_err(|e| Error::io("<crowd table>", e))?;
        Ok(())
    }

    /// Long format `threshold, model, accuracy` for threshold curves.
    pub fn write_accuracy_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["threshold", "model", "accuracy"])?;
        for c in &self.columns {
            for (m, a) in self.models.iter().zip(&c.accuracy) {
                let a = a.map(|a| a.to_string()).unwrap_or_default();
                wr.write_record([format!("{:.2}", c.x), m.clone(), a])?;
            }
        }
        wr.flush().map_err(|e| Error::io("<crowd accuracy>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: Label, scores: &[f64]) -> JudgmentRecord {
        JudgmentRecord {
            sentence_id: id.into(),
            sst2_label: label,
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn mean_of_nine() {
        let r = rec(
            "mw",
            Label::Positive,
            &[1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0],
        );
        let m = aggregate(&r).unwrap();
        assert!((m - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(
            classify_with_threshold(m, 0.6).unwrap(),
            CrowdLabel::Neutral
        );
        assert_eq!(
            aggregate(&rec("a", Label::Positive, &[0.0, 1.0])).unwrap(),
            0.5
        );
        assert!(aggregate(&rec("e", Label::Positive, &[])).is_err());
        assert!(aggregate(&rec("b", Label::Positive, &[0.3])).is_err());
    }

    #[test]
    fn threshold_bands() {
        assert_eq!(
            classify_with_threshold(1.0, 0.99).unwrap(),
            CrowdLabel::Positive
        );
        assert_eq!(
            classify_with_threshold(0.75, 0.75).unwrap(),
            CrowdLabel::Neutral
        );
        assert_eq!(
            classify_with_threshold(0.25, 0.75).unwrap(),
            CrowdLabel::Neutral
        );
        assert_eq!(
            classify_with_threshold(0.2, 0.75).unwrap(),
            CrowdLabel::Negative
        );
        assert_eq!(
            classify_with_threshold(0.5, 0.5).unwrap(),
            CrowdLabel::Neutral
        );
        assert!(classify_with_threshold(0.5, 1.0).is_err());
        assert!(classify_with_threshold(0.5, 0.4).is_err());
    }

    #[test]
    fn flipped_and_neutral_counts() {
        let de_niro = rec(
            "dn",
            Label::Positive,
            &[0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5],
        );
        assert!((aggregate(&de_niro).unwrap() - 0.2778).abs() < 1e-4);
        let rep = threshold_report(&[de_niro], 0.66).unwrap();
        assert_eq!((rep.n_neutral, rep.n_flipped), (0, 1));

        let recs = vec![
            rec("0", Label::Positive, &[1.0; 9]),
            rec("1", Label::Negative, &[0.0; 9]),
            rec("2", Label::Positive, &[0.5; 9]),
            rec(
                "3",
                Label::Negative,
                &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5],
            ),
            rec(
                "4",
                Label::Positive,
                &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 1.0],
            ),
        ];
        // means: 1, 0, 0.5, 0.889, 0.278
        let rep = threshold_report(&recs, 0.66).unwrap();
        assert_eq!((rep.n_neutral, rep.n_flipped), (1, 2));
        let rep = threshold_report(&recs, 0.9).unwrap();
        assert_eq!((rep.n_neutral, rep.n_flipped), (3, 0));
    }

    #[test]
    fn kappa_hand_values() {
        let recs = [
            rec("1", Label::Positive, &[1.0, 1.0]),
            rec("2", Label::Positive, &[0.0, 1.0]),
        ];
        let k = fleiss_kappa(&recs).unwrap().unwrap();
        assert!((k + 1.0 / 3.0).abs() < 1e-15, "{k}");

        let unanimous = [
            rec("1", Label::Positive, &[1.0; 3]),
            rec("2", Label::Negative, &[0.0; 3]),
            rec("3", Label::Negative, &[0.5; 3]),
        ];
        assert_eq!(fleiss_kappa(&unanimous).unwrap(), Some(1.0));
        assert_eq!(fleiss_kappa(&unanimous[..1]).unwrap(), None);

        let uneven = [
            rec("1", Label::Positive, &[1.0; 3]),
            rec("2", Label::Positive, &[1.0; 2]),
        ];
        assert!(fleiss_kappa(&uneven).is_err());
    }

    #[test]
    fn accuracy_uses_crowd_labels() {
        let recs = vec![
            rec("0", Label::Positive, &[0.0; 9]),
            rec("1", Label::Positive, &[0.5; 9]),
            rec("2", Label::Negative, &[0.0; 9]),
        ];
        let preds: HashMap<String, Label> = [
            ("0".to_string(), Label::Negative),
            ("1".to_string(), Label::Positive),
            ("2".to_string(), Label::Positive),
        ]
        .into();
        assert_eq!(filtered_accuracy(&preds, &recs, 0.66).unwrap(), 0.5);
        assert!(filtered_accuracy(&preds, &recs[1..2], 0.66).is_err());
    }

    #[test]
    fn csv_round_and_table() {
        let text = "sentence_id,sst2_label,score_1,score_2,score_3,score_4,score_5,score_6,score_7,score_8,score_9\n\
                    a,+,1,1,0.5,0.5,0.5,0.5,0.5,0.5,0\n\
                    b,-,0,0,0,0,0,0,0,0,0.5\n";
        let recs = read_judgments(text.as_bytes(), DEFAULT_RATERS).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(read_judgments(text.as_bytes(), 8).is_err());

        let preds: HashMap<String, Label> = [
            ("a".to_string(), Label::Positive),
            ("b".to_string(), Label::Negative),
        ]
        .into();
        let table = crowd_table(&recs, &[0.5, 0.66], &[("base".into(), preds)]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let out = String::from_utf8(buf).unwrap();
        assert!(
            out.starts_with("threshold,0.50,0.66\nNeutral Sentiment,0,1\n"),
            "{out}"
        );
        assert!(out.contains("base,100.00,100.00"));
    }
}
