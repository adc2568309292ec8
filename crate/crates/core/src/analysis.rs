//! Embedding diagnostics: intra-sentence cosine similarity and per-variant
//! KL between projected and raw predictions.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnn::Classifier;
use crate::dataset::{instance_id, Example};
use crate::embeddings::{ContextualVectors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rules::{project_dataset, ProjectionConfig};
use crate::sst::LabeledInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub tokens: Vec<String>,
    /// Row-major, symmetric. The diagonal holds the smallest off-diagonal
    /// value so it does not dominate a heat map.
    pub values: Vec<Vec<f64>>,
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn intra_sentence_similarity(
    tokens: &[String],
    vectors: &[&[f64]],
) -> Result<SimilarityMatrix> {
    if tokens.len() != vectors.len() {
        return Err(Error::Validation(format!(
            "{} tokens but {} vectors",
            tokens.len(),
            vectors.len()
        )));
    }
    let n = tokens.len();
    if n < 2 {
        return Err(Error::Validation(
            "similarity needs at least 2 tokens".into(),
        ));
    }
    let norms = vectors
        .iter()
        .zip(tokens)
        .map(|(v, t)| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                Err(Error::Validation(format!(
                    "token `{t}` has a zero or non-finite vector"
                )))
            } else {
                Ok(norm)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![vec![0.0; n]; n];
    let mut min = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine(vectors[i], vectors[j], norms[i], norms[j]);
            values[i][j] = c;
            values[j][i] = c;
            min = min.min(c);
        }
    }
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = min;
    }
    Ok(SimilarityMatrix {
        tokens: tokens.to_vec(),
        values,
    })
}

impl SimilarityMatrix {
    /// Token header row and token header column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.tokens.iter().cloned());
        wr.write_record(&header)?;
        for (t, row) in self.tokens.iter().zip(&self.values) {
            let mut rec = vec![t.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<similarity>", e))?;
        Ok(())
    }
}

/// Where token vectors come from.
pub enum VectorSource<'a> {
    /// One vector per word type, e.g. a trained model's embedding rows.
    Static(&'a EmbeddingTable),
    /// Per-position vectors keyed by instance id.
    Contextual(&'a ContextualVectors),
}

impl VectorSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            VectorSource::Static(_) => "static",
            VectorSource::Contextual(_) => "contextual",
        }
    }

    fn sentence_vectors<'s>(&'s self, id: &str, tokens: &[String]) -> Result<Vec<&'s [f64]>> {
        match self {
            VectorSource::Static(table) => tokens
                .iter()
                .map(|t| {
                    table
                        .get(t)
                        .ok_or_else(|| Error::missing("word vector", t.clone()))
                })
                .collect(),
            VectorSource::Contextual(cv) => {
                let sent = cv
                    .get(id)
                    .ok_or_else(|| Error::missing("contextual sentence", id))?;
                if sent.tokens != tokens {
                    return Err(Error::Alignment {
                        id: id.to_string(),
                        tokens: tokens.len(),
                        vectors: sent.vectors.len(),
                    });
                }
                Ok(sent.vectors.iter().map(Vec::as_slice).collect())
            }
        }
    }
}

/// One matrix per A-but-B instance, tagged with its positional id.
pub fn sentence_similarities(
    instances: &[LabeledInstance],
    source: &VectorSource<'_>,
) -> Result<Vec<(String, SimilarityMatrix)>> {
    instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| inst.discourse.a_but_b)
        .map(|(i, inst)| {
            let id = instance_id(i);
            let vectors = source.sentence_vectors(&id, &inst.tokens)?;
            Ok((id, intra_sentence_similarity(&inst.tokens, &vectors)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sentence_id: String,
    pub source: String,
    pub path: PathBuf,
}

/// Writes `<label>/<id>.csv` under `dir` for every A-but-B instance and
/// returns the manifest entries, paths relative to `dir`.
pub fn similarity_report(
    instances: &[LabeledInstance],
    source: &VectorSource<'_>,
    label: &str,
    dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let matrices = sentence_similarities(instances, source)?;
    let sub = Path::new(label);
    std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    matrices
        .into_iter()
        .map(|(id, m)| {
            let rel = sub.join(format!("{id}.csv"));
            let path = dir.join(&rel);
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            m.write_csv(std::io::BufWriter::new(f))?;
            Ok(ManifestEntry {
                sentence_id: id,
                source: label.to_string(),
                path: rel,
            })
        })
        .collect()
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let path = dir.join("manifest.json");
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), entries)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub variant: String,
    pub n_models: usize,
    pub n_a_but_b: usize,
    /// Mean `KL(q || p)` over A-but-B instances and models.
    pub mean_kl: f64,
}

/// Per-variant mean KL between the projected and raw predictions. Each
/// variant may bring several models (e.g. one per seed); `encode` turns the
/// evaluation sentences into each model's inputs. The KL is averaged over
/// the A-but-B instances and then over models.
pub fn kl_report<C, F>(
    variants: &[(String, Vec<C>)],
    cfg: ProjectionConfig,
    encode: F,
) -> Result<Vec<KlRow>>
where
    C: Classifier,
    F: Fn(&C) -> Result<Vec<Example>>,
{
    variants
        .iter()
        .map(|(name, models)| {
            if models.is_empty() {
                return Err(Error::Empty(format!("models of variant `{name}`")));
            }
            let mut sum = 0.0;
            let mut n_a_but_b = 0;
            for m in models {
                let examples = encode(m)?;
                if examples.is_empty() {
                    return Err(Error::Empty("instance set".into()));
                }
                let rep = project_dataset(m, &examples, cfg)?;
                sum += rep.mean_kl;
                n_a_but_b = rep.n_a_but_b;
            }
            Ok(KlRow {
                variant: name.clone(),
                n_models: models.len(),
                n_a_but_b,
                mean_kl: sum / models.len() as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::ProbDist;
    use crate::dataset::Encoded;
    use crate::sst::{DiscourseTag, Label, NegationLexicon};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parallel_and_orthogonal() {
        let t = toks("a b");
        let m = intra_sentence_similarity(&t, &[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!((m.values[0][1] - 1.0).abs() < 1e-15);
        let m = intra_sentence_similarity(&t, &[&[1.0, 0.0], &[0.0, 3.0]]).unwrap();
        assert_eq!(m.values[0][1], 0.0);
        assert_eq!(m.values[0][0], 0.0);
    }

    #[test]
    fn diagonal_is_off_diagonal_minimum() {
        let t = toks("a b c");
        let m = intra_sentence_similarity(&t, &[&[1.0, 0.0], &[1.0, 1.0], &[-1.0, 0.2]]).unwrap();
        let min = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.values[i][j])
            .fold(f64::INFINITY, f64::min);
        for i in 0..3 {
            assert_eq!(m.values[i][i], min);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn zero_vector_names_token() {
        let err = intra_sentence_similarity(&toks("ok nil"), &[&[1.0], &[0.0]]).unwrap_err();
        assert!(err.to_string().contains("`nil`"), "{err}");
        assert!(intra_sentence_similarity(&toks("one"), &[&[1.0]]).is_err());
    }

    #[test]
    fn report_skips_plain_sentences_and_writes_files() {
        let lex = NegationLexicon::default();
        let insts = vec![
            LabeledInstance::new(toks("flat but fun"), Label::Positive, &lex),
            LabeledInstance::new(toks("plain fun"), Label::Positive, &lex),
        ];
        let mut table = EmbeddingTable::new(2, 0.25).unwrap();
        for (w, v) in [
            ("flat", [1.0, 0.0]),
            ("but", [0.5, 0.5]),
            ("fun", [0.0, 1.0]),
            ("plain", [1.0, 1.0]),
        ] {
            table.insert(w, &v).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let entries =
            similarity_report(&insts, &VectorSource::Static(&table), "static", dir.path()).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].sentence_id, "0");
        write_manifest(dir.path(), &entries).unwrap();
        let csv = std::fs::read_to_string(dir.path().join(&entries[0].path)).unwrap();
        assert!(csv.starts_with(",flat,but,fun\nflat,"), "{csv}");

        let empty = ContextualVectors {
            dim: 2,
            ..Default::default()
        };
        assert!(matches!(
            sentence_similarities(&insts, &VectorSource::Contextual(&empty)),
            Err(Error::Missing { .. })
        ));
    }

    // B clauses score 0.9 positive; whole sentences score `self.0`
    struct Agree(f64);
    impl Classifier for Agree {
        fn predict(&self, input: &Encoded) -> Result<ProbDist> {
            Ok(ProbDist::from_pos(if input.len() > 1 {
                self.0
            } else {
                0.9
            }))
        }
    }

    fn example(a_but_b: bool) -> Example {
        Example {
            id: "x".into(),
            input: Encoded::Vectors {
                dim: 1,
                data: vec![1.0, 2.0],
            },
            label: Label::Positive,
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
    fn kl_orders_by_rule_agreement() {
        let ex = vec![example(true), example(false), example(true)];
        let rows = kl_report(
            &[
                ("low".into(), vec![Agree(0.3)]),
                ("high".into(), vec![Agree(0.8), Agree(0.8)]),
            ],
            ProjectionConfig::default(),
            |_| Ok(ex.clone()),
        )
        .unwrap();
        assert_eq!(rows[0].n_a_but_b, 2);
        assert_eq!(rows[1].n_models, 2);
        assert!(rows[1].mean_kl < rows[0].mean_kl);
        let none: Vec<(String, Vec<Agree>)> = vec![("empty".into(), vec![])];
        assert!(kl_report(&none, ProjectionConfig::default(), |_| Ok(ex.clone())).is_err());
        let plain = vec![example(false)];
        assert!(kl_report(
            &[("x".to_string(), vec![Agree(0.3)])],
            ProjectionConfig::default(),
            |_| Ok(plain.clone())
        )
        .is_err());
    }
}
