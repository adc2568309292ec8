//! Static word vectors (word2vec text format) and precomputed per-token
//! contextual vectors (JSON lines).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Out-of-vocabulary vectors are drawn from `Uniform(-a, a)^d`.
pub const DEFAULT_OOV_BOUND: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    oov_bound: f64,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov_bound: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            oov_bound,
            trainable: true,
        })
    }

    /// A table with every word drawn at random, in iteration order.
    pub fn random<'a, I, R>(words: I, dim: usize, bound: f64, rng: &mut R) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
        R: Rng + ?Sized,
    {
        let mut table = EmbeddingTable::new(dim, bound)?;
        for w in words {
            table.lookup(w, rng);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn oov_bound(&self) -> f64 {
        self.oov_bound
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    /// Row-major `len × dim` storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Inserts `word` with `vector`; an existing word keeps its vector.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<usize> {
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "vector for `{word}` has length {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(i) = self.index_of(word) {
            return Ok(i);
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        self.data.extend_from_slice(vector);
        Ok(i)
    }

    /// Index of `word`, drawing and caching an OOV vector if needed.
    pub fn lookup_index<R: Rng + ?Sized>(&mut self, word: &str, rng: &mut R) -> usize {
        if let Some(i) = self.index_of(word) {
            return i;
        }
        let a = self.oov_bound;
        let v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-a..=a)).collect();
        self.insert(word, &v)
            .expect("dimension matches by construction")
    }

    pub fn lookup<R: Rng + ?Sized>(&mut self, word: &str, rng: &mut R) -> &[f64] {
        let i = self.lookup_index(word, rng);
        self.row(i)
    }

    /// Pre-populates OOV vectors for every token in first-seen order so the
    /// table can afterwards be shared read-only.
    pub fn extend_oov<'a, I, R>(&mut self, tokens: I, rng: &mut R)
    where
        I: IntoIterator<Item = &'a str>,
        R: Rng + ?Sized,
    {
        for t in tokens {
            self.lookup_index(t, rng);
        }
    }

    /// Keeps only the listed words (in the given order); listed words absent
    /// from the table are skipped.
    pub fn restrict<'a, I: IntoIterator<Item = &'a str>>(&self, words: I) -> EmbeddingTable {
        let mut out = EmbeddingTable {
            dim: self.dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            oov_bound: self.oov_bound,
            trainable: self.trainable,
        };
        for w in words {
            if let Some(v) = self.get(w) {
                let v = v.to_vec();
                out.insert(w, &v).expect("same dimension");
            }
        }
        out
    }
}

fn format_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads word2vec text format. An optional first line `count dim` is
/// accepted. With `vocab` set, only listed words are kept.
pub fn read_static_vectors<R: BufRead>(
    reader: R,
    vocab: Option<&HashSet<String>>,
    source: &str,
) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut declared_dim: Option<usize> = None;
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| format_err(source, lineno, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                declared_dim = Some(d);
                continue;
            }
        }
        let word = fields[0];
        let values = &fields[1..];
        let d = *dim.get_or_insert(values.len());
        if d == 0 {
            return Err(format_err(source, lineno, "no vector components"));
        }
        if values.len() != d {
            return Err(format_err(
                source,
                lineno,
                format!("expected {d} components, found {}", values.len()),
            ));
        }
        if let Some(decl) = declared_dim {
            if decl != d {
                return Err(format_err(
                    source,
                    lineno,
                    format!("header declares dimension {decl}, found {d}"),
                ));
            }
        }
        if vocab.is_some_and(|v| !v.contains(word)) || !seen.insert(word.to_string()) {
            continue;
        }
        let v = values
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| format_err(source, lineno, format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        entries.push((word.to_string(), v));
    }

    if entries.is_empty() {
        return Err(Error::Empty(format!(
            "intersection of {source} with the vocabulary"
        )));
    }
    let mut table = EmbeddingTable::new(dim.unwrap_or(0), DEFAULT_OOV_BOUND)?;
    for (w, v) in &entries {
        table.insert(w, v)?;
    }
    Ok(table)
}

pub fn load_static_vectors(path: &Path, vocab: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_static_vectors(
        std::io::BufReader::new(file),
        vocab,
        &path.display().to_string(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualSentenceVectors {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ContextualHeader {
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct ContextualLine {
    id: String,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextualVectors {
    pub dim: usize,
    pub sentences: BTreeMap<String, ContextualSentenceVectors>,
}

impl ContextualVectors {
    pub fn get(&self, id: &str) -> Option<&ContextualSentenceVectors> {
        self.sentences.get(id)
    }

    pub fn total_vectors(&self) -> usize {
        self.sentences.values().map(|s| s.vectors.len()).sum()
    }
}

pub fn read_contextual<R: BufRead>(reader: R, source: &str) -> Result<ContextualVectors> {
    let mut lines = reader.lines().enumerate();
    let dim = loop {
        match lines.next() {
            None => return Err(Error::Empty(format!("contextual file {source}"))),
            Some((i, line)) => {
                let line = line.map_err(|e| format_err(source, i + 1, e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let h: ContextualHeader = serde_json::from_str(&line)
                    .map_err(|e| format_err(source, i + 1, format!("bad header: {e}")))?;
                if h.dim == 0 {
                    return Err(format_err(source, i + 1, "dimension must be positive"));
                }
                break h.dim;
            }
        }
    };
    let mut out = ContextualVectors {
        dim,
        sentences: BTreeMap::new(),
    };
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| format_err(source, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ContextualLine =
            serde_json::from_str(&line).map_err(|e| format_err(source, lineno, e.to_string()))?;
        if rec.tokens.len() != rec.vectors.len() {
            return Err(Error::Alignment {
                id: rec.id,
                tokens: rec.tokens.len(),
                vectors: rec.vectors.len(),
            });
        }
        if let Some(bad) = rec.vectors.iter().position(|v| v.len() != dim) {
            return Err(format_err(
                source,
                lineno,
                format!(
                    "sentence {}: vector {bad} has length {}, expected {dim}",
                    rec.id,
                    rec.vectors[bad].len()
                ),
            ));
        }
        if out.sentences.contains_key(&rec.id) {
            return Err(format_err(
                source,
                lineno,
                format!("duplicate sentence id `{}`", rec.id),
            ));
        }
        out.sentences.insert(
            rec.id,
            ContextualSentenceVectors {
                tokens: rec.tokens,
                vectors: rec.vectors,
            },
        );
    }
    Ok(out)
}

pub fn load_contextual(path: &Path) -> Result<ContextualVectors> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_contextual(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_contextual<W: Write>(mut w: W, vectors: &ContextualVectors) -> Result<()> {
    let io = |e| Error::io("<contextual>", e);
    serde_json::to_writer(&mut w, &ContextualHeader { dim: vectors.dim })?;
    w.write_all(b"\n").map_err(io)?;
    for (id, s) in &vectors.sentences {
        #[derive(Serialize)]
        struct Borrowed<'a> {
            id: &'a str,
            tokens: &'a [String],
            vectors: &'a [Vec<f64>],
        }
        serde_json::to_writer(
            &mut w,
            &Borrowed {
                id,
                tokens: &s.tokens,
                vectors: &s.vectors,
            },
        )?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}
