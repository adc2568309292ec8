//! Run configuration: a flat TOML file, overridden key by key from the
//! command line, and echoed into every output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnn::TrainConfig;
use crate::crowd::{DEFAULT_RATERS, DEFAULT_THRESHOLDS};
use crate::distill::{parse_variant, DistillConfig};
use crate::embeddings::DEFAULT_OOV_BOUND;
use crate::error::{Error, Result};
use crate::rules::ProjectionConfig;

/// File name of the resolved configuration inside an output directory.
pub const ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Pretrained word vectors from `vectors`, random for unknown words.
    Static,
    /// Precomputed per-token vectors from the `contextual_*` files.
    Contextual,
    /// Random vectors of size `dim` for the whole vocabulary.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestMode {
    Sentence,
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,

    // ingestion
    pub sst_dir: Option<PathBuf>,
    pub mode: IngestMode,
    pub negations: Option<PathBuf>,

    // instance files written by `ingest`
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,

    pub source: EmbeddingSource,
    pub vectors: Option<PathBuf>,
    pub contextual_train: Option<PathBuf>,
    pub contextual_dev: Option<PathBuf>,
    pub contextual_test: Option<PathBuf>,
    pub dim: usize,
    pub oov_bound: f64,

    pub widths: Vec<usize>,
    pub maps: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub rho: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub train_embeddings: bool,

    pub variant: String,
    pub c: f64,

    pub seeds: usize,
    pub seed: u64,
    pub workers: usize,

    pub alpha: f64,
    pub thresholds: Vec<f64>,
    pub raters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            out: PathBuf::from("out"),
            sst_dir: None,
            mode: IngestMode::Sentence,
            negations: None,
            train: None,
            dev: None,
            test: None,
            source: EmbeddingSource::Static,
            vectors: None,
            contextual_train: None,
            contextual_dev: None,
            contextual_test: None,
            dim: 300,
            oov_bound: DEFAULT_OOV_BOUND,
            widths: t.widths,
            maps: t.maps,
            dropout: t.dropout,
            batch_size: t.batch_size,
            rho: t.rho,
            epsilon: t.epsilon,
            max_epochs: t.max_epochs,
            patience: t.patience,
            train_embeddings: t.train_embeddings,
            variant: "no-distill,no-project".into(),
            c: ProjectionConfig::default().c,
            seeds: 1,
            seed: 1,
            workers: 1,
            alpha: 0.001,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            raters: DEFAULT_RATERS,
        }
    }
}

/// Parses a `key=value` override. The value is read as a TOML value and
/// falls back to a plain string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k, value))
}

impl RunConfig {
    /// Defaults, then the file, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match file {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        };
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed {} does not fit a TOML integer",
                self.seed
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        ProjectionConfig::new(self.c).map_err(|e| Error::Config(e.to_string()))?;
        parse_variant(&self.variant)?;
        self.train_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            widths: self.widths.clone(),
            maps: self.maps,
            dropout: self.dropout,
            batch_size: self.batch_size,
            rho: self.rho,
            epsilon: self.epsilon,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            train_embeddings: self.train_embeddings,
        }
    }

    pub fn distill_config(&self) -> Result<DistillConfig> {
        let (mode, final_project) = parse_variant(&self.variant)?;
        Ok(DistillConfig {
            mode,
            final_project,
            projection: ProjectionConfig::new(self.c)?,
            train: self.train_config(),
        })
    }

    /// The path stored under `key`, which must be set and exist.
    pub fn require_path<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        let p = value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is not set")))?;
        if !p.exists() {
            return Err(Error::Config(format!(
                "{key}: {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    /// Writes the resolved configuration to `dir/config.toml`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(ECHO_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "seeds = 5\nvariant = \"distill,project\"\nc = 3.0\n").unwrap();
        let cfg = RunConfig::resolve(
            Some(&file),
            &[
                parse_override("seeds=7").unwrap(),
                parse_override("out=results").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seeds, 7);
        assert_eq!(cfg.c, 3.0);
        assert_eq!(cfg.out, PathBuf::from("results"));
        assert_eq!(
            cfg.distill_config().unwrap().variant_name(),
            "distill,project"
        );
    }

    #[test]
    fn echo_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            vectors: Some("v.txt".into()),
            widths: vec![2, 3],
            ..Default::default()
        };
        cfg.echo(dir.path()).unwrap();
        let back = RunConfig::resolve(Some(&dir.path().join(ECHO_FILE)), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::resolve(None, &[parse_override("seeds=0").unwrap()]).is_err());
        assert!(RunConfig::resolve(None, &[parse_override("c=-1").unwrap()]).is_err());
        assert!(RunConfig::resolve(None, &[parse_override("variant=maybe").unwrap()]).is_err());
        assert!(RunConfig::resolve(None, &[parse_override("nonsense=1").unwrap()]).is_err());
        assert!(parse_override("novalue").is_err());
    }
}
