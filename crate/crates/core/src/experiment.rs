//! Multi-seed experiments: one full train + evaluate per derived seed,
//! collected into a seed × epoch result matrix.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{accuracy, EpochStats, ExamplePredictor, ModelParams};
use crate::dataset::{Example, SubsetFilter};
use crate::distill::{finalize, train_distilled, DistillConfig};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::stats::{summarize, Summary};

type Metric = (&'static str, fn(&EvalRecord) -> Option<f64>);

/// What the first layer of a fresh model looks like.
#[derive(Debug, Clone)]
pub enum ModelInput {
    /// Token ids into a (possibly fine-tuned) copy of this table.
    Table(EmbeddingTable),
    /// Frozen per-token vectors of this dimension.
    Frozen { dim: usize },
}

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub input: ModelInput,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl ExperimentData {
    pub fn init_model(&self, cfg: &DistillConfig) -> Result<ModelParams> {
        match &self.input {
            ModelInput::Table(t) => cfg.train.init_model(t.dim(), Some(t.clone())),
            ModelInput::Frozen { dim } => cfg.train.init_model(*dim, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dev_acc: f64,
    pub test_acc: f64,
    pub but_acc: Option<f64>,
    pub neg_acc: Option<f64>,
    pub but_or_neg_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eval: EvalRecord,
    pub pi: f64,
    pub mean_teacher_kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub index: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub early_stopped: EvalRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResultMatrix {
    pub variant: String,
    pub master_seed: u64,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<SeedFailure>,
}

/// `seed_i = master + i`.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}

/// Accuracies of a (finalized) predictor on dev, test and the test subsets.
pub fn evaluate<P: ExamplePredictor + ?Sized>(
    predictor: &P,
    dev: &[Example],
    test: &[Example],
) -> Result<EvalRecord> {
    Ok(EvalRecord {
        dev_acc: accuracy(predictor, dev, SubsetFilter::All)?,
        test_acc: accuracy(predictor, test, SubsetFilter::All)?,
        but_acc: accuracy(predictor, test, SubsetFilter::But).ok(),
        neg_acc: accuracy(predictor, test, SubsetFilter::Neg).ok(),
        but_or_neg_acc: accuracy(predictor, test, SubsetFilter::ButOrNeg).ok(),
    })
}

/// Trains one seed of `cfg` and evaluates the finalized predictor after
/// every epoch. Returns the run record and the early-stopped model.
pub fn run_single(
    data: &ExperimentData,
    cfg: &DistillConfig,
    index: usize,
    seed: u64,
) -> Result<(SeedRun, ModelParams)> {
    let mut cfg = cfg.clone();
    cfg.train.seed = seed;
    let model = data.init_model(&cfg)?;
    let mut epochs = Vec::new();
    let mut on_epoch = |stats: &EpochStats, m: &ModelParams| -> Result<()> {
        let eval = evaluate(&finalize(m, &cfg), &data.dev, &data.test)?;
        epochs.push(EpochRecord {
            epoch: stats.epoch,
            eval,
            pi: stats.pi,
            mean_teacher_kl: stats.mean_teacher_kl,
        });
        Ok(())
    };
    let outcome = train_distilled(model, &data.train, &data.dev, &cfg, &mut on_epoch)?;
    let early_stopped = epochs[outcome.best_epoch - 1].eval.clone();
    Ok((
        SeedRun {
            index,
            seed,
            epochs,
            best_epoch: outcome.best_epoch,
            early_stopped,
        },
        outcome.params,
    ))
}

/// Runs `run(index, seed)` for every seed index not already in `done`,
/// on a pool of `workers` threads. Results are ordered by index regardless
/// of scheduling; `on_done` sees each newly completed run.
pub fn run_seeds<F, G>(
    variant: &str,
    master_seed: u64,
    n_seeds: usize,
    workers: usize,
    done: Vec<SeedRun>,
    run: F,
    on_done: G,
) -> Result<SeedResultMatrix>
where
    F: Fn(usize, u64) -> Result<SeedRun> + Sync,
    G: Fn(&SeedRun) -> Result<()> + Sync,
{
    if n_seeds == 0 {
        return Err(Error::Config("n_seeds must be at least 1".into()));
    }
    let mut have: BTreeMap<usize, SeedRun> = done
        .into_iter()
        .filter(|r| r.index < n_seeds && r.seed == derive_seed(master_seed, r.index))
        .map(|r| (r.index, r))
        .collect();
    let todo: Vec<usize> = (0..n_seeds).filter(|i| !have.contains_key(i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(usize, Result<SeedRun>)> = pool.install(|| {
        todo.par_iter()
            .map(|&i| {
                let r = run(i, derive_seed(master_seed, i)).and_then(|r| {
                    on_done(&r)?;
                    Ok(r)
                });
                (i, r)
            })
            .collect()
    });
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(run) => {
                have.insert(i, run);
            }
            Err(e) => failures.push(SeedFailure {
                index: i,
                seed: derive_seed(master_seed, i),
                error: e.to_string(),
            }),
        }
    }
    Ok(SeedResultMatrix {
        variant: variant.to_string(),
        master_seed,
        runs: have.into_values().collect(),
        failures,
    })
}

pub fn run_seeded(
    data: &ExperimentData,
    cfg: &DistillConfig,
    n_seeds: usize,
    master_seed: u64,
    workers: usize,
) -> Result<SeedResultMatrix> {
    run_seeds(
        &cfg.variant_name(),
        master_seed,
        n_seeds,
        workers,
        Vec::new(),
        |i, seed| run_single(data, cfg, i, seed).map(|(r, _)| r),
        |_| Ok(()),
    )
}

fn seed_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("seed-{index:04}.json"))
}

/// Like [`run_seeded`], persisting each finished seed under `dir` and
/// skipping seeds already stored there.
pub fn run_seeded_resumable(
    data: &ExperimentData,
    cfg: &DistillConfig,
    variant: &str,
    n_seeds: usize,
    master_seed: u64,
    workers: usize,
    dir: &Path,
) -> Result<SeedResultMatrix> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut done = Vec::new();
    for i in 0..n_seeds {
        let path = seed_file(dir, i);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(run) = serde_json::from_str::<SeedRun>(&text) {
                done.push(run);
            }
        }
    }
    run_seeds(
        variant,
        master_seed,
        n_seeds,
        workers,
        done,
        |i, seed| run_single(data, cfg, i, seed).map(|(r, _)| r),
        |run| {
            let path = seed_file(dir, run.index);
            let tmp = path.with_extension("json.tmp");
            std::fs::write(&tmp, serde_json::to_vec(run)?).map_err(|e| Error::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub n: usize,
    pub mean_test_acc: f64,
    pub ci95: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SeedResultMatrix {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn early_stopped_test(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.early_stopped.test_acc).collect()
    }

    /// Summaries of each early-stopped metric across seeds.
    pub fn summaries(&self) -> Result<BTreeMap<String, Summary>> {
        let mut out = BTreeMap::new();
        let metrics: [Metric; 5] = [
            ("dev_acc", |e| Some(e.dev_acc)),
            ("test_acc", |e| Some(e.test_acc)),
            ("but_acc", |e| e.but_acc),
            ("neg_acc", |e| e.neg_acc),
            ("but_or_neg_acc", |e| e.but_or_neg_acc),
        ];
        for (name, f) in metrics {
            let vals: Vec<f64> = self
                .runs
                .iter()
                .filter_map(|r| f(&r.early_stopped))
                .collect();
            if !vals.is_empty() {
                out.insert(name.to_string(), summarize(&vals)?);
            }
        }
        Ok(out)
    }

    /// Mean test accuracy per epoch over the seeds that reached it.
    pub fn epoch_trace(&self) -> Vec<TraceRow> {
        let max_epoch = self
            .runs
            .iter()
            .flat_map(|r| r.epochs.iter().map(|e| e.epoch))
            .max()
            .unwrap_or(0);
        (1..=max_epoch)
            .filter_map(|epoch| {
                let vals: Vec<f64> = self
                    .runs
                    .iter()
                    .filter_map(|r| r.epochs.iter().find(|e| e.epoch == epoch))
                    .map(|e| e.eval.test_acc)
                    .collect();
                let s = summarize(&vals).ok()?;
                Some(TraceRow {
                    epoch,
                    n: s.n,
                    mean_test_acc: s.mean,
                    ci95: s.ci95,
                })
            })
            .collect()
    }

    /// Columns `seed, epoch, dev_acc, test_acc, but_acc, neg_acc,
    /// early_stop_flag, but_or_neg_acc`; subset accuracies are blank when the
    /// subset is empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "seed",
            "epoch",
            "dev_acc",
            "test_acc",
            "but_acc",
            "neg_acc",
            "early_stop_flag",
            "but_or_neg_acc",
        ])?;
        for run in &self.runs {
            for e in &run.epochs {
                wr.write_record([
                    run.seed.to_string(),
                    e.epoch.to_string(),
                    e.eval.dev_acc.to_string(),
                    e.eval.test_acc.to_string(),
                    opt(e.eval.but_acc),
                    opt(e.eval.neg_acc),
                    u8::from(e.epoch == run.best_epoch).to_string(),
                    opt(e.eval.but_or_neg_acc),
                ])?;
            }
        }
        wr.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "n", "mean_test_acc", "ci95"])?;
        for t in self.epoch_trace() {
            wr.write_record([
                t.epoch.to_string(),
                t.n.to_string(),
                t.mean_test_acc.to_string(),
                opt(t.ci95),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct MatrixCsvRow {
    seed: u64,
    #[allow(dead_code)]
    epoch: usize,
    #[allow(dead_code)]
    dev_acc: f64,
    test_acc: f64,
    early_stop_flag: u8,
}

/// Early-stopped test accuracy of every seed in a matrix CSV, in file order.
pub fn read_early_stopped_test<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    let mut seeds = std::collections::HashSet::new();
    for row in rd.deserialize::<MatrixCsvRow>() {
        let row = row?;
        if row.early_stop_flag == 1 {
            if !seeds.insert(row.seed) {
                return Err(Error::Validation(format!(
                    "seed {} has more than one early-stopped row",
                    row.seed
                )));
            }
            out.push(row.test_acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_run(index: usize, seed: u64) -> SeedRun {
        let eval = |x: f64| EvalRecord {
            dev_acc: x,
            test_acc: x - 0.01,
            but_acc: Some(x - 0.1),
            neg_acc: None,
            but_or_neg_acc: Some(x - 0.05),
        };
        let base = 0.8 + (seed % 7) as f64 / 100.0;
        SeedRun {
            index,
            seed,
            epochs: (1..=3)
                .map(|e| EpochRecord {
                    epoch: e,
                    eval: eval(base + e as f64 / 1000.0),
                    pi: 1.0,
                    mean_teacher_kl: None,
                })
                .collect(),
            best_epoch: 2,
            early_stopped: eval(base + 0.002),
        }
    }

    #[test]
    fn seeds_are_master_plus_index() {
        assert_eq!(derive_seed(10, 3), 13);
        let m = run_seeds(
            "v",
            100,
            4,
            3,
            vec![],
            |i, s| Ok(fake_run(i, s)),
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(
            m.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![100, 101, 102, 103]
        );
        assert!(!m.is_partial());
    }

    #[test]
    fn order_independent_of_workers() {
        let a = run_seeds("v", 7, 9, 1, vec![], |i, s| Ok(fake_run(i, s)), |_| Ok(())).unwrap();
        let b = run_seeds("v", 7, 9, 4, vec![], |i, s| Ok(fake_run(i, s)), |_| Ok(())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failures_are_recorded_per_seed() {
        let m = run_seeds(
            "v",
            0,
            4,
            2,
            vec![],
            |i, s| {
                if i == 2 {
                    Err(Error::Numeric("boom".into()))
                } else {
                    Ok(fake_run(i, s))
                }
            },
            |_| Ok(()),
        )
        .unwrap();
        assert!(m.is_partial());
        assert_eq!(m.runs.len(), 3);
        assert_eq!(m.failures[0].index, 2);
    }

    #[test]
    fn completed_seeds_are_skipped() {
        let done = vec![fake_run(0, 5), fake_run(1, 6)];
        let m = run_seeds(
            "v",
            5,
            3,
            1,
            done,
            |i, s| {
                assert_eq!(i, 2, "seed {i} should have been skipped");
                Ok(fake_run(i, s))
            },
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(m.runs.len(), 3);
    }

    #[test]
    fn csv_marks_early_stopped_row() {
        let m = run_seeds("v", 0, 2, 1, vec![], |i, s| Ok(fake_run(i, s)), |_| Ok(())).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.lines().nth(2).unwrap().contains(",1,"));
        let es = read_early_stopped_test(buf.as_slice()).unwrap();
        let expect: Vec<f64> = m.runs.iter().map(|r| r.epochs[1].eval.test_acc).collect();
        assert_eq!(es, expect);
    }

    #[test]
    fn trace_and_summaries() {
        let m = run_seeds("v", 0, 3, 1, vec![], |i, s| Ok(fake_run(i, s)), |_| Ok(())).unwrap();
        let t = m.epoch_trace();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|r| r.n == 3));
        let s = m.summaries().unwrap();
        assert!(s.contains_key("test_acc"));
        assert!(!s.contains_key("neg_acc"));
    }
}
