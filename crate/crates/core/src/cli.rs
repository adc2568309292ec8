//! Command-line front end.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{kl_report, similarity_report, write_manifest, VectorSource};
use crate::cnn::{load_checkpoint, save_checkpoint, EpochStats, ExamplePredictor, ModelParams};
use crate::config::{parse_override, EmbeddingSource, IngestMode, RunConfig, ECHO_FILE};
use crate::crowd::{crowd_table, read_judgments};
use crate::dataset::{examples_from_contextual, examples_from_table, Example};
use crate::distill::{finalize, train_distilled, DistillMode};
use crate::embeddings::{load_contextual, load_static_vectors, ContextualVectors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::experiment::{evaluate, run_seeded_resumable, ExperimentData, ModelInput};
use crate::rules::{project_dataset, ProjectionConfig};
use crate::sst::{
    corpus_stats, extract_instances, read_instances_file, read_ptb_file, write_instances,
    ExtractMode, Label, LabeledInstance, NegationLexicon,
};
use crate::stats::{significance_grid, significance_table, table_a3_pairs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "logicsent",
    version,
    about = "Rule-constrained sentiment classification"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override any config key, e.g. `--set max_epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Sentence,
    Phrase,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Static,
    Contextual,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse SST trees into instance files and corpus statistics.
    Ingest {
        #[arg(long)]
        sst_dir: Option<PathBuf>,
        /// `phrase` additionally extracts every labeled train phrase.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        negations: Option<PathBuf>,
    },
    /// Train one model and write its checkpoint and training log.
    Train(DataArgs),
    /// Train and evaluate many seeds of one variant; resumable.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Pairwise KS tests between experiment results.
    Significance {
        /// `NAME=PATH` to a matrix CSV, or an experiment directory.
        #[arg(long = "matrix", required = true)]
        matrices: Vec<String>,
        /// `A:B` pair; defaults to those of the nine published comparisons
        /// whose variants are all given.
        #[arg(long = "pair")]
        pairs: Vec<String>,
        /// Compare every pair of supplied matrices.
        #[arg(long, conflicts_with = "pairs")]
        all_pairs: bool,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Threshold crowd judgments and score predictions on non-neutral subsets.
    Crowd {
        #[arg(long)]
        judgments: PathBuf,
        /// `NAME=PATH` to a predictions CSV (`sentence_id,label`).
        #[arg(long = "predictions")]
        predictions: Vec<String>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Intra-sentence cosine similarity matrices for A-but-B sentences.
    Similarity {
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Use the (possibly fine-tuned) embedding rows of a checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pretrained static vectors.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Contextual vectors aligned with `instances`.
        #[arg(long)]
        contextual: Option<PathBuf>,
    },
    /// Mean KL between projected and raw predictions per variant.
    Klreport {
        /// `NAME=CHECKPOINT`; repeat a name to average over seeds.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Contextual vectors for checkpoints without an embedding table.
        #[arg(long)]
        contextual: Option<PathBuf>,
        #[arg(long)]
        c: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// e.g. `distill,project`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
}

type Overrides = Vec<(String, toml::Value)>;

fn push_path(o: &mut Overrides, key: &str, v: &Option<PathBuf>) {
    if let Some(p) = v {
        o.push((key.into(), toml::Value::String(p.display().to_string())));
    }
}

impl DataArgs {
    fn overrides(&self, o: &mut Overrides) {
        push_path(o, "train", &self.train);
        push_path(o, "dev", &self.dev);
        push_path(o, "test", &self.test);
        push_path(o, "vectors", &self.vectors);
        if let Some(s) = self.source {
            let s = match s {
                SourceArg::Static => "static",
                SourceArg::Contextual => "contextual",
                SourceArg::Random => "random",
            };
            o.push(("source".into(), toml::Value::String(s.into())));
        }
        if let Some(v) = &self.variant {
            o.push(("variant".into(), toml::Value::String(v.clone())));
        }
        if let Some(c) = self.c {
            o.push(("c".into(), toml::Value::Float(c)));
        }
    }
}

impl Cli {
    /// Resolved configuration: defaults, `--config`, `--set`, then flags.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut o: Overrides = self
            .common
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<_>>()?;
        push_path(&mut o, "out", &self.common.out);
        if let Some(s) = self.common.seed {
            let s = i64::try_from(s).map_err(|_| Error::Config(format!("seed {s} too large")))?;
            o.push(("seed".into(), toml::Value::Integer(s)));
        }
        if let Some(w) = self.common.workers {
            o.push(("workers".into(), toml::Value::Integer(w as i64)));
        }
        match &self.command {
            Command::Ingest {
                sst_dir,
                mode,
                negations,
            } => {
                push_path(&mut o, "sst_dir", sst_dir);
                push_path(&mut o, "negations", negations);
                if let Some(m) = mode {
                    let m = match m {
                        ModeArg::Sentence => "sentence",
                        ModeArg::Phrase => "phrase",
                    };
                    o.push(("mode".into(), toml::Value::String(m.into())));
                }
            }
            Command::Train(d) => d.overrides(&mut o),
            Command::Experiment { data, seeds } => {
                data.overrides(&mut o);
                if let Some(n) = seeds {
                    o.push(("seeds".into(), toml::Value::Integer(*n as i64)));
                }
            }
            Command::Significance { alpha, .. } => {
                if let Some(a) = alpha {
                    o.push(("alpha".into(), toml::Value::Float(*a)));
                }
            }
            Command::Crowd { thresholds, .. } => {
                if let Some(t) = thresholds {
                    o.push((
                        "thresholds".into(),
                        toml::Value::Array(t.iter().map(|&x| toml::Value::Float(x)).collect()),
                    ));
                }
            }
            Command::Similarity { .. } => {}
            Command::Klreport { c, .. } => {
                if let Some(c) = c {
                    o.push(("c".into(), toml::Value::Float(*c)));
                }
            }
        }
        RunConfig::resolve(self.common.config.as_deref(), &o)
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::StaleCache | Error::Numeric(_) => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

/// Runs the parsed command; returns the exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = cli.resolve_config()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match &cli.command {
        Command::Ingest { .. } => cmd_ingest(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Experiment { .. } => cmd_experiment(&cfg),
        Command::Significance {
            matrices,
            pairs,
            all_pairs,
            ..
        } => cmd_significance(&cfg, matrices, pairs, *all_pairs),
        Command::Crowd {
            judgments,
            predictions,
            ..
        } => cmd_crowd(&cfg, judgments, predictions),
        Command::Similarity {
            instances,
            checkpoint,
            vectors,
            contextual,
        } => cmd_similarity(&cfg, instances, checkpoint, vectors, contextual),
        Command::Klreport {
            models,
            instances,
            contextual,
            ..
        } => cmd_klreport(&cfg, models, instances, contextual),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn split_named(s: &str) -> Result<(String, PathBuf)> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("`{s}` is not NAME=PATH")))?;
    Ok((name.trim().to_string(), PathBuf::from(path.trim())))
}

fn sst_split_file(dir: &Path, split: &str) -> PathBuf {
    let direct = dir.join(format!("{split}.txt"));
    let nested = dir.join("trees").join(format!("{split}.txt"));
    if !direct.exists() && nested.exists() {
        nested
    } else {
        direct
    }
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<i32> {
    let dir = cfg.require_path("sst_dir", &cfg.sst_dir)?;
    let lexicon = match &cfg.negations {
        Some(p) => NegationLexicon::from_file(p)?,
        None => NegationLexicon::default(),
    };
    let mut splits: Vec<(&str, Vec<LabeledInstance>)> = Vec::new();
    let mut trees = Vec::new();
    for split in ["train", "dev", "test"] {
        trees.push(read_ptb_file(&sst_split_file(dir, split))?);
    }
    if cfg.mode == IngestMode::Phrase {
        let phrases = extract_instances(&trees[0], ExtractMode::Phrase, &lexicon)?;
        let path = cfg.out.join("train_phrase.jsonl");
        let mut w = create(&path)?;
        write_instances(&mut w, &phrases)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        splits.push(("Phrases", phrases));
    }
    for (split, t) in ["train", "dev", "test"].into_iter().zip(&trees) {
        let insts = extract_instances(t, ExtractMode::Sentence, &lexicon)?;
        let path = cfg.out.join(format!("{split}.jsonl"));
        let mut w = create(&path)?;
        write_instances(&mut w, &insts)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        let title = match split {
            "train" => "Train",
            "dev" => "Dev",
            _ => "Test",
        };
        splits.push((title, insts));
    }
    let refs: Vec<(&str, &[LabeledInstance])> =
        splits.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    let stats = corpus_stats(&refs)?;
    stats.write_csv(create(&cfg.out.join("stats.csv"))?)?;
    for s in &stats.splits {
        println!(
            "{:<8} {:>6} instances  A-but-B {:>4.1}%  negation {:>4.1}%  discourse {:>4.1}%",
            s.name,
            s.instances,
            s.a_but_b_pct(),
            s.negation_pct(),
            s.discourse_pct()
        );
    }
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}

/// Train, dev and test instances of the run.
pub fn load_instances(cfg: &RunConfig) -> Result<[Vec<LabeledInstance>; 3]> {
    Ok([
        read_instances_file(cfg.require_path("train", &cfg.train)?)?,
        read_instances_file(cfg.require_path("dev", &cfg.dev)?)?,
        read_instances_file(cfg.require_path("test", &cfg.test)?)?,
    ])
}

fn vocabulary(splits: &[Vec<LabeledInstance>]) -> BTreeSet<String> {
    splits
        .iter()
        .flatten()
        .flat_map(|i| i.tokens.iter().cloned())
        .collect()
}

/// Embedding table for the configured static or random source. Words
/// without a pretrained vector get a random one drawn from the master seed.
pub fn build_table(cfg: &RunConfig, splits: &[Vec<LabeledInstance>]) -> Result<EmbeddingTable> {
    let vocab = vocabulary(splits);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.source {
        EmbeddingSource::Random => EmbeddingTable::random(
            vocab.iter().map(String::as_str),
            cfg.dim,
            cfg.oov_bound,
            &mut rng,
        ),
        _ => {
            let path = cfg.require_path("vectors", &cfg.vectors)?;
            let wanted: HashSet<String> = vocab.iter().cloned().collect();
            let mut table = load_static_vectors(path, Some(&wanted))?;
            table.extend_oov(vocab.iter().map(String::as_str), &mut rng);
            Ok(table)
        }
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<ExperimentData> {
    let [train, dev, test] = load_instances(cfg)?;
    if cfg.source == EmbeddingSource::Contextual {
        let load = |key: &str, p: &Option<PathBuf>| -> Result<ContextualVectors> {
            load_contextual(cfg.require_path(key, p)?)
        };
        let ct = load("contextual_train", &cfg.contextual_train)?;
        let cd = load("contextual_dev", &cfg.contextual_dev)?;
        let cs = load("contextual_test", &cfg.contextual_test)?;
        if cd.dim != ct.dim || cs.dim != ct.dim {
            return Err(Error::Config("contextual files differ in dimension".into()));
        }
        return Ok(ExperimentData {
            input: ModelInput::Frozen { dim: ct.dim },
            train: examples_from_contextual(&ct, &train)?,
            dev: examples_from_contextual(&cd, &dev)?,
            test: examples_from_contextual(&cs, &test)?,
        });
    }
    let splits = [train, dev, test];
    let table = build_table(cfg, &splits)?;
    Ok(ExperimentData {
        train: examples_from_table(&table, &splits[0]),
        dev: examples_from_table(&table, &splits[1]),
        test: examples_from_table(&table, &splits[2]),
        input: ModelInput::Table(table),
    })
}

/// Grid label of the configured variant; contextual inputs are labeled by
/// source instead of distillation mode.
pub fn variant_label(cfg: &RunConfig) -> Result<String> {
    let d = cfg.distill_config()?;
    if cfg.source != EmbeddingSource::Contextual {
        return Ok(d.variant_name());
    }
    let proj = if d.final_project {
        "project"
    } else {
        "no-project"
    };
    Ok(match d.mode {
        DistillMode::NoDistill => format!("contextual,{proj}"),
        DistillMode::Distill => format!("contextual-distill,{proj}"),
    })
}

#[derive(Serialize)]
struct LogLine {
    epoch: usize,
    pi: f64,
    dev_acc: f64,
    dev_acc_but: Option<f64>,
    mean_teacher_kl: Option<f64>,
}

pub fn write_predictions<P: ExamplePredictor + ?Sized>(
    path: &Path,
    predictor: &P,
    examples: &[Example],
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(["sentence_id", "label", "p_pos"])?;
    for e in examples {
        let p = predictor.predict_example(e)?;
        wr.write_record([
            e.id.clone(),
            p.argmax().symbol().to_string(),
            p.pos.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<HashMap<String, Label>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(f);
    let mut out = HashMap::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let label = row
            .get(1)
            .and_then(Label::parse)
            .ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                line: i + 2,
                message: "second column must be a label".into(),
            })?;
        out.insert(row[0].to_string(), label);
    }
    Ok(out)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<i32> {
    let data = load_data(cfg)?;
    let dcfg = cfg.distill_config()?;
    let model = data.init_model(&dcfg)?;
    let log_path = cfg.out.join("train_log.jsonl");
    let mut log = create(&log_path)?;
    let mut on_epoch = |s: &EpochStats, _: &ModelParams| -> Result<()> {
        let line = LogLine {
            epoch: s.epoch,
            pi: s.pi,
            dev_acc: s.dev_acc,
            dev_acc_but: s.dev_acc_but,
            mean_teacher_kl: s.mean_teacher_kl,
        };
        serde_json::to_writer(&mut log, &line)?;
        log.write_all(b"\n").map_err(|e| Error::io(&log_path, e))?;
        eprintln!("epoch {:>3}  pi {:.4}  dev {:.4}", s.epoch, s.pi, s.dev_acc);
        Ok(())
    };
    let outcome = train_distilled(model, &data.train, &data.dev, &dcfg, &mut on_epoch)?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    save_checkpoint(
        &cfg.out.join("model.ckpt"),
        &outcome.params,
        Some(&dcfg.train),
    )?;
    let predictor = finalize(&outcome.params, &dcfg);
    let eval = evaluate(&predictor, &data.dev, &data.test)?;
    write_predictions(
        &cfg.out.join("test_predictions.csv"),
        &predictor,
        &data.test,
    )?;
    match project_dataset(&outcome.params, &data.test, dcfg.projection) {
        Ok(rep) => {
            rep.write_csv(create(&cfg.out.join("projection.csv"))?)?;
            write_json(
                &cfg.out.join("projection_summary.json"),
                &rep.summary_json(),
            )?;
        }
        Err(Error::Empty(_)) => eprintln!("no A-but-B test sentences; projection report skipped"),
        Err(e) => return Err(e),
    }
    write_json(
        &cfg.out.join("eval.json"),
        &serde_json::json!({
            "variant": variant_label(cfg)?,
            "seed": cfg.seed,
            "best_epoch": outcome.best_epoch,
            "eval": eval,
        }),
    )?;
    println!(
        "best epoch {}  dev {:.4}  test {:.4}",
        outcome.best_epoch, eval.dev_acc, eval.test_acc
    );
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}

/// Refuses to resume into a directory produced by a different run
/// configuration. Only the worker count may change between attempts.
fn check_resume(cfg: &RunConfig) -> Result<()> {
    let path = cfg.out.join(ECHO_FILE);
    if !path.exists() {
        return Ok(());
    }
    let mut old = RunConfig::resolve(Some(&path), &[])?;
    old.workers = cfg.workers;
    old.seeds = cfg.seeds;
    if old != *cfg {
        return Err(Error::Config(format!(
            "{} holds results of a different configuration",
            cfg.out.display()
        )));
    }
    Ok(())
}

pub fn cmd_experiment(cfg: &RunConfig) -> Result<i32> {
    check_resume(cfg)?;
    cfg.echo(&cfg.out)?;
    let data = load_data(cfg)?;
    let dcfg = cfg.distill_config()?;
    let label = variant_label(cfg)?;
    let matrix = run_seeded_resumable(
        &data,
        &dcfg,
        &label,
        cfg.seeds,
        cfg.seed,
        cfg.workers,
        &cfg.out.join("seeds"),
    )?;
    matrix.write_csv(create(&cfg.out.join("matrix.csv"))?)?;
    matrix.write_trace_csv(create(&cfg.out.join("trace.csv"))?)?;
    let summaries = if matrix.runs.is_empty() {
        BTreeMap::new()
    } else {
        matrix.summaries()?
    };
    write_json(
        &cfg.out.join("summary.json"),
        &serde_json::json!({
            "variant": label,
            "master_seed": cfg.seed,
            "n_seeds": cfg.seeds,
            "completed": matrix.runs.len(),
            "partial": matrix.is_partial(),
            "failures": matrix.failures,
            "summaries": summaries,
        }),
    )?;
    if let Some(s) = summaries.get("test_acc") {
        println!(
            "{label}: {} seeds, test {:.4} ± {:.4}",
            s.n,
            s.mean,
            s.ci95.unwrap_or(0.0)
        );
    }
    for f in &matrix.failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    Ok(if matrix.is_partial() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

/// Resolves `NAME=PATH` or an experiment directory to a label and the
/// early-stopped test accuracies.
fn load_matrix(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, path) = match spec.split_once('=') {
        Some(_) => {
            let (n, p) = split_named(spec)?;
            (Some(n), p)
        }
        None => (None, PathBuf::from(spec)),
    };
    let (csv_path, name) = if path.is_dir() {
        let name = match name {
            Some(n) => n,
            None => {
                let s = path.join("summary.json");
                let text = std::fs::read_to_string(&s).map_err(|e| Error::io(&s, e))?;
                let v: serde_json::Value = serde_json::from_str(&text)?;
                v["variant"]
                    .as_str()
                    .ok_or_else(|| Error::Config(format!("{}: no variant", s.display())))?
                    .to_string()
            }
        };
        (path.join("matrix.csv"), name)
    } else {
        let name =
            name.ok_or_else(|| Error::Config(format!("`{spec}`: matrix files need NAME=PATH")))?;
        (path, name)
    };
    let f = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    Ok((name, crate::experiment::read_early_stopped_test(f)?))
}

pub fn cmd_significance(
    cfg: &RunConfig,
    matrices: &[String],
    pairs: &[String],
    all_pairs: bool,
) -> Result<i32> {
    let mut samples = BTreeMap::new();
    for m in matrices {
        let (name, vals) = load_matrix(m)?;
        if samples.insert(name.clone(), vals).is_some() {
            return Err(Error::Config(format!("variant `{name}` given twice")));
        }
    }
    let pairs: Vec<(String, String)> = if all_pairs {
        let names: Vec<&String> = samples.keys().collect();
        names
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                names[i + 1..]
                    .iter()
                    .map(|b| (a.to_string(), b.to_string()))
            })
            .collect()
    } else if pairs.is_empty() {
        let grid: Vec<(String, String)> = table_a3_pairs()
            .into_iter()
            .filter(|(a, b)| samples.contains_key(a) && samples.contains_key(b))
            .collect();
        if grid.is_empty() {
            return Err(Error::Config(
                "no published comparison among the given variants; use --pair or --all-pairs"
                    .into(),
            ));
        }
        grid
    } else {
        pairs
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| Error::Config(format!("pair `{p}` is not A:B")))
            })
            .collect::<Result<_>>()?
    };
    let rows = significance_grid(&samples, &pairs, cfg.alpha)?;
    write_json(&cfg.out.join("significance.json"), &rows)?;
    let table = significance_table(&rows);
    std::fs::write(cfg.out.join("significance.txt"), &table)
        .map_err(|e| Error::io(cfg.out.join("significance.txt"), e))?;
    print!("{table}");
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}

pub fn cmd_crowd(cfg: &RunConfig, judgments: &Path, predictions: &[String]) -> Result<i32> {
    let f = File::open(judgments).map_err(|e| Error::io(judgments, e))?;
    let records = read_judgments(f, cfg.raters).map_err(|e| match e {
        Error::Parse { line, message } => Error::Format {
            path: judgments.display().to_string(),
            line,
            message,
        },
        other => other,
    })?;
    let models = predictions
        .iter()
        .map(|s| {
            let (name, path) = split_named(s)?;
            Ok((name, read_predictions(&path)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = crowd_table(&records, &cfg.thresholds, &models)?;
    table.write_csv(create(&cfg.out.join("crowd_table.csv"))?)?;
    table.write_accuracy_csv(create(&cfg.out.join("crowd_accuracy.csv"))?)?;
    write_json(&cfg.out.join("crowd.json"), &table)?;
    let mut stdout = std::io::stdout();
    table.write_csv(&mut stdout)?;
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}

fn instances_arg(cfg: &RunConfig, given: &Option<PathBuf>) -> Result<Vec<LabeledInstance>> {
    match given {
        Some(p) => read_instances_file(p),
        None => read_instances_file(cfg.require_path("test", &cfg.test)?),
    }
}

pub fn cmd_similarity(
    cfg: &RunConfig,
    instances: &Option<PathBuf>,
    checkpoint: &Option<PathBuf>,
    vectors: &Option<PathBuf>,
    contextual: &Option<PathBuf>,
) -> Result<i32> {
    if checkpoint.is_none() && vectors.is_none() && contextual.is_none() {
        return Err(Error::Config(
            "give at least one of --checkpoint, --vectors, --contextual".into(),
        ));
    }
    let insts = instances_arg(cfg, instances)?;
    let dir = cfg.out.join("similarity");
    let mut manifest = Vec::new();
    if let Some(p) = checkpoint {
        let (model, _) = load_checkpoint(p)?;
        let table = model
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} has no embedding table", p.display())))?;
        manifest.extend(similarity_report(
            &insts,
            &VectorSource::Static(table),
            "model",
            &dir,
        )?);
    }
    if let Some(p) = vectors {
        let vocab: HashSet<String> = insts
            .iter()
            .flat_map(|i| i.tokens.iter().cloned())
            .collect();
        let table = load_static_vectors(p, Some(&vocab))?;
        manifest.extend(similarity_report(
            &insts,
            &VectorSource::Static(&table),
            "static",
            &dir,
        )?);
    }
    if let Some(p) = contextual {
        let cv = load_contextual(p)?;
        manifest.extend(similarity_report(
            &insts,
            &VectorSource::Contextual(&cv),
            "contextual",
            &dir,
        )?);
    }
    write_manifest(&dir, &manifest)?;
    println!("{} matrices written to {}", manifest.len(), dir.display());
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}

pub fn cmd_klreport(
    cfg: &RunConfig,
    models: &[String],
    instances: &Option<PathBuf>,
    contextual: &Option<PathBuf>,
) -> Result<i32> {
    let insts = instances_arg(cfg, instances)?;
    let cv = contextual.as_deref().map(load_contextual).transpose()?;
    let mut by_name: BTreeMap<String, Vec<ModelParams>> = BTreeMap::new();
    for s in models {
        let (name, path) = split_named(s)?;
        let (m, _) = load_checkpoint(&path)?;
        if m.embeddings.is_none() && cv.is_none() {
            return Err(Error::Config(format!(
                "{} has no embedding table; pass --contextual",
                path.display()
            )));
        }
        by_name.entry(name).or_default().push(m);
    }
    let variants: Vec<(String, Vec<ModelParams>)> = by_name.into_iter().collect();
    let rows = kl_report(&variants, ProjectionConfig::new(cfg.c)?, |m| {
        match (&m.embeddings, &cv) {
            (Some(t), _) => Ok(examples_from_table(t, &insts)),
            (None, Some(cv)) => examples_from_contextual(cv, &insts),
            (None, None) => unreachable!("checked while loading"),
        }
    })?;
    write_json(&cfg.out.join("kl_report.json"), &rows)?;
    for r in &rows {
        println!(
            "{:<24} models {:>3}  A-but-B {:>5}  mean KL {:.4}",
            r.variant, r.n_models, r.n_a_but_b, r.mean_kl
        );
    }
    cfg.echo(&cfg.out)?;
    Ok(EXIT_OK)
}
