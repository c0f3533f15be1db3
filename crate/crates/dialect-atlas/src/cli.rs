//! Single-binary command line: ingest, stats, synth, train, score,
//! analyze, and eval subcommands.
//!
//! Configuration resolves in three layers: built-in defaults, then the
//! JSON object in --config, then explicit flags (highest wins). Every run
//! logs its fully resolved configuration together with a hash of it, so a
//! result can be reproduced from the log line plus the input files.
//! Machine-readable results go to standard output, logs and errors to
//! standard error. Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::adagram::{nearest_neighbors, AdaGramModel, AdaGramTrainConfig};
use crate::baselines::{frequency_score, syntactic_score, UsageTable};
use crate::corpus::{
    build_vocabulary, corpus_stats, load_corpus, save_corpus, RegionMap, Vocabulary,
};
use crate::dialectgram::{
    build_region_index, choropleth_rows, dialectgram_score, sense_proportions,
    write_choropleth_csv, write_choropleth_geojson, RegionIndex,
};
use crate::evaluate::{
    load_lexicon, report_table, run_benchmark, split_lexicon, ChangeScorer,
};
use crate::geodist::{self, geodist_score, GeodistModel, GeodistTrainConfig};
use crate::metric::Metric;
use crate::synth::{benchmark_spec, generate, write_labels, SynthSpec};

#[derive(Parser)]
#[command(
    name = "dialect-atlas",
    version,
    about = "Train dialect-sensitive word embeddings and detect regional meaning shifts",
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON object of default flag values; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice in the run
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training threads
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Force a single worker so reruns are bit-identical
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the frequency-filtered vocabulary and write it as TSV
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        min_freq: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-region document/token/term counts as JSON
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        resolution: Option<String>,
        #[arg(long)]
        region_map: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted regional sense shifts
    Synth {
        /// Spec JSON; the bundled benchmark spec when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth lexicon output (word TAB label)
        #[arg(long)]
        labels: PathBuf,
    },
    /// Train a geodist or dialectgram model
    Train(TrainArgs),
    /// Score words with a count-based baseline model
    Score(ScoreArgs),
    /// Inspect a trained multi-sense model across regions
    Analyze(AnalyzeArgs),
    /// Fit the threshold detector on a labeled lexicon and report metrics
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// geodist | dialectgram
    #[arg(long)]
    model: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Region resolution (required for geodist)
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    region_map: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_senses: Option<usize>,
    #[arg(long)]
    sense_threshold: Option<f64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// frequency | syntactic
    #[arg(long)]
    model: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    region_map: Option<PathBuf>,
    /// Two region ids, comma separated
    #[arg(long)]
    pair: String,
    /// Word list file (first TSV column) or "all"
    #[arg(long)]
    words: String,
    /// Output TSV of word TAB score
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trained dialectgram model file
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    region_map: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    word: Option<String>,
    /// Score the word between two regions, comma separated
    #[arg(long)]
    pair: Option<String>,
    /// List the k nearest neighbors of each active sense
    #[arg(long)]
    neighbors: Option<usize>,
    /// Write per-region usage of --sense as CSV (GeoJSON alongside when
    /// the map has geometry)
    #[arg(long, value_name = "OUT.csv")]
    export_choropleth: Option<PathBuf>,
    #[arg(long)]
    sense: Option<usize>,
    /// Regions with fewer occurrences report no proportion
    #[arg(long)]
    min_docs: Option<u64>,
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// frequency | syntactic | geodist | dialectgram
    #[arg(long)]
    model_type: String,
    /// Trained model file (required for geodist and dialectgram)
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Two region ids, comma separated
    #[arg(long)]
    pair: String,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    region_map: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    metric: Option<String>,
    /// Write the metrics table here instead of standard output
    #[arg(long)]
    report: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn dispatch() -> i32 {
    dispatch_from(std::env::args_os())
}

pub fn dispatch_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let command = match &cli.command {
        Command::Ingest { .. } => "ingest",
        Command::Stats { .. } => "stats",
        Command::Synth { .. } => "synth",
        Command::Train(_) => "train",
        Command::Score(_) => "score",
        Command::Analyze(_) => "analyze",
        Command::Eval(_) => "eval",
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("{}", json!({ "command": command, "error": msg }));
            2
        }
    }
}

fn init_logging() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        let env = env_logger::Env::new().filter_or("DIALECT_ATLAS_LOG", "info");
        let _ = env_logger::Builder::from_env(env)
            .format_timestamp(None)
            .try_init();
    });
}

/// The --config overlay: a flat JSON object keyed by flag name
/// ("min-freq", "dim", ...). Path-valued flags are not overlaid.
#[derive(Default)]
struct Overlay(serde_json::Map<String, serde_json::Value>);

impl Overlay {
    fn load(path: Option<&Path>) -> CliResult<Overlay> {
        let Some(path) = path else {
            return Ok(Overlay::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(serde_json::Value::Object(map)) => Ok(Overlay(map)),
            Ok(_) => Err(usage("--config must hold a JSON object")),
            Err(e) => Err(usage(format!("--config {}: {e}", path.display()))),
        }
    }

    fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| usage(format!("config key {key:?} must be a non-negative integer"))),
        }
    }

    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| usage(format!("config key {key:?} must be a number"))),
        }
    }

    fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| usage(format!("config key {key:?} must be a string"))),
        }
    }
}

struct Resolved {
    seed: u64,
    workers: usize,
}

fn resolve_global(global: &Global, overlay: &Overlay) -> CliResult<Resolved> {
    let seed = match global.seed {
        Some(s) => s,
        None => overlay.u64("seed")?.unwrap_or(1),
    };
    let workers = if global.deterministic {
        1
    } else {
        match global.workers {
            Some(w) => w.max(1),
            None => overlay.usize("workers")?.unwrap_or(1).max(1),
        }
    };
    Ok(Resolved { seed, workers })
}

/// Log the resolved run configuration and return its hash.
fn log_run(command: &str, resolved: &serde_json::Value) -> String {
    let canonical = resolved.to_string();
    let digest = Sha256::digest(canonical.as_bytes());
    let hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    log::info!("{command} config {canonical} hash {hash}");
    hash
}

fn parse_pair(s: &str) -> CliResult<(String, String)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(usage(format!("--pair expects REGION1,REGION2, got {s:?}"))),
    }
}

fn parse_metric(flag: Option<&str>, overlay: &Overlay) -> CliResult<Metric> {
    let name = match flag {
        Some(m) => Some(m.to_string()),
        None => overlay.string("metric")?,
    };
    match name {
        None => Ok(Metric::default()),
        Some(name) => name
            .parse::<Metric>()
            .map_err(|e| usage(e.to_string())),
    }
}

fn load_map(path: Option<&Path>) -> CliResult<Option<RegionMap>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let map = RegionMap::load(p)?;
            Ok(Some(map))
        }
    }
}

fn prepared_corpus(path: &Path, min_freq: u64) -> CliResult<(Vec<crate::corpus::Document>, Vocabulary)> {
    let mut docs = load_corpus(path)?;
    let vocab = build_vocabulary(&mut docs, min_freq)?;
    Ok((docs, vocab))
}

/// The model stores no vocabulary, so scoring rebuilds it from the corpus;
/// a size mismatch means a different corpus or --min-freq than at training.
fn check_vocab(model_words: usize, vocab: &Vocabulary) -> CliResult<()> {
    if model_words != vocab.len() {
        return Err(CliError::Runtime(format!(
            "vocabulary has {} words but the model was trained with {}; \
             use the training corpus and --min-freq",
            vocab.len(),
            model_words
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let overlay = Overlay::load(cli.global.config.as_deref())?;
    let global = resolve_global(&cli.global, &overlay)?;
    match cli.command {
        Command::Ingest { corpus, min_freq, out } => {
            let min_freq = match min_freq {
                Some(v) => v,
                None => overlay.u64("min-freq")?.unwrap_or(20),
            };
            let hash = log_run(
                "ingest",
                &json!({ "corpus": corpus.display().to_string(), "min_freq": min_freq }),
            );
            let (docs, vocab) = prepared_corpus(&corpus, min_freq)?;
            vocab.save(&out)?;
            println!(
                "{}",
                json!({
                    "documents": docs.len(),
                    "vocab": vocab.len(),
                    "out": out.display().to_string(),
                    "config_hash": hash,
                })
            );
            Ok(())
        }
        Command::Stats { corpus, resolution, region_map } => {
            let resolution = match resolution {
                Some(r) => r,
                None => overlay.string("resolution")?.unwrap_or_else(|| "country".to_string()),
            };
            log_run(
                "stats",
                &json!({ "corpus": corpus.display().to_string(), "resolution": resolution }),
            );
            let docs = load_corpus(&corpus)?;
            let map = load_map(region_map.as_deref())?;
            let stats = corpus_stats(&docs, &resolution, map.as_ref())?;
            println!("{}", serde_json::to_string(&stats).map_err(crate::Error::from)?);
            Ok(())
        }
        Command::Synth { spec, out, labels } => {
            let spec = match &spec {
                Some(path) => SynthSpec::load(path)?,
                None => benchmark_spec(),
            };
            let hash = log_run(
                "synth",
                &json!({ "seed": spec.seed, "regions": spec.regions.len(), "vocab": spec.vocab_size }),
            );
            let (docs, truth) = generate(&spec)?;
            save_corpus(&out, &docs)?;
            let mut w = BufWriter::new(File::create(&labels).map_err(crate::Error::from)?);
            write_labels(&mut w, &truth)?;
            w.flush().map_err(crate::Error::from)?;
            println!(
                "{}",
                json!({
                    "documents": docs.len(),
                    "planted": truth.iter().filter(|&&(_, l)| l == 1).count(),
                    "stable": truth.iter().filter(|&&(_, l)| l == 0).count(),
                    "corpus": out.display().to_string(),
                    "labels": labels.display().to_string(),
                    "config_hash": hash,
                })
            );
            Ok(())
        }
        Command::Train(args) => run_train(args, &overlay, &global),
        Command::Score(args) => run_score(args, &overlay),
        Command::Analyze(args) => run_analyze(args, &overlay),
        Command::Eval(args) => run_eval(args, &overlay, &global),
    }
}

fn run_train(args: TrainArgs, overlay: &Overlay, global: &Resolved) -> CliResult<()> {
    let min_freq = match args.min_freq {
        Some(v) => v,
        None => overlay.u64("min-freq")?.unwrap_or(20),
    };
    let dim = match args.dim {
        Some(v) => v,
        None => overlay.usize("dim")?.unwrap_or(100),
    };
    let window = match args.window {
        Some(v) => v,
        None => overlay.usize("window")?.unwrap_or(10),
    };
    let epochs = match args.epochs {
        Some(v) => v,
        None => overlay.usize("epochs")?.unwrap_or(1),
    };
    let lr = match args.lr {
        Some(v) => v,
        None => overlay.f64("lr")?.map(|v| v as f32).unwrap_or(0.025),
    };

    match args.model.as_str() {
        "geodist" => {
            let resolution = match args.resolution {
                Some(r) => r,
                None => overlay
                    .string("resolution")?
                    .ok_or_else(|| usage("--resolution is required with --model geodist"))?,
            };
            let negatives = match args.negatives {
                Some(v) => v,
                None => overlay.usize("negatives")?.unwrap_or(5),
            };
            let config = GeodistTrainConfig {
                dim,
                window,
                negatives,
                lr_initial: lr,
                epochs,
                seed: global.seed,
                workers: global.workers,
                ..GeodistTrainConfig::default()
            };
            let hash = log_run(
                "train",
                &json!({
                    "model": "geodist", "corpus": args.corpus.display().to_string(),
                    "resolution": resolution, "min_freq": min_freq, "dim": dim,
                    "window": window, "negatives": negatives, "epochs": epochs,
                    "lr": lr, "seed": global.seed, "workers": global.workers,
                }),
            );
            let (docs, vocab) = prepared_corpus(&args.corpus, min_freq)?;
            let map = load_map(args.region_map.as_deref())?;
            let (model, summary) =
                geodist::train(&docs, &vocab, &resolution, map.as_ref(), &config)?;
            model.save(&args.out)?;
            println!(
                "{}",
                json!({
                    "model": "geodist",
                    "vocab": vocab.len(),
                    "regions": model.regions,
                    "pairs": summary.pairs,
                    "skipped_docs": summary.skipped_docs,
                    "out": args.out.display().to_string(),
                    "config_hash": hash,
                })
            );
            Ok(())
        }
        "dialectgram" => {
            let alpha = match args.alpha {
                Some(v) => v,
                None => overlay.f64("alpha")?.unwrap_or(0.1),
            };
            let max_senses = match args.max_senses {
                Some(v) => v,
                None => overlay.usize("max-senses")?.unwrap_or(30),
            };
            let sense_threshold = match args.sense_threshold {
                Some(v) => v,
                None => overlay.f64("sense-threshold")?.unwrap_or(1e-17),
            };
            let config = AdaGramTrainConfig {
                dim,
                window,
                epochs,
                max_senses,
                alpha,
                sense_threshold,
                lr_initial: lr,
                seed: global.seed,
                workers: global.workers,
                ..AdaGramTrainConfig::default()
            };
            let hash = log_run(
                "train",
                &json!({
                    "model": "dialectgram", "corpus": args.corpus.display().to_string(),
                    "min_freq": min_freq, "dim": dim, "window": window,
                    "epochs": epochs, "alpha": alpha, "max_senses": max_senses,
                    "sense_threshold": sense_threshold, "lr": lr,
                    "seed": global.seed, "workers": global.workers,
                }),
            );
            let (docs, vocab) = prepared_corpus(&args.corpus, min_freq)?;
            let (model, summary) = crate::adagram::train_adagram(&docs, &vocab, &config)?;
            model.save(&args.out)?;
            println!(
                "{}",
                json!({
                    "model": "dialectgram",
                    "vocab": vocab.len(),
                    "centers": summary.centers,
                    "out": args.out.display().to_string(),
                    "config_hash": hash,
                })
            );
            Ok(())
        }
        other => Err(usage(format!(
            "unknown --model {other:?}: expected geodist or dialectgram"
        ))),
    }
}

fn run_score(args: ScoreArgs, overlay: &Overlay) -> CliResult<()> {
    let resolution = match args.resolution {
        Some(r) => r,
        None => overlay.string("resolution")?.unwrap_or_else(|| "country".to_string()),
    };
    let (r1, r2) = parse_pair(&args.pair)?;
    if args.model != "frequency" && args.model != "syntactic" {
        return Err(usage(format!(
            "unknown --model {:?}: expected frequency or syntactic",
            args.model
        )));
    }
    let hash = log_run(
        "score",
        &json!({
            "model": args.model, "corpus": args.corpus.display().to_string(),
            "resolution": resolution, "pair": [&r1, &r2],
        }),
    );
    let docs = load_corpus(&args.corpus)?;
    let map = load_map(args.region_map.as_deref())?;
    let table = UsageTable::build(&docs, &resolution, map.as_ref())?;
    for region in [&r1, &r2] {
        if table.region_total(region) == 0 {
            return Err(CliError::Runtime(format!("region {region:?} has no tokens")));
        }
    }
    if args.model == "syntactic" && !table.is_tagged() {
        return Err(crate::Error::MissingPosTags.into());
    }

    let words: Vec<String> = if args.words == "all" {
        table.words(&[&r1, &r2])
    } else {
        let file = File::open(&args.words)
            .map_err(|e| usage(format!("--words {}: {e}", args.words)))?;
        let mut words = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(crate::Error::from)?;
            let word = line.split('\t').next().unwrap_or("").trim().to_string();
            if !word.is_empty() {
                words.push(word);
            }
        }
        words
    };

    let mut out = BufWriter::new(File::create(&args.out).map_err(crate::Error::from)?);
    let mut scored = 0usize;
    for word in &words {
        let score = match args.model.as_str() {
            "frequency" => frequency_score(&table, word, &r1, &r2),
            _ => syntactic_score(&table, word, &r1, &r2),
        };
        match score {
            Ok(s) => {
                writeln!(out, "{word}\t{s:.6}").map_err(crate::Error::from)?;
                scored += 1;
            }
            Err(e) => log::warn!("score: skipping {word:?}: {e}"),
        }
    }
    out.flush().map_err(crate::Error::from)?;
    println!(
        "{}",
        json!({
            "model": args.model,
            "scored": scored,
            "out": args.out.display().to_string(),
            "config_hash": hash,
        })
    );
    Ok(())
}

fn run_analyze(args: AnalyzeArgs, overlay: &Overlay) -> CliResult<()> {
    let resolution = match args.resolution {
        Some(r) => r,
        None => overlay.string("resolution")?.unwrap_or_else(|| "country".to_string()),
    };
    let min_freq = match args.min_freq {
        Some(v) => v,
        None => overlay.u64("min-freq")?.unwrap_or(20),
    };
    let min_docs = match args.min_docs {
        Some(v) => v,
        None => overlay.u64("min-docs")?.unwrap_or(15),
    };
    let sense = match args.sense {
        Some(v) => v,
        None => overlay.usize("sense")?.unwrap_or(0),
    };
    let metric = parse_metric(args.metric.as_deref(), overlay)?;
    let hash = log_run(
        "analyze",
        &json!({
            "model": args.model.display().to_string(),
            "corpus": args.corpus.display().to_string(),
            "resolution": resolution, "min_freq": min_freq, "min_docs": min_docs,
        }),
    );

    let model = AdaGramModel::load(&args.model)?;
    let (docs, vocab) = prepared_corpus(&args.corpus, min_freq)?;
    check_vocab(model.vocab_size(), &vocab)?;
    let map = load_map(args.region_map.as_deref())?;
    let index = build_region_index(&docs, &vocab, &resolution, map.as_ref());

    let regions: Vec<String> = match &map {
        Some(m) => m.region_ids(),
        None => index.regions().iter().map(|r| r.to_string()).collect(),
    };

    let Some(word) = args.word else {
        if args.export_choropleth.is_some() {
            return Err(usage("--export-choropleth requires --word"));
        }
        let region_docs: serde_json::Map<String, serde_json::Value> = regions
            .iter()
            .map(|r| (r.clone(), json!(index.region_docs(r))))
            .collect();
        println!(
            "{}",
            json!({
                "resolution": resolution,
                "vocab": vocab.len(),
                "dim": model.d,
                "max_senses": model.max_senses,
                "regions": region_docs,
                "config_hash": hash,
            })
        );
        return Ok(());
    };

    let wid = vocab.require(&word)?;
    let mut senses = Vec::new();
    for s in model.active_senses(wid) {
        let mut entry = json!({
            "sense": s,
            "prior": crate::adagram::sense_prior(&model, wid)[s],
        });
        if let Some(k) = args.neighbors {
            let neighbors: Vec<serde_json::Value> = nearest_neighbors(&model, wid, s, k)?
                .into_iter()
                .map(|(w, ns, sim)| json!([vocab.token(w), ns, sim]))
                .collect();
            entry["neighbors"] = json!(neighbors);
        }
        senses.push(entry);
    }

    let mut region_usage = serde_json::Map::new();
    for region in &regions {
        let (_, usage) = crate::dialectgram::compose_region_embedding(
            &model, &index, wid, region, false,
        )?;
        let proportions = sense_proportions(&model, &index, wid, region, min_docs)?;
        region_usage.insert(
            region.clone(),
            json!({ "n": usage.n, "proportions": proportions }),
        );
    }

    let pair_score = match &args.pair {
        None => None,
        Some(pair) => {
            let (a, b) = parse_pair(pair)?;
            Some(dialectgram_score(&model, &index, wid, &a, &b, metric)?)
        }
    };

    if let Some(csv_path) = &args.export_choropleth {
        let map = map
            .as_ref()
            .ok_or_else(|| usage("--export-choropleth requires --region-map"))?;
        export_choropleth(&model, &index, map, wid, sense, min_docs, csv_path)?;
    }

    println!(
        "{}",
        json!({
            "word": word,
            "senses": senses,
            "regions": region_usage,
            "pair_score": pair_score,
            "config_hash": hash,
        })
    );
    Ok(())
}

fn export_choropleth(
    model: &AdaGramModel,
    index: &RegionIndex,
    map: &RegionMap,
    word: u32,
    sense: usize,
    min_docs: u64,
    csv_path: &Path,
) -> CliResult<()> {
    let rows = choropleth_rows(model, index, map, word, sense, min_docs)?;
    let csv_file = File::create(csv_path).map_err(crate::Error::from)?;
    write_choropleth_csv(BufWriter::new(csv_file), &rows)?;
    if map.has_geometry() {
        let geo_path = csv_path.with_extension("geojson");
        let geo_file = File::create(&geo_path).map_err(crate::Error::from)?;
        write_choropleth_geojson(BufWriter::new(geo_file), map, &rows)?;
        log::info!("choropleth geojson written to {}", geo_path.display());
    }
    Ok(())
}

struct FrequencyScorer<'a> {
    table: &'a UsageTable,
    r1: String,
    r2: String,
}

impl ChangeScorer for FrequencyScorer<'_> {
    fn name(&self) -> &str {
        "frequency"
    }
    fn score(&self, word: &str) -> Option<f64> {
        frequency_score(self.table, word, &self.r1, &self.r2).ok()
    }
}

struct SyntacticScorer<'a> {
    table: &'a UsageTable,
    r1: String,
    r2: String,
}

impl ChangeScorer for SyntacticScorer<'_> {
    fn name(&self) -> &str {
        "syntactic"
    }
    fn score(&self, word: &str) -> Option<f64> {
        syntactic_score(self.table, word, &self.r1, &self.r2).ok()
    }
}

struct GeodistScorer<'a> {
    model: &'a GeodistModel,
    vocab: &'a Vocabulary,
    r1: String,
    r2: String,
    metric: Metric,
}

impl ChangeScorer for GeodistScorer<'_> {
    fn name(&self) -> &str {
        "geodist"
    }
    fn score(&self, word: &str) -> Option<f64> {
        let id = self.vocab.id(word)?;
        geodist_score(self.model, id, &self.r1, &self.r2, self.metric).ok()
    }
}

struct DialectgramScorer<'a> {
    model: &'a AdaGramModel,
    index: &'a RegionIndex,
    vocab: &'a Vocabulary,
    r1: String,
    r2: String,
    metric: Metric,
}

impl ChangeScorer for DialectgramScorer<'_> {
    fn name(&self) -> &str {
        "dialectgram"
    }
    fn score(&self, word: &str) -> Option<f64> {
        let id = self.vocab.id(word)?;
        dialectgram_score(self.model, self.index, id, &self.r1, &self.r2, self.metric).ok()
    }
}

fn run_eval(args: EvalArgs, overlay: &Overlay, global: &Resolved) -> CliResult<()> {
    let resolution = match args.resolution {
        Some(r) => r,
        None => overlay.string("resolution")?.unwrap_or_else(|| "country".to_string()),
    };
    let min_freq = match args.min_freq {
        Some(v) => v,
        None => overlay.u64("min-freq")?.unwrap_or(20),
    };
    let metric = parse_metric(args.metric.as_deref(), overlay)?;
    let (r1, r2) = parse_pair(&args.pair)?;
    let model_type = args.model_type.as_str();
    let needs_file = matches!(model_type, "geodist" | "dialectgram");
    if !needs_file && !matches!(model_type, "frequency" | "syntactic") {
        return Err(usage(format!(
            "unknown --model-type {model_type:?}: expected frequency, syntactic, geodist, or dialectgram"
        )));
    }
    if needs_file && args.model_file.is_none() {
        return Err(usage(format!(
            "--model-file is required with --model-type {model_type}"
        )));
    }
    let hash = log_run(
        "eval",
        &json!({
            "model_type": model_type,
            "lexicon": args.lexicon.display().to_string(),
            "corpus": args.corpus.display().to_string(),
            "pair": [&r1, &r2], "resolution": resolution,
            "min_freq": min_freq, "seed": global.seed,
        }),
    );

    let lexicon = load_lexicon(&args.lexicon)?;
    let (train, test) = match lexicon.pinned() {
        Some(split) => {
            log::info!("eval: using the lexicon's pinned split");
            split
        }
        None => split_lexicon(&lexicon, 0.75, global.seed)?,
    };
    log::info!("eval: {} train / {} test entries", train.len(), test.len());

    let map = load_map(args.region_map.as_deref())?;
    let rows = match model_type {
        "frequency" | "syntactic" => {
            let docs = load_corpus(&args.corpus)?;
            let table = UsageTable::build(&docs, &resolution, map.as_ref())?;
            if model_type == "syntactic" && !table.is_tagged() {
                return Err(crate::Error::MissingPosTags.into());
            }
            let freq = FrequencyScorer { table: &table, r1: r1.clone(), r2: r2.clone() };
            let syn = SyntacticScorer { table: &table, r1: r1.clone(), r2: r2.clone() };
            let scorer: &dyn ChangeScorer =
                if model_type == "frequency" { &freq } else { &syn };
            run_benchmark(&[scorer], &train, &test)
        }
        "geodist" => {
            let model = GeodistModel::load(args.model_file.as_ref().unwrap())?;
            let (_, vocab) = prepared_corpus(&args.corpus, min_freq)?;
            check_vocab(model.vocab_size(), &vocab)?;
            let scorer = GeodistScorer {
                model: &model,
                vocab: &vocab,
                r1: r1.clone(),
                r2: r2.clone(),
                metric,
            };
            run_benchmark(&[&scorer], &train, &test)
        }
        _ => {
            let model = AdaGramModel::load(args.model_file.as_ref().unwrap())?;
            let (docs, vocab) = prepared_corpus(&args.corpus, min_freq)?;
            check_vocab(model.vocab_size(), &vocab)?;
            let index = build_region_index(&docs, &vocab, &resolution, map.as_ref());
            let scorer = DialectgramScorer {
                model: &model,
                index: &index,
                vocab: &vocab,
                r1: r1.clone(),
                r2: r2.clone(),
                metric,
            };
            run_benchmark(&[&scorer], &train, &test)
        }
    };

    let row = &rows[0];
    let metrics = match &row.outcome {
        Err(e) => return Err(CliError::Runtime(format!("{}: {e}", row.model))),
        Ok(m) => m,
    };
    let table_text = report_table(&rows);
    match &args.report {
        Some(path) => {
            std::fs::write(path, &table_text).map_err(crate::Error::from)?;
            log::info!("eval: report written to {}", path.display());
        }
        None => eprint!("{table_text}"),
    }
    println!(
        "{}",
        json!({
            "model": row.model,
            "accuracy": metrics.accuracy,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
            "tp": metrics.tp, "fp": metrics.fp, "tn": metrics.tn, "fn": metrics.fn_,
            "unscored_train": row.unscored_train,
            "unscored_test": row.unscored_test,
            "train_size": train.len(),
            "test_size": test.len(),
            "config_hash": hash,
        })
    );
    Ok(())
}
