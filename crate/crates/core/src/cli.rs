//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 for usage and input-validation problems
//! (bad flags, malformed ontologies, corpora, or model files), 1 for
//! runtime failures such as unreadable or unwritable paths.
//!
//! Every subcommand also accepts `--config FILE`, where the file holds
//! one `key=value` pair per line (`#` comments allowed) named after the
//! subcommand's long flags. The pairs are applied first and explicit
//! command-line flags override them.
//!
//! Commands that produce a primary output file also write a sibling
//! `<output>.config` listing the exact settings used, one sorted
//! `key=value` per line with no timestamps: reruns with equal inputs and
//! settings produce byte-identical outputs, and the echo file makes the
//! settings auditable.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cnf::{read_cnf, transform_record, write_cnf, CnfDocument, CnfError, CnfMode};
use crate::corpus::{dedup, read_corpus, split, write_corpus, CorpusError, Dataset};
use crate::embed::{train_embeddings, EmbedError, Embedding, EmbeddingConfig};
use crate::eval::{EvalError, PrCurve};
use crate::learn::{LearnError, TrainConfig};
use crate::ontology::{Ontology, OntologyError};
use crate::pipeline::{
    run_experiment_with, train_pipeline, ExperimentReport, PipelineConfig, PipelineError,
    PipelineKind, TrainedPipeline,
};
use crate::postag::{
    format_tagged, parse_tagged_corpus, tag, train_tagger, TagError, TaggerModel,
};
use crate::textnorm::normalize_tokenize;
use crate::vectorize::FeatureKind;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl AppError {
    fn usage(message: impl Into<String>) -> Self {
        AppError { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        AppError { code: 1, message: message.into() }
    }
}

impl From<OntologyError> for AppError {
    fn from(e: OntologyError) -> Self {
        match e {
            OntologyError::Io(_) => AppError::runtime(format!("ontology: {e}")),
            _ => AppError::usage(format!("ontology: {e}")),
        }
    }
}

impl From<CorpusError> for AppError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => AppError::runtime(format!("corpus: {e}")),
            _ => AppError::usage(format!("corpus: {e}")),
        }
    }
}

impl From<CnfError> for AppError {
    fn from(e: CnfError) -> Self {
        match e {
            CnfError::Io(_) => AppError::runtime(format!("transform: {e}")),
            _ => AppError::usage(format!("transform: {e}")),
        }
    }
}

impl From<TagError> for AppError {
    fn from(e: TagError) -> Self {
        match e {
            TagError::Io(_) => AppError::runtime(format!("tagger: {e}")),
            _ => AppError::usage(format!("tagger: {e}")),
        }
    }
}

impl From<EmbedError> for AppError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Io(_) => AppError::runtime(format!("embedding: {e}")),
            _ => AppError::usage(format!("embedding: {e}")),
        }
    }
}

impl From<LearnError> for AppError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Io(_) => AppError::runtime(format!("classifier: {e}")),
            _ => AppError::usage(format!("classifier: {e}")),
        }
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        AppError::usage(format!("evaluation: {e}"))
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ontology(inner) => inner.into(),
            PipelineError::Tag(inner) => inner.into(),
            PipelineError::Cnf(inner) => inner.into(),
            PipelineError::Corpus(inner) => inner.into(),
            PipelineError::Embed(inner) => inner.into(),
            PipelineError::Learn(inner) => inner.into(),
            PipelineError::Eval(inner) => inner.into(),
            PipelineError::Io(_) => AppError::runtime(format!("pipeline: {e}")),
            PipelineError::Serde(_) | PipelineError::FingerprintMismatch { .. } => {
                AppError::usage(format!("pipeline: {e}"))
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cnf-epi",
    version,
    about = "Concept-normal-form text pipeline for epidemic surveillance corpora",
    long_about = "Transforms short noisy messages into sequences of ontology \
        concepts, trains relevance classifiers over that representation, and \
        measures how well they carry across datasets.\n\n\
        Every subcommand also accepts --config FILE holding key=value lines \
        named after its long flags; explicit flags override the file.",
    args_override_self = true
)]
struct App {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate or summarize a concept ontology
    #[command(subcommand)]
    Ontology(OntologyCommand),
    /// Normalize and tokenize raw text, one message per line
    Tokenize(TokenizeArgs),
    /// Train or apply the part-of-speech tagger
    #[command(subcommand)]
    Tagger(TaggerCommand),
    /// Rewrite a corpus into concept normal form
    Transform(TransformArgs),
    /// Train or query document embeddings
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Train a relevance-classification pipeline
    Train(TrainArgs),
    /// Evaluate a trained pipeline across datasets
    Evaluate(EvaluateArgs),
    /// Inspect, deduplicate, or split corpora
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand)]
enum OntologyCommand {
    /// Check an ontology file and report its size
    Validate(OntologyValidateArgs),
    /// List concepts with parents and word counts
    Stats(OntologyStatsArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct OntologyValidateArgs {
    /// Ontology file in the native text format
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct OntologyStatsArgs {
    /// Ontology file; the built-in starter ontology when omitted
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TokenizeArgs {
    /// Text file, one message per line
    #[arg(long)]
    input: PathBuf,
    /// Write here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TaggerCommand {
    /// Train a tagger on a `word_TAG` corpus
    Train(TaggerTrainArgs),
    /// Tag raw text, one message per line
    Tag(TaggerTagArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TaggerTrainArgs {
    /// Training corpus: one sentence per line, tokens as `word_TAG`
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the model (JSON)
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 8)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TaggerTagArgs {
    /// Text file, one message per line
    #[arg(long)]
    input: PathBuf,
    /// Write here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Tagger model file; the built-in model when omitted
    #[arg(long)]
    tagger: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TransformArgs {
    /// Corpus in JSONL form
    #[arg(long)]
    input: PathBuf,
    /// Where to write the transformed corpus (JSONL)
    #[arg(long)]
    output: PathBuf,
    /// plain-oov or pos-padded
    #[arg(long, default_value = "plain-oov")]
    mode: CnfMode,
    /// Ontology file; the built-in starter ontology when omitted
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Tagger model file; the built-in model when omitted
    #[arg(long)]
    tagger: Option<PathBuf>,
    /// Worker threads for the rewrite
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Train document embeddings on a transformed corpus
    Train(EmbedTrainArgs),
    /// List the nearest symbols to a query symbol
    Similar(EmbedSimilarArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EmbedTrainArgs {
    /// Transformed corpus (JSONL of symbol documents)
    #[arg(long)]
    input: PathBuf,
    /// Where to write the embedding (JSON)
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 8)]
    negative: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    alpha_start: f64,
    #[arg(long, default_value_t = 0.0001)]
    alpha_end: f64,
    #[arg(long, default_value_t = 0.75)]
    noise_exponent: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EmbedSimilarArgs {
    /// Embedding file written by `embed train`
    #[arg(long)]
    model: PathBuf,
    /// Query symbol
    #[arg(long)]
    symbol: String,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Write here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    /// Labeled training corpus (JSONL)
    #[arg(long)]
    input: PathBuf,
    /// Where to write the trained pipeline (JSON)
    #[arg(long)]
    output: PathBuf,
    /// bow-sgd or doc2vec-logreg
    #[arg(long, default_value = "bow-sgd")]
    classifier: PipelineKind,
    /// plain-oov or pos-padded
    #[arg(long, default_value = "plain-oov")]
    mode: CnfMode,
    /// unigram or unibigram (bow-sgd only)
    #[arg(long, default_value = "unigram")]
    features: FeatureKind,
    /// Classifier passes over the training set
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha0: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Visit training examples in file order instead of shuffling
    #[arg(long)]
    no_shuffle: bool,
    /// Scale feature rows to unit length
    #[arg(long)]
    normalize_rows: bool,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 8)]
    negative: usize,
    /// Embedding passes over the training set (doc2vec-logreg only)
    #[arg(long, default_value_t = 20)]
    embed_epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    alpha_start: f64,
    #[arg(long, default_value_t = 0.0001)]
    alpha_end: f64,
    #[arg(long, default_value_t = 0.75)]
    noise_exponent: f64,
    /// Passes used to embed unseen documents at scoring time
    #[arg(long, default_value_t = 20)]
    infer_epochs: usize,
    /// Ontology file; the built-in starter ontology when omitted
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Tagger model file; the built-in model when omitted
    #[arg(long)]
    tagger: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvaluateArgs {
    /// Trained pipeline written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Labeled evaluation corpus (repeatable)
    #[arg(long, required = true)]
    eval: Vec<PathBuf>,
    /// Training corpus for cross-validation
    #[arg(long)]
    train: Option<PathBuf>,
    /// Cross-validation folds on the training corpus
    #[arg(long, requires = "train")]
    cv_folds: Option<usize>,
    /// Where to write the metrics report (TSV)
    #[arg(long)]
    report: PathBuf,
    /// Directory for per-dataset precision-recall curves
    #[arg(long)]
    curves_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Count records, labels, and positives
    Stats(CorpusStatsArgs),
    /// Drop retweets and duplicate messages
    Dedup(CorpusDedupArgs),
    /// Split into train and test parts
    Split(CorpusSplitArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CorpusStatsArgs {
    /// Corpus in JSONL form
    #[arg(long)]
    input: PathBuf,
    /// Write here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CorpusDedupArgs {
    /// Corpus in JSONL form
    #[arg(long)]
    input: PathBuf,
    /// Where to write the surviving records (JSONL)
    #[arg(long)]
    output: PathBuf,
    /// Where to write the removal log (TSV of id and reason)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CorpusSplitArgs {
    /// Corpus in JSONL form
    #[arg(long)]
    input: PathBuf,
    /// Where to write the training part (JSONL)
    #[arg(long)]
    train_output: PathBuf,
    /// Where to write the test part (JSONL)
    #[arg(long)]
    test_output: PathBuf,
    /// Fraction of records assigned to the training part
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    /// Preserve the positive fraction in both parts
    #[arg(long)]
    stratified: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Run the CLI; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match splice_config_args(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let app = match App::try_parse_from(&argv) {
        Ok(app) => app,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(app.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Pull `--config FILE` out of the raw arguments and splice the file's
/// `key=value` pairs in as flags, right after the subcommand tokens so
/// that explicit flags (which come later) override them.
fn splice_config_args(argv: Vec<OsString>) -> Result<Vec<OsString>, AppError> {
    let mut head: Vec<OsString> = Vec::new(); // program name + subcommand path
    let mut tail: Vec<OsString> = Vec::new(); // flags, minus --config
    let mut config_paths: Vec<PathBuf> = Vec::new();

    let mut iter = argv.into_iter();
    if let Some(program) = iter.next() {
        head.push(program);
    }
    let mut in_flags = false;
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        if !in_flags && !text.starts_with('-') {
            head.push(arg);
            continue;
        }
        in_flags = true;
        if text == "--config" {
            match iter.next() {
                Some(value) => config_paths.push(PathBuf::from(value)),
                None => return Err(AppError::usage("--config requires a file path")),
            }
        } else if let Some(path) = text.strip_prefix("--config=") {
            config_paths.push(PathBuf::from(path));
        } else {
            tail.push(arg);
        }
    }

    let mut spliced = head;
    for path in &config_paths {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::runtime(format!("cannot read config {}: {e}", path.display()))
        })?;
        spliced.extend(parse_config_file(&text, path)?);
    }
    spliced.extend(tail);
    Ok(spliced)
}

fn parse_config_file(text: &str, path: &Path) -> Result<Vec<OsString>, AppError> {
    let mut args = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            AppError::usage(format!(
                "{} line {}: expected key=value",
                path.display(),
                idx + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(AppError::usage(format!(
                "{} line {}: empty key",
                path.display(),
                idx + 1
            )));
        }
        match value {
            "true" => args.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                args.push(OsString::from(format!("--{key}")));
                args.push(OsString::from(value));
            }
        }
    }
    Ok(args)
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Ontology(OntologyCommand::Validate(args)) => ontology_validate(args),
        Command::Ontology(OntologyCommand::Stats(args)) => ontology_stats(args),
        Command::Tokenize(args) => tokenize(args),
        Command::Tagger(TaggerCommand::Train(args)) => tagger_train(args),
        Command::Tagger(TaggerCommand::Tag(args)) => tagger_tag(args),
        Command::Transform(args) => transform(args),
        Command::Embed(EmbedCommand::Train(args)) => embed_train(args),
        Command::Embed(EmbedCommand::Similar(args)) => embed_similar(args),
        Command::Train(args) => train_cmd(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Corpus(CorpusCommand::Stats(args)) => corpus_stats(args),
        Command::Corpus(CorpusCommand::Dedup(args)) => corpus_dedup(args),
        Command::Corpus(CorpusCommand::Split(args)) => corpus_split(args),
    }
}

// ---------------------------------------------------------------- helpers

fn open_reader(path: &Path) -> Result<BufReader<File>, AppError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::runtime(format!("cannot open {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path)
        .map_err(|e| AppError::runtime(format!("cannot read {}: {e}", path.display())))
}

/// Write through a temporary file in the destination directory so the
/// target is never observed half-written.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut file = tempfile::NamedTempFile::new_in(&parent)
        .map_err(|e| AppError::runtime(format!("cannot create file near {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| AppError::runtime(format!("cannot write {}: {e}", path.display())))?;
    file.persist(path)
        .map_err(|e| AppError::runtime(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), AppError> {
    match path {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Write `<output>.config`: the effective settings, sorted, no
/// timestamps.
fn echo_config(output: &Path, settings: &BTreeMap<String, String>) -> Result<(), AppError> {
    let mut text = String::new();
    for (key, value) in settings {
        let _ = writeln!(text, "{key}={value}");
    }
    let mut path = output.as_os_str().to_owned();
    path.push(".config");
    write_atomic(Path::new(&path), text.as_bytes())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

fn read_dataset(path: &Path) -> Result<Dataset, AppError> {
    let reader = open_reader(path)?;
    Ok(read_corpus(reader, &dataset_name(path))?)
}

fn load_ontology(path: Option<&Path>) -> Result<Ontology, AppError> {
    match path {
        Some(path) => Ok(Ontology::parse(&read_text(path)?)?),
        None => Ok(Ontology::starter().clone()),
    }
}

fn load_tagger(path: Option<&Path>) -> Result<TaggerModel, AppError> {
    match path {
        Some(path) => Ok(TaggerModel::load(path)?),
        None => Ok(TaggerModel::default_model().clone()),
    }
}

fn path_or_builtin(path: Option<&Path>) -> String {
    path.map(|p| p.display().to_string())
        .unwrap_or_else(|| "builtin".to_string())
}

fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

// ----------------------------------------------------------- subcommands

fn ontology_validate(args: OntologyValidateArgs) -> Result<(), AppError> {
    let ontology = load_ontology(Some(&args.input))?;
    println!(
        "ok: {} concepts, {} words",
        ontology.concept_count(),
        ontology.word_count()
    );
    Ok(())
}

fn ontology_stats(args: OntologyStatsArgs) -> Result<(), AppError> {
    let ontology = load_ontology(args.input.as_deref())?;
    let mut out = String::new();
    let _ = writeln!(out, "concept\tparent\twords");
    for concept in ontology.concepts() {
        let parent = concept
            .parent
            .map(|p| ontology.concept(p).name.clone())
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(out, "{}\t{}\t{}", concept.name, parent, concept.words.len());
    }
    let _ = writeln!(
        out,
        "# concepts={} words={}",
        ontology.concept_count(),
        ontology.word_count()
    );
    write_output(args.output.as_deref(), &out)
}

fn tokenize(args: TokenizeArgs) -> Result<(), AppError> {
    let text = read_text(&args.input)?;
    let mut out = String::new();
    for line in text.lines() {
        let tokens = normalize_tokenize(line);
        let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
        let _ = writeln!(out, "{}", surfaces.join(" "));
    }
    write_output(args.output.as_deref(), &out)
}

fn tagger_train(args: TaggerTrainArgs) -> Result<(), AppError> {
    let corpus = parse_tagged_corpus(&read_text(&args.corpus)?)?;
    let model = train_tagger(&corpus, args.epochs, args.seed)?;
    let json = model.to_json_string();
    write_atomic(&args.output, format!("{json}\n").as_bytes())?;
    let settings = BTreeMap::from([
        ("corpus".to_string(), args.corpus.display().to_string()),
        ("epochs".to_string(), args.epochs.to_string()),
        ("seed".to_string(), args.seed.to_string()),
    ]);
    echo_config(&args.output, &settings)
}

fn tagger_tag(args: TaggerTagArgs) -> Result<(), AppError> {
    let model = load_tagger(args.tagger.as_deref())?;
    let text = read_text(&args.input)?;
    let mut out = String::new();
    for line in text.lines() {
        let tokens = normalize_tokenize(line);
        let tags = tag(&tokens, &model);
        let _ = writeln!(out, "{}", format_tagged(&tokens, &tags));
    }
    write_output(args.output.as_deref(), &out)
}

fn transform(args: TransformArgs) -> Result<(), AppError> {
    if args.workers == 0 {
        return Err(AppError::usage("--workers must be at least 1"));
    }
    let ontology = load_ontology(args.ontology.as_deref())?;
    let tagger = load_tagger(args.tagger.as_deref())?;
    let dataset = read_dataset(&args.input)?;
    let docs = transform_parallel(&dataset, &ontology, &tagger, args.mode, args.workers);
    let mut bytes = Vec::new();
    write_cnf(&docs, &mut bytes)?;
    write_atomic(&args.output, &bytes)?;
    let settings = BTreeMap::from([
        ("input".to_string(), args.input.display().to_string()),
        ("mode".to_string(), args.mode.to_string()),
        ("ontology".to_string(), path_or_builtin(args.ontology.as_deref())),
        ("tagger".to_string(), path_or_builtin(args.tagger.as_deref())),
        ("workers".to_string(), args.workers.to_string()),
    ]);
    echo_config(&args.output, &settings)
}

/// Rewrite records on `workers` threads. Records are chunked in order
/// and chunks concatenated in order, so the output does not depend on
/// scheduling.
fn transform_parallel(
    dataset: &Dataset,
    ontology: &Ontology,
    tagger: &TaggerModel,
    mode: CnfMode,
    workers: usize,
) -> Vec<CnfDocument> {
    if workers <= 1 || dataset.records.len() < 2 {
        return dataset
            .records
            .iter()
            .map(|r| transform_record(r, ontology, tagger, mode))
            .collect();
    }
    let chunk_size = dataset.records.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = dataset
            .records
            .chunks(chunk_size)
            .map(|records| {
                scope.spawn(move || {
                    records
                        .iter()
                        .map(|r| transform_record(r, ontology, tagger, mode))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("transform worker panicked"))
            .collect()
    })
}

fn embed_train(args: EmbedTrainArgs) -> Result<(), AppError> {
    let docs = read_cnf(open_reader(&args.input)?)?;
    let config = EmbeddingConfig {
        dim: args.dim,
        window: args.window,
        negative: args.negative,
        epochs: args.epochs,
        alpha_start: args.alpha_start,
        alpha_end: args.alpha_end,
        seed: args.seed,
        noise_exponent: args.noise_exponent,
    };
    let embedding = train_embeddings(&docs, &config)?;
    let json = embedding.to_json_string()?;
    write_atomic(&args.output, format!("{json}\n").as_bytes())?;
    let settings = BTreeMap::from([
        ("alpha-end".to_string(), args.alpha_end.to_string()),
        ("alpha-start".to_string(), args.alpha_start.to_string()),
        ("dim".to_string(), args.dim.to_string()),
        ("epochs".to_string(), args.epochs.to_string()),
        ("input".to_string(), args.input.display().to_string()),
        ("negative".to_string(), args.negative.to_string()),
        ("noise-exponent".to_string(), args.noise_exponent.to_string()),
        ("seed".to_string(), args.seed.to_string()),
        ("window".to_string(), args.window.to_string()),
    ]);
    echo_config(&args.output, &settings)
}

fn embed_similar(args: EmbedSimilarArgs) -> Result<(), AppError> {
    let embedding = Embedding::load(&args.model)?;
    let similar = embedding.most_similar(&args.symbol, args.top_k)?;
    let mut out = String::new();
    for (symbol, score) in similar {
        let _ = writeln!(out, "{symbol}\t{score:.6}");
    }
    write_output(args.output.as_deref(), &out)
}

fn train_cmd(args: TrainArgs) -> Result<(), AppError> {
    let ontology = load_ontology(args.ontology.as_deref())?;
    let tagger = load_tagger(args.tagger.as_deref())?;
    let dataset = read_dataset(&args.input)?;
    let config = PipelineConfig {
        kind: args.classifier,
        mode: args.mode,
        features: args.features,
        train: TrainConfig {
            epochs: args.epochs,
            alpha0: args.alpha0,
            l2: args.l2,
            seed: args.seed,
            shuffle: !args.no_shuffle,
            row_l2_normalize: args.normalize_rows,
        },
        embedding: EmbeddingConfig {
            dim: args.dim,
            window: args.window,
            negative: args.negative,
            epochs: args.embed_epochs,
            alpha_start: args.alpha_start,
            alpha_end: args.alpha_end,
            seed: args.seed,
            noise_exponent: args.noise_exponent,
        },
        infer_epochs: args.infer_epochs,
    };
    let pipeline = train_pipeline(&dataset, &ontology, &tagger, &config)?;
    let json = pipeline.to_json_string()?;
    write_atomic(&args.output, format!("{json}\n").as_bytes())?;
    let settings = BTreeMap::from([
        ("alpha-end".to_string(), args.alpha_end.to_string()),
        ("alpha-start".to_string(), args.alpha_start.to_string()),
        ("alpha0".to_string(), args.alpha0.to_string()),
        ("classifier".to_string(), args.classifier.to_string()),
        ("dim".to_string(), args.dim.to_string()),
        ("embed-epochs".to_string(), args.embed_epochs.to_string()),
        ("epochs".to_string(), args.epochs.to_string()),
        ("features".to_string(), args.features.to_string()),
        ("infer-epochs".to_string(), args.infer_epochs.to_string()),
        ("input".to_string(), args.input.display().to_string()),
        ("l2".to_string(), args.l2.to_string()),
        ("mode".to_string(), args.mode.to_string()),
        ("negative".to_string(), args.negative.to_string()),
        ("no-shuffle".to_string(), args.no_shuffle.to_string()),
        ("noise-exponent".to_string(), args.noise_exponent.to_string()),
        ("normalize-rows".to_string(), args.normalize_rows.to_string()),
        ("ontology".to_string(), path_or_builtin(args.ontology.as_deref())),
        ("seed".to_string(), args.seed.to_string()),
        ("tagger".to_string(), path_or_builtin(args.tagger.as_deref())),
        ("window".to_string(), args.window.to_string()),
    ]);
    echo_config(&args.output, &settings)
}

fn evaluate(args: EvaluateArgs) -> Result<(), AppError> {
    let pipeline = TrainedPipeline::load(&args.model)?;
    let eval_sets: Vec<Dataset> = args
        .eval
        .iter()
        .map(|p| read_dataset(p))
        .collect::<Result<_, _>>()?;
    let train_set = args.train.as_deref().map(read_dataset).transpose()?;
    let cv = train_set
        .as_ref()
        .map(|ds| (ds, args.cv_folds.unwrap_or(10)));
    let report = run_experiment_with(&pipeline, &eval_sets, cv)?;

    write_atomic(&args.report, render_report(&report).as_bytes())?;
    if let Some(dir) = &args.curves_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        for named in &report.curves {
            let path = dir.join(format!("{}.pr.tsv", sanitize_name(&named.dataset)));
            write_atomic(&path, render_curve(&named.curve).as_bytes())?;
        }
    }
    let settings = BTreeMap::from([
        ("cv-folds".to_string(), match &cv {
            Some((_, k)) => k.to_string(),
            None => "none".to_string(),
        }),
        (
            "eval".to_string(),
            args.eval
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("model".to_string(), args.model.display().to_string()),
        ("train".to_string(), path_or_builtin(args.train.as_deref()).replace("builtin", "none")),
    ]);
    echo_config(&args.report, &settings)
}

/// Render the metrics report as TSV with a settings header.
fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let features = report
        .features
        .map(|f| f.to_string())
        .unwrap_or_else(|| "-".to_string());
    let (cv_kind, folds) = match &report.cv {
        Some(cv) => ("pooled-k-fold", cv.folds.to_string()),
        None => ("none", "-".to_string()),
    };
    let _ = writeln!(
        out,
        "# classifier={} mode={} features={} cv={} folds={}",
        report.classifier, report.mode, features, cv_kind, folds
    );
    let _ = writeln!(out, "section\tmetric\tdataset\tvalue");
    if let Some(cv) = &report.cv {
        let m = &cv.metrics;
        let _ = writeln!(out, "cv\tprecision\ttrain\t{:.4}", m.precision);
        let _ = writeln!(out, "cv\trecall\ttrain\t{:.4}", m.recall);
        let _ = writeln!(out, "cv\tf1\ttrain\t{:.4}", m.f1);
    }
    for entry in &report.generalization.per_dataset {
        let m = &entry.metrics;
        let _ = writeln!(out, "eval\tprecision\t{}\t{:.4}", entry.name, m.precision);
        let _ = writeln!(out, "eval\trecall\t{}\t{:.4}", entry.name, m.recall);
        let _ = writeln!(out, "eval\tf1\t{}\t{:.4}", entry.name, m.f1);
    }
    let mean = &report.generalization.mean;
    let _ = writeln!(out, "mean\tprecision\tall\t{:.4}", mean.precision);
    let _ = writeln!(out, "mean\trecall\tall\t{:.4}", mean.recall);
    let _ = writeln!(out, "mean\tf1\tall\t{:.4}", mean.f1);
    match &report.generalization.variance {
        Some(var) => {
            let _ = writeln!(out, "variance\tprecision\tall\t{:.4}", var.precision);
            let _ = writeln!(out, "variance\trecall\tall\t{:.4}", var.recall);
            let _ = writeln!(out, "variance\tf1\tall\t{:.4}", var.f1);
        }
        None => {
            let _ = writeln!(out, "variance\tprecision\tall\t");
            let _ = writeln!(out, "variance\trecall\tall\t");
            let _ = writeln!(out, "variance\tf1\tall\t");
        }
    }
    out
}

/// Render one precision-recall curve as TSV with an area footer.
fn render_curve(curve: &PrCurve) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "recall\tprecision");
    for point in &curve.points {
        let _ = writeln!(out, "{:.6}\t{:.6}", point.recall, point.precision);
    }
    let _ = writeln!(out, "auc={:.6}", curve.auc);
    out
}

fn corpus_stats(args: CorpusStatsArgs) -> Result<(), AppError> {
    let dataset = read_dataset(&args.input)?;
    let stats = dataset.stats();
    let tags: std::collections::BTreeSet<&str> = dataset
        .records
        .iter()
        .filter_map(|r| r.dataset.as_deref())
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "records\t{}", stats.records);
    let _ = writeln!(out, "labeled\t{}", stats.labeled);
    let _ = writeln!(out, "positives\t{}", stats.positives);
    let _ = writeln!(
        out,
        "positive_fraction\t{}",
        stats
            .positive_fraction
            .map(|f| format!("{f:.4}"))
            .unwrap_or_else(|| "-".to_string())
    );
    let _ = writeln!(out, "dataset_tags\t{}", tags.len());
    write_output(args.output.as_deref(), &out)
}

fn corpus_dedup(args: CorpusDedupArgs) -> Result<(), AppError> {
    let dataset = read_dataset(&args.input)?;
    let (kept, log) = dedup(&dataset);
    let mut bytes = Vec::new();
    write_corpus(&kept, &mut bytes)?;
    write_atomic(&args.output, &bytes)?;
    if let Some(log_path) = &args.log {
        let mut out = String::new();
        for entry in &log {
            let _ = writeln!(out, "{}\t{}", entry.id, entry.reason);
        }
        write_atomic(log_path, out.as_bytes())?;
    }
    eprintln!(
        "kept {} of {} records ({} removed)",
        kept.len(),
        dataset.len(),
        log.len()
    );
    Ok(())
}

fn corpus_split(args: CorpusSplitArgs) -> Result<(), AppError> {
    let dataset = read_dataset(&args.input)?;
    let (train_part, test_part) = split(&dataset, args.fraction, args.seed, args.stratified)?;
    let mut bytes = Vec::new();
    write_corpus(&train_part, &mut bytes)?;
    write_atomic(&args.train_output, &bytes)?;
    let mut bytes = Vec::new();
    write_corpus(&test_part, &mut bytes)?;
    write_atomic(&args.test_output, &bytes)?;
    eprintln!(
        "split {} records into {} train and {} test",
        dataset.len(),
        train_part.len(),
        test_part.len()
    );
    Ok(())
}
