use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use jmt_core::data::{read_pair_file, read_token_file, write_pairs, write_tokens};
use jmt_core::eval::{evaluate_pairs, evaluate_sentences};
use jmt_core::skipgram::{pretrain_skipgram, tokenize_corpus, SkipGramConfig, SkipGramMode};
use jmt_core::trainer::{train, TaskOrder};
use jmt_core::{
    load_model, save_model, Corpus, Error, JointModel, Labels, Metric, Task, TaskSet, TokenVectors, Vocabulary,
};

use crate::settings::{DataPaths, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: missing files, tasks without data and the like.
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(jmt_core::DataError::Format(e.to_string()).into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "jmt", version, about = "Joint many-task model for tagging, parsing and sentence-pair tasks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train skip-gram word or character n-gram embeddings on plain text.
    PretrainEmbeddings(PretrainArgs),
    /// Train a model and write it as an archive.
    Train(Box<TrainArgs>),
    /// Score a model, or a predictions file, against gold data.
    Eval(EvalArgs),
    /// Tag a token file with POS and chunk labels.
    Tag(PredictArgs),
    /// Tag and parse a token file.
    Parse(PredictArgs),
    /// Predict relatedness scores and entailment labels for a pair file.
    Pair(PredictArgs),
    /// Write the bundled synthetic corpus.
    SynthData(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbeddingMode {
    Word,
    Char,
}

#[derive(Debug, Args)]
struct PretrainArgs {
    /// Plain text, one whitespace-tokenized sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "word")]
    mode: EmbeddingMode,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value_t = 15)]
    negatives: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Subsampling coefficient; 0 keeps every token.
    #[arg(long, default_value_t = 1e-5)]
    subsample: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_pos: Option<PathBuf>,
    #[arg(long)]
    train_chunk: Option<PathBuf>,
    #[arg(long)]
    train_dep: Option<PathBuf>,
    #[arg(long)]
    train_pairs: Option<PathBuf>,
    #[arg(long)]
    dev_pos: Option<PathBuf>,
    #[arg(long)]
    dev_chunk: Option<PathBuf>,
    #[arg(long)]
    dev_dep: Option<PathBuf>,
    #[arg(long)]
    dev_pairs: Option<PathBuf>,
    /// Pre-trained word vectors in the text embedding format.
    #[arg(long)]
    word_emb: Option<PathBuf>,
    /// Pre-trained character n-gram vectors.
    #[arg(long)]
    char_emb: Option<PathBuf>,
    /// Active tasks: `all`, letters such as `abc` or `de`, or names.
    #[arg(long)]
    tasks: Option<TaskSet>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sets every layer width at once.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    no_shortcut: bool,
    #[arg(long)]
    no_label_embeddings: bool,
    #[arg(long)]
    no_vertical: bool,
    #[arg(long)]
    task_order: Option<TaskOrder>,
    /// Dev metric for model selection.
    #[arg(long)]
    select: Option<Metric>,
    /// Output archive.
    #[arg(long)]
    model: PathBuf,
    /// Also write the training log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    task: Task,
    /// Gold token or pair file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    model: Option<PathBuf>,
    /// Predicted annotations in the same format as the gold file.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::PretrainEmbeddings(a) => pretrain(a),
        Command::Train(a) => train_command(*a),
        Command::Eval(a) => eval(a),
        Command::Tag(a) => tag(a, false),
        Command::Parse(a) => tag(a, true),
        Command::Pair(a) => pair(a),
        Command::SynthData(a) => synth(a),
    }
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

fn stdout() -> BufWriter<io::StdoutLock<'static>> {
    BufWriter::new(io::stdout().lock())
}

fn pretrain(a: PretrainArgs) -> CliResult {
    require_file(&a.corpus)?;
    let text = std::fs::read_to_string(&a.corpus)?;
    let corpus = tokenize_corpus(&text);
    let config = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        subsample: (a.subsample > 0.0).then_some(a.subsample),
        epochs: a.epochs,
        lr: a.lr,
        mode: match a.mode {
            EmbeddingMode::Word => SkipGramMode::Word,
            EmbeddingMode::Char => SkipGramMode::CharNgram,
        },
        seed: a.seed,
        ..SkipGramConfig::default()
    };
    let vectors = pretrain_skipgram(&corpus, config)?;
    vectors.save(&a.output)?;
    info!("wrote {} vectors of width {} to {}", vectors.tokens.len(), vectors.dim, a.output.display());
    Ok(())
}

fn settings(a: &TrainArgs) -> CliResult<Settings> {
    let mut s = match &a.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let flags = DataPaths {
        train_pos: a.train_pos.clone(),
        train_chunk: a.train_chunk.clone(),
        train_dep: a.train_dep.clone(),
        train_pairs: a.train_pairs.clone(),
        dev_pos: a.dev_pos.clone(),
        dev_chunk: a.dev_chunk.clone(),
        dev_dep: a.dev_dep.clone(),
        dev_pairs: a.dev_pairs.clone(),
        word_emb: a.word_emb.clone(),
        char_emb: a.char_emb.clone(),
    };
    s.data.overlay(&flags);
    if let Some(dim) = a.dim {
        let mut m = jmt_core::ModelConfig::with_width(dim);
        m.ngram_sizes = s.model.ngram_sizes.clone();
        m.lowercase_words = s.model.lowercase_words;
        m.wiring = s.model.wiring;
        m.dropout = s.model.dropout.clone();
        m.word_dropout_alpha = s.model.word_dropout_alpha;
        m.seed = s.model.seed;
        s.model = m;
    }
    if let Some(tasks) = a.tasks {
        s.model.wiring.tasks = tasks;
    }
    if a.no_shortcut {
        s.model.wiring.use_shortcut = false;
    }
    if a.no_label_embeddings {
        s.model.wiring.use_label_embeddings = false;
    }
    if a.no_vertical {
        s.model.wiring.use_vertical = false;
    }
    if let Some(seed) = a.seed {
        s.model.seed = seed;
        s.train.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        s.train.epochs = epochs;
    }
    if let Some(order) = a.task_order {
        s.train.order = order;
    }
    if a.select.is_some() {
        s.train.select = a.select;
    }
    s.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    s.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(s)
}

fn task_path(d: &DataPaths, task: Task, dev: bool) -> Option<&PathBuf> {
    match (task, dev) {
        (Task::Pos, false) => d.train_pos.as_ref(),
        (Task::Chunk, false) => d.train_chunk.as_ref(),
        (Task::Dep, false) => d.train_dep.as_ref(),
        (Task::Rel | Task::Ent, false) => d.train_pairs.as_ref(),
        (Task::Pos, true) => d.dev_pos.as_ref(),
        (Task::Chunk, true) => d.dev_chunk.as_ref(),
        (Task::Dep, true) => d.dev_dep.as_ref(),
        (Task::Rel | Task::Ent, true) => d.dev_pairs.as_ref(),
    }
}

/// Reads the files of the active tasks. Training files are required.
fn load_corpus(d: &DataPaths, tasks: TaskSet, dev: bool) -> CliResult<Corpus> {
    let mut c = Corpus::default();
    for task in tasks.tasks() {
        let Some(path) = task_path(d, task, dev) else {
            if dev {
                continue;
            }
            let flag = if task.is_token_level() { task.name() } else { "pairs" };
            return Err(CliError::Usage(format!("task {task} is active but --train-{flag} is not given")));
        };
        require_file(path)?;
        match task {
            Task::Pos => c.pos = read_token_file(path)?,
            Task::Chunk => c.chunk = read_token_file(path)?,
            Task::Dep => c.dep = read_token_file(path)?,
            Task::Rel | Task::Ent if c.pairs.is_empty() => c.pairs = read_pair_file(path)?,
            _ => {}
        }
    }
    Ok(c)
}

fn train_command(a: TrainArgs) -> CliResult {
    let s = settings(&a)?;
    let tasks = s.model.wiring.tasks;
    for p in [&s.data.word_emb, &s.data.char_emb].into_iter().flatten() {
        require_file(p)?;
    }
    let shared = s.data.train_chunk.is_some() && s.data.train_chunk == s.data.train_dep;
    if tasks.contains(Task::Chunk) && tasks.contains(Task::Dep) && shared {
        warn!("chunking and dependency training share one file; evaluation on either may be optimistic");
    }
    let corpus = load_corpus(&s.data, tasks, false)?;
    let dev = load_corpus(&s.data, tasks, true)?;
    let has_dev = !(dev.pos.is_empty() && dev.chunk.is_empty() && dev.dep.is_empty() && dev.pairs.is_empty());

    let vocab = Vocabulary::build(corpus.forms(), &s.model.ngram_sizes, s.model.lowercase_words);
    let labels = Labels::from_data(&corpus.pos, &corpus.chunk, &corpus.dep);
    let mut model = JointModel::new(s.model.clone(), vocab, labels)?;
    let words = s.data.word_emb.as_ref().map(TokenVectors::load).transpose()?;
    let chars = s.data.char_emb.as_ref().map(TokenVectors::load).transpose()?;
    if words.is_some() || chars.is_some() {
        let (w, c) = model.load_pretrained(words.as_ref(), chars.as_ref())?;
        info!("initialized {w} word and {c} n-gram rows from pre-trained vectors");
    }

    let report = train(&mut model, s.train.clone(), &corpus, has_dev.then_some(&dev))?;
    let mut out = stdout();
    let mut log_file = a.log.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    for r in &report.log {
        writeln!(out, "{r}")?;
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{r}")?;
        }
    }
    for (i, m) in report.dev.iter().enumerate() {
        for line in m.to_string().lines() {
            writeln!(out, "epoch={} dev_{line}", i + 1)?;
        }
    }
    if let Some((epoch, score)) = report.best {
        writeln!(out, "best_epoch={epoch} best_score={score:?}")?;
    }
    out.flush()?;
    if let Some(f) = log_file.as_mut() {
        f.flush()?;
    }
    save_model(&model, &a.model)?;
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    require_file(&a.data)?;
    let task = a.task;
    let report = if task.is_token_level() {
        let gold = read_token_file(&a.data)?;
        let pred = match (&a.model, &a.predictions) {
            (_, Some(p)) => {
                require_file(p)?;
                read_token_file(p)?
            }
            (Some(m), None) => {
                let model = open_model(m, &[task])?;
                gold.iter().map(|s| model.annotate(s)).collect::<Result<Vec<_>, _>>()?
            }
            (None, None) => unreachable!("clap requires one of --model and --predictions"),
        };
        evaluate_sentences(task, &gold, &pred)?
    } else {
        let gold = read_pair_file(&a.data)?;
        let pred = match (&a.model, &a.predictions) {
            (_, Some(p)) => {
                require_file(p)?;
                read_pair_file(p)?
            }
            (Some(m), None) => {
                let model = open_model(m, &[task])?;
                gold.iter().map(|p| model.annotate_pair(p)).collect::<Result<Vec<_>, _>>()?
            }
            (None, None) => unreachable!("clap requires one of --model and --predictions"),
        };
        evaluate_pairs(task, &gold, &pred)?
    };
    let mut out = stdout();
    write!(out, "{report}")?;
    out.flush()?;
    Ok(())
}

/// Loads an archive and checks that at least one of `needed` is active.
fn open_model(path: &Path, needed: &[Task]) -> CliResult<JointModel> {
    require_file(path)?;
    let model = load_model(path)?;
    if !needed.iter().any(|t| model.tasks().contains(*t)) {
        let names: Vec<&str> = needed.iter().map(|t| t.name()).collect();
        return Err(CliError::Usage(format!(
            "model was trained for tasks `{}`, which excludes {}",
            model.tasks().code(),
            names.join("/")
        )));
    }
    Ok(model)
}

fn tag(a: PredictArgs, parse: bool) -> CliResult {
    require_file(&a.input)?;
    let needed: &[Task] = if parse { &[Task::Dep] } else { &[Task::Pos, Task::Chunk] };
    let model = open_model(&a.model, needed)?;
    let sentences = read_token_file(&a.input)?;
    let mut out_sentences = Vec::with_capacity(sentences.len());
    for s in &sentences {
        let mut out = model.annotate(s)?;
        if !parse {
            for (o, i) in out.tokens.iter_mut().zip(&s.tokens) {
                o.head = i.head;
                o.deprel.clone_from(&i.deprel);
            }
        }
        out_sentences.push(out);
    }
    let mut out = stdout();
    write_tokens(&mut out, &out_sentences)?;
    out.flush()?;
    Ok(())
}

fn pair(a: PredictArgs) -> CliResult {
    require_file(&a.input)?;
    let model = open_model(&a.model, &[Task::Rel, Task::Ent])?;
    let pairs = read_pair_file(&a.input)?;
    let annotated = pairs.iter().map(|p| model.annotate_pair(p)).collect::<Result<Vec<_>, _>>()?;
    let mut out = stdout();
    write_pairs(&mut out, &annotated)?;
    out.flush()?;
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    std::fs::create_dir_all(&a.out_dir)?;
    let c = jmt_core::synthetic::corpus(a.seed);
    let mut w = BufWriter::new(File::create(a.out_dir.join("train.tsv"))?);
    write_tokens(&mut w, &c.dep)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(a.out_dir.join("pairs.tsv"))?);
    write_pairs(&mut w, &c.pairs)?;
    w.flush()?;
    Ok(())
}
