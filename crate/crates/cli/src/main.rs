use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use codelm::bpe::{
    learn_merges, read_segmented_corpus, segment_corpus, write_segmented_corpus, MergeTable, SubwordSequence, Vocab,
    Segmenter,
};
use codelm::corpus::{
    load_corpus, project_ids, split_corpus, write_pretokenized, CorpusSplit, Lexer, SplitFractions, Token, TokenKind,
    TokenStream,
};
use codelm::dataset::{partition, Partitioned};
use codelm::decoder::{predict_top_k, SearchLimits};
use codelm::evaluation::{run_dynamic, run_maintenance, run_static, AdaptationPolicy, EvalReport, MrrConfig};
use codelm::model::{load_checkpoint, save_checkpoint, GruModel, ModelConfig};
use codelm::ngram::{run_ngram, NgramConfig, NgramModel};
use codelm::synth::{generate, write_corpus, SynthConfig};
use codelm::text::escape_field;
use codelm::trainer::{train, TrainSchedule};

#[derive(Parser)]
#[command(name = "codelm", version, about = "Open-vocabulary subword language models for source code")]
struct Cli {
    /// Worker threads for per-file and per-project work.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,

    /// Seed for every random choice (split, initialization, shuffling, dropout).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lex `<project>/<file>` sources into a pre-tokenized corpus.
    Lex(LexArgs),
    /// Assign whole projects to train, validation, test and encoding roles.
    Split(SplitArgs),
    /// Learn a BPE merge table.
    LearnBpe(LearnBpeArgs),
    /// Segment a corpus into a segmented-corpus file.
    Segment(SegmentArgs),
    /// Turn a segmented-corpus file back into a pre-tokenized corpus.
    Join(JoinArgs),
    /// Train a GRU language model and write the best checkpoint.
    Train(TrainArgs),
    /// Score the test projects with a fixed model.
    EvalStatic(EvalArgs),
    /// Score each test file, then adapt on it before the next file of its project.
    EvalDynamic(AdaptEvalArgs),
    /// Adapt on the rest of a project, then score the held-out files.
    EvalMaintenance(AdaptEvalArgs),
    /// Read a token history on stdin and print the top-k next tokens.
    Complete(CompleteArgs),
    /// Train and evaluate the n-gram baseline.
    Ngram(NgramArgs),
    /// Write a synthetic C-like corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct LexArgs {
    /// Directory of `<project>/<file>` sources.
    #[arg(long)]
    input: PathBuf,
    /// Directory for `<project>/<file>.tokens`.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "c-like")]
    lexer: Lexer,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pretokenized")]
    lexer: Lexer,
    #[arg(long, default_value_t = SplitFractions::default().validation)]
    validation: f64,
    #[arg(long, default_value_t = SplitFractions::default().test)]
    test: f64,
    #[arg(long, default_value_t = SplitFractions::default().encoding)]
    encoding: f64,
    /// Split file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct LearnBpeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pretokenized")]
    lexer: Lexer,
    /// Merge operations to learn.
    #[arg(long, default_value_t = 5000)]
    ops: usize,
    /// Learn only from the projects with `--role` in this split file.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "encoding", requires = "split")]
    role: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    merges: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pretokenized")]
    lexer: Lexer,
    /// Segmented-corpus file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct JoinArgs {
    /// Segmented-corpus file.
    #[arg(long)]
    input: PathBuf,
    /// Directory for `<project>/<file>.tokens`.
    #[arg(long)]
    output: PathBuf,
}

/// Merge table, segmented corpus and split shared by training and evaluation.
#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    merges: PathBuf,
    /// Segmented-corpus file.
    #[arg(long)]
    segmented: PathBuf,
    #[arg(long)]
    split: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint to write.
    #[arg(long)]
    output: PathBuf,
    /// Training log to write; defaults to the checkpoint path with `.log` appended.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = ModelConfig::new(1).embed_dim)]
    embed_dim: usize,
    #[arg(long, default_value_t = ModelConfig::new(1).hidden_dim)]
    hidden_dim: usize,
    /// Probability of dropping an activation.
    #[arg(long, default_value_t = 1.0 - ModelConfig::new(1).dropout_keep)]
    dropout: f32,
    /// Truncated backpropagation length, in units.
    #[arg(long, default_value_t = ModelConfig::new(1).unroll)]
    unroll: usize,
    #[arg(long, default_value_t = TrainSchedule::default().initial_lr)]
    lr: f64,
    #[arg(long, default_value_t = TrainSchedule::default().max_epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainSchedule::default().max_halvings)]
    halvings: usize,
    #[arg(long, default_value_t = TrainSchedule::default().batch_size)]
    batch: usize,
    /// Gradient norm clip.
    #[arg(long, default_value_t = 5.0, conflicts_with = "no_clip")]
    clip: f64,
    #[arg(long)]
    no_clip: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    report: ReportArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Also measure mean reciprocal rank of the top-k completions.
    #[arg(long)]
    mrr: bool,
    /// Query only the first N token positions, in corpus order.
    #[arg(long)]
    max_positions: Option<usize>,
    /// Corpus id in the report; defaults to the corpus file or directory name.
    #[arg(long)]
    corpus_id: Option<String>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    /// `tokens=5000,total=0.8,iters=7,cap=10`, any subset; `none` disables a limit or all of them.
    #[arg(long, default_value = "tokens=5000,total=0.8,iters=7,cap=10")]
    limits: SearchLimits,
}

#[derive(Args)]
struct AdaptEvalArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Adaptation learning rate; defaults to the rate training ended with.
    #[arg(long)]
    adapt_lr: Option<f64>,
    #[arg(long, default_value_t = 20)]
    adapt_unroll: usize,
    /// SGD steps per window.
    #[arg(long, default_value_t = 1)]
    adapt_steps: usize,
    #[arg(long, default_value_t = 5.0)]
    adapt_clip: f64,
    /// Keep training-time dropout on while adapting.
    #[arg(long)]
    adapt_dropout: bool,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    merges: PathBuf,
    /// How stdin is tokenized.
    #[arg(long, default_value = "c-like")]
    lexer: Lexer,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct NgramArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pretokenized")]
    lexer: Lexer,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value_t = NgramConfig::default().order)]
    order: usize,
    /// Tokens seen fewer times than this in training share the unknown-token id.
    #[arg(long, default_value_t = NgramConfig::default().cutoff)]
    cutoff: usize,
    /// Weight of the longer context at each interpolation level.
    #[arg(long, default_value_t = NgramConfig::default().lambda)]
    lambda: f64,
    /// Additive smoothing of the unigram level.
    #[arg(long, default_value_t = NgramConfig::default().delta)]
    delta: f64,
    /// Mix in a decaying unigram cache of the current file.
    #[arg(long)]
    cache: bool,
    #[arg(long, default_value_t = NgramConfig::default().cache_lambda)]
    cache_lambda: f64,
    #[arg(long, default_value_t = NgramConfig::default().cache_decay)]
    cache_decay: f64,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4)]
    projects: usize,
    #[arg(long, default_value_t = 5)]
    files: usize,
    /// Approximate size of each file.
    #[arg(long, default_value_t = 2000)]
    bytes: usize,
    /// Every project uses the same identifiers.
    #[arg(long)]
    shared_vocabulary: bool,
}

/// A request that cannot be carried out as given.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<codelm::Error>() {
            return match e {
                codelm::Error::NonFinite(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .context("starting worker threads")
        .and_then(|pool| pool.install(|| run(cli.command, cli.seed)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Lex(a) => lex(a),
        Command::Split(a) => split(a, seed),
        Command::LearnBpe(a) => learn_bpe(a),
        Command::Segment(a) => segment(a),
        Command::Join(a) => join(a),
        Command::Train(a) => train_model(a, seed),
        Command::EvalStatic(a) => eval_static(a),
        Command::EvalDynamic(a) => eval_adaptive(a, seed, false),
        Command::EvalMaintenance(a) => eval_adaptive(a, seed, true),
        Command::Complete(a) => complete(a),
        Command::Ngram(a) => ngram(a),
        Command::Synth(a) => synth(a, seed),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Refuses to write a directory inside the one being read.
fn distinct_dirs(input: &Path, output: &Path) -> Result<()> {
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    if canon(output).starts_with(canon(input)) {
        return Err(usage(format!("output {} lies inside input {}", output.display(), input.display())));
    }
    Ok(())
}

fn load(dir: &Path, lexer: Lexer) -> Result<Vec<TokenStream>> {
    let streams = load_corpus(dir, lexer).with_context(|| format!("loading corpus {}", dir.display()))?;
    if streams.is_empty() {
        return Err(usage(format!("{} holds no `<project>/<file>` files", dir.display())));
    }
    Ok(streams)
}

fn load_table(path: &Path) -> Result<MergeTable> {
    MergeTable::from_text(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_split(path: &Path) -> Result<CorpusSplit> {
    CorpusSplit::from_text(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_model(path: &Path, vocab: &Vocab) -> Result<GruModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_checkpoint(&bytes, Some(vocab.hash())).with_context(|| format!("loading {}", path.display()))
}

fn load_data(args: &DataArgs) -> Result<(Vocab, Partitioned)> {
    let vocab = load_table(&args.merges)?.vocab();
    let files = read_segmented_corpus(&read(&args.segmented)?, &vocab)
        .with_context(|| format!("parsing {}", args.segmented.display()))?;
    Ok((vocab, partition(files, &load_split(&args.split)?)))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned())
}

fn emit(report: &EvalReport, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write(path, report.to_text()),
        None => io::stdout().write_all(report.to_text().as_bytes()).context("writing report"),
    }
}

fn lex(a: LexArgs) -> Result<()> {
    distinct_dirs(&a.input, &a.output)?;
    let streams = load(&a.input, a.lexer)?;
    write_pretokenized(&a.output, &streams)?;
    let tokens: usize = streams.iter().map(|s| s.tokens.len()).sum();
    eprintln!("{} files, {tokens} tokens", streams.len());
    Ok(())
}

fn split(a: SplitArgs, seed: u64) -> Result<()> {
    let projects = project_ids(&load(&a.corpus, a.lexer)?);
    let fractions = SplitFractions { validation: a.validation, test: a.test, encoding: a.encoding };
    let s = split_corpus(&projects, fractions, seed)?;
    let (v, t, e, tr) = s.sizes();
    eprintln!("train {tr}, validation {v}, test {t}, encoding {e} projects");
    write(&a.output, s.to_text())
}

fn learn_bpe(a: LearnBpeArgs) -> Result<()> {
    let mut streams = load(&a.corpus, a.lexer)?;
    if let Some(path) = &a.split {
        let split = load_split(path)?;
        let keep = split.projects(&a.role).map_err(|e| usage(e.to_string()))?;
        streams.retain(|s| keep.contains(&s.project_id));
        if streams.is_empty() {
            return Err(usage(format!("no {} projects of {} are in the corpus", a.role, path.display())));
        }
    }
    let table = learn_merges(&streams, a.ops)?;
    eprintln!("{} merges learned", table.merges().len());
    write(&a.output, table.to_text())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let table = load_table(&a.merges)?;
    let streams = load(&a.corpus, a.lexer)?;
    let files = segment_corpus(&streams, &table);
    write(&a.output, write_segmented_corpus(&files, &table.vocab()))
}

fn join(a: JoinArgs) -> Result<()> {
    let mut streams = Vec::new();
    for (n, line) in read(&a.input)?.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let at = || format!("{} line {}", a.input.display(), n + 1);
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        let key = codelm::text::unescape_field(key).with_context(at)?;
        let (project, file) = key.split_once('/').ok_or_else(|| anyhow::anyhow!("key {key:?} has no project")).with_context(at)?;
        let texts = SubwordSequence::from_line(rest).and_then(|s| s.join()).with_context(at)?;
        let tokens = texts
            .into_iter()
            .map(|t| Token::new(t, TokenKind::Other))
            .collect::<codelm::Result<Vec<_>>>()
            .with_context(at)?;
        streams.push(TokenStream { project_id: project.into(), file_id: file.into(), tokens });
    }
    write_pretokenized(&a.output, &streams)?;
    Ok(())
}

fn train_model(a: TrainArgs, seed: u64) -> Result<()> {
    let (vocab, data) = load_data(&a.data)?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(usage("the split leaves no training or no validation files in the segmented corpus"));
    }
    let config = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: a.embed_dim,
        hidden_dim: a.hidden_dim,
        dropout_keep: 1.0 - a.dropout,
        unroll: a.unroll,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let schedule = TrainSchedule {
        initial_lr: a.lr,
        max_epochs: a.epochs,
        max_halvings: a.halvings,
        batch_size: a.batch,
        clip: (!a.no_clip).then_some(a.clip),
        seed,
    };
    schedule.validate().map_err(|e| usage(e.to_string()))?;
    let model = GruModel::init(config, vocab.hash(), seed)?;
    eprintln!(
        "{} parameters, {} training units, {} validation tokens",
        model.param_count(),
        data.train.unit_count(),
        data.validation.token_count()
    );
    let (best, log) = train(model, &data.train, &data.validation, &schedule, |r| {
        eprintln!("epoch {} loss {:.4} valid_bits {:.4} lr {}", r.epoch, r.train_loss, r.valid_bits, r.lr);
    })?;
    write(&a.output, save_checkpoint(&best))?;
    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    write(&log_path, log.to_text())
}

fn mrr_config(report: &ReportArgs, search: &SearchArgs) -> Option<MrrConfig> {
    report.mrr.then(|| MrrConfig {
        k: search.k as usize,
        beam: search.beam as usize,
        limits: search.limits,
        max_positions: report.max_positions,
    })
}

fn eval_static(a: EvalArgs) -> Result<()> {
    let (vocab, data) = load_data(&a.data)?;
    let model = load_model(&a.model, &vocab)?;
    let id = a.report.corpus_id.clone().unwrap_or_else(|| file_stem(&a.data.segmented));
    let mrr = mrr_config(&a.report, &a.search);
    let report = run_static(&model, &vocab, &data.test, &id, mrr.as_ref())?;
    emit(&report, a.report.output.as_deref())
}

fn eval_adaptive(a: AdaptEvalArgs, seed: u64, maintenance: bool) -> Result<()> {
    let e = &a.eval;
    let (vocab, data) = load_data(&e.data)?;
    let model = load_model(&e.model, &vocab)?;
    let defaults = AdaptationPolicy::for_model(&model);
    let policy = AdaptationPolicy {
        unroll: a.adapt_unroll,
        steps_per_sequence: a.adapt_steps,
        lr: a.adapt_lr.unwrap_or(defaults.lr),
        clip: Some(a.adapt_clip),
        dropout: a.adapt_dropout,
        seed,
    };
    policy.validate().map_err(|e| usage(e.to_string()))?;
    let id = e.report.corpus_id.clone().unwrap_or_else(|| file_stem(&e.data.segmented));
    let mrr = mrr_config(&e.report, &e.search);
    let report = if maintenance {
        run_maintenance(&model, &vocab, &data.test, &policy, &id, mrr.as_ref())?
    } else {
        run_dynamic(&model, &vocab, &data.test, &policy, &id, mrr.as_ref())?
    };
    emit(&report, e.report.output.as_deref())
}

fn complete(a: CompleteArgs) -> Result<()> {
    let table = load_table(&a.merges)?;
    let segmenter = Segmenter::new(&table);
    let vocab = segmenter.vocab();
    let model = load_model(&a.model, vocab)?;
    let mut source = String::new();
    io::stdin().read_to_string(&mut source).context("reading stdin")?;
    let history = codelm::corpus::sanitize(codelm::corpus::lex_file(&source, a.lexer)?);
    let units: Vec<u32> = history.texts().flat_map(|t| segmenter.segment(t)).collect();
    let (list, _) = predict_top_k(&model, vocab.units(), &units, a.search.k as usize, a.search.beam as usize, a.search.limits)?;
    let mut out = io::stdout().lock();
    for (i, c) in list.entries.iter().enumerate() {
        writeln!(out, "{}\t{:.6}\t{}", i + 1, c.prob, escape_field(&c.text)).context("writing completions")?;
    }
    Ok(())
}

fn ngram(a: NgramArgs) -> Result<()> {
    let streams = load(&a.corpus, a.lexer)?;
    let split = load_split(&a.split)?;
    let (train_set, test): (Vec<TokenStream>, Vec<TokenStream>) = {
        let mut train_set = Vec::new();
        let mut test = Vec::new();
        for s in streams {
            match split.role_of(&s.project_id) {
                Some("train") => train_set.push(s),
                Some("test") => test.push(s),
                _ => {}
            }
        }
        (train_set, test)
    };
    if train_set.is_empty() || test.is_empty() {
        return Err(usage("the split leaves no training or no test files in the corpus"));
    }
    let config = NgramConfig {
        order: a.order,
        cutoff: a.cutoff,
        lambda: a.lambda,
        delta: a.delta,
        cache_lambda: a.cache_lambda,
        cache_decay: a.cache_decay,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let model = NgramModel::train(&train_set, config)?;
    let id = a.report.corpus_id.clone().unwrap_or_else(|| file_stem(&a.corpus));
    let report = run_ngram(&model, &test, a.cache, &id, a.report.mrr, a.report.max_positions);
    emit(&report, a.report.output.as_deref())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    if a.projects == 0 || a.files == 0 {
        return Err(usage("--projects and --files must be positive"));
    }
    let config = SynthConfig {
        projects: a.projects,
        files_per_project: a.files,
        file_bytes: a.bytes,
        shared_vocabulary: a.shared_vocabulary,
        seed,
    };
    write_corpus(&a.output, &generate(&config))?;
    Ok(())
}
