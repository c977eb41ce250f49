//! Command-line front end.
//!
//! Every long flag may also be given in a `--config` file of `key=value`
//! lines. Keys are flag names without the leading dashes; a key may be scoped
//! to one subcommand as `segment.granularity=hybrid`. Unscoped keys apply to
//! every subcommand that has that flag. Flags on the command line win.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bpe::{self, BpeModel, MergeTable};
use crate::corpus::{self, lines_from_bytes, Corpus, Sentence, SentencePair};
use crate::error::{Error, Result};
use crate::eval::{self, BleuUnit};
use crate::nmt::{self, Checkpoint, NmtConfig, NmtParams, Pair, Schedule};
use crate::segmenters::{decode_tokens, CharSegmenter, Granularity, HybridModel, Segmenter, WordCut, WordSegmenter};
use crate::vocab::{self, Vocabulary};
use crate::wpm::{self, WpmMode, WpmModel, WpmTrainConfig};

const STDIO: &str = "-";

#[derive(Debug, Parser)]
#[command(name = "granulate", version, about = "Translation granularity toolkit")]
struct Cli {
    /// Worker threads for per-sentence work; output order is unaffected.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// File of key=value lines mirroring the long flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a word vocabulary, or a hybrid word-character model with --hybrid.
    BuildVocab(BuildVocabArgs),
    /// Segment text at a granularity.
    Segment(SegmentArgs),
    /// Undo segmentation.
    Desegment(DesegmentArgs),
    /// Learn BPE merge operations.
    LearnBpe(LearnBpeArgs),
    /// Apply a BPE merge table.
    ApplyBpe(ApplyArgs),
    /// Train a wordpiece model.
    TrainWpm(TrainWpmArgs),
    /// Apply a wordpiece model.
    ApplyWpm(ApplyArgs),
    /// Train the toy encoder-decoder on segmented parallel text.
    TrainToy(Box<TrainToyArgs>),
    /// Translate segmented source text with a trained toy model.
    Translate(TranslateArgs),
    /// Corpus BLEU with multi-bleu arithmetic.
    ScoreBleu(ScoreBleuArgs),
    /// Average tokens per sentence after segmentation.
    Stats(StatsArgs),
    /// Detach punctuation from Latin-script words.
    Tokenize(IoArgs),
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Input file, or - for standard input.
    #[arg(default_value = STDIO)]
    input: PathBuf,

    /// Output file, or - for standard output.
    #[arg(short, long, default_value = STDIO)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    #[command(flatten)]
    io: IoArgs,

    /// Total ids including the three reserved symbols.
    #[arg(long, default_value_t = 30_000)]
    max_size: usize,

    /// Build a hybrid word-character model.
    #[arg(long)]
    hybrid: bool,

    /// Keep words at or above this frequency.
    #[arg(long, conflicts_with = "word_count")]
    threshold: Option<u64>,

    /// Keep this many top-ranked words (hybrid only).
    #[arg(long, requires = "hybrid")]
    word_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GranularityArg {
    Word,
    Char,
    Hybrid,
    Bpe,
    Wpm,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Word => Granularity::Word,
            GranularityArg::Char => Granularity::Char,
            GranularityArg::Hybrid => Granularity::Hybrid,
            GranularityArg::Bpe => Granularity::Bpe,
            GranularityArg::Wpm => Granularity::Wpm,
        }
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    io: IoArgs,

    #[arg(long, value_enum)]
    granularity: GranularityArg,

    /// Model file: hybrid model, BPE merges, wordpiece model, or an optional
    /// vocabulary for word granularity.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesegmentArgs {
    #[command(flatten)]
    io: IoArgs,

    #[arg(long, value_enum)]
    granularity: GranularityArg,
}

#[derive(Debug, Args)]
struct LearnBpeArgs {
    #[command(flatten)]
    io: IoArgs,

    #[arg(long, default_value_t = bpe::DEFAULT_MERGE_OPS)]
    merge_ops: usize,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[command(flatten)]
    io: IoArgs,

    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    #[value(name = "pre_segmented", alias = "pre-segmented")]
    PreSegmented,
}

#[derive(Debug, Args)]
struct TrainWpmArgs {
    #[command(flatten)]
    io: IoArgs,

    /// Piece budget.
    #[arg(long, default_value_t = 30_000)]
    vocab_size: usize,

    #[arg(long, value_enum, default_value = "pre_segmented")]
    mode: ModeArg,

    /// Pieces added between re-segmentations.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Debug, Args)]
struct TrainToyArgs {
    /// Segmented source side.
    #[arg(long)]
    source: PathBuf,

    /// Segmented target side.
    #[arg(long)]
    target: PathBuf,

    #[arg(long, requires = "dev_target")]
    dev_source: Option<PathBuf>,

    #[arg(long, requires = "dev_source")]
    dev_target: Option<PathBuf>,

    /// Model checkpoint to write.
    #[arg(short, long)]
    output: PathBuf,

    /// Loss trace to write.
    #[arg(long)]
    report: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,

    #[arg(long)]
    dim: Option<usize>,

    #[arg(long)]
    encoder_layers: Option<usize>,

    #[arg(long)]
    decoder_layers: Option<usize>,

    #[arg(long, default_value_t = 30_000)]
    source_vocab_size: usize,

    #[arg(long, default_value_t = 30_000)]
    target_vocab_size: usize,

    /// Pairs with a longer side are dropped.
    #[arg(long, default_value_t = corpus::DEFAULT_MAX_LEN)]
    max_len: usize,

    #[arg(long)]
    adam_epochs: Option<usize>,

    #[arg(long)]
    sgd_epochs: Option<usize>,

    #[arg(long)]
    adam_lr: Option<f64>,

    #[arg(long)]
    sgd_lr: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    #[command(flatten)]
    io: IoArgs,

    #[arg(long)]
    model: PathBuf,

    #[arg(long, default_value_t = nmt::DEFAULT_BEAM)]
    beam: usize,

    /// Output positions per sentence; defaults to twice the source length plus 10.
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Kv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitArg {
    Token,
    Char,
}

#[derive(Debug, Args)]
struct ScoreBleuArgs {
    /// Hypothesis file.
    hypothesis: PathBuf,

    /// One or more reference files.
    #[arg(required = true)]
    references: Vec<PathBuf>,

    /// Scoring unit: whitespace tokens or characters.
    #[arg(long, value_enum)]
    unit: UnitArg,

    #[arg(long, value_enum, default_value = "human")]
    format: Format,

    /// Word-level source file; adds a BLEU-by-length table.
    #[arg(long)]
    source: Option<PathBuf>,

    #[arg(long, default_value_t = eval::DEFAULT_BUCKET_WIDTH)]
    bucket_width: usize,

    /// Start of the open last bucket; 0 derives it from the longest sentence.
    #[arg(long, default_value_t = eval::DEFAULT_BUCKET_CAP)]
    bucket_cap: usize,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    source: PathBuf,

    #[arg(long, value_enum, default_value = "word")]
    source_granularity: GranularityArg,

    #[arg(long)]
    source_model: Option<PathBuf>,

    #[arg(long)]
    target: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "word")]
    target_granularity: GranularityArg,

    #[arg(long)]
    target_model: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

fn parse_config(path: &Path) -> Result<Vec<(Option<String>, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in corpus::read_lines(path)?.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, i + 1, "expected key=value"))?;
        let (k, v) = (k.trim(), v.trim());
        let (scope, key) = match k.split_once('.') {
            Some((s, k)) => (Some(s.to_string()), k.to_string()),
            None => (None, k.to_string()),
        };
        out.push((scope, key, v.to_string()));
    }
    Ok(out)
}

/// Inserts flags from `--config` after the subcommand name, skipping any
/// flag already given on the command line.
fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config = strs.iter().enumerate().skip(1).find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(config) = config else { return Ok(argv) };
    let path = PathBuf::from(config);
    let entries = parse_config(&path)?;
    let root = Cli::command();
    let names: Vec<String> = root.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = strs.iter().skip(1).position(|a| names.contains(a)).map(|p| p + 1) else {
        return Ok(argv);
    };
    let sub_name = &strs[pos];
    let sub = root.find_subcommand(sub_name).expect("known subcommand");
    let mut extra: Vec<OsString> = Vec::new();
    for (lineno, (scope, key, value)) in entries.iter().enumerate() {
        if let Some(s) = scope {
            if !names.contains(s) {
                return Err(Error::format(&path, lineno + 1, format!("unknown subcommand scope {s}")));
            }
            if s != sub_name {
                continue;
            }
        }
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            if scope.is_some() {
                return Err(Error::format(&path, lineno + 1, format!("{sub_name} has no flag --{key}")));
            }
            continue;
        };
        let given = strs.iter().skip(1).any(|a| {
            a.strip_prefix("--").is_some_and(|f| f == key || f.starts_with(&format!("{key}=")))
                || arg.get_short().is_some_and(|c| a.starts_with(&format!("-{c}")) && !a.starts_with("--"))
        });
        if key == "config" || given {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => extra.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(Error::format(&path, lineno + 1, format!("--{key} expects true or false"))),
            },
            _ => extra.push(format!("--{key}={value}").into()),
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Runs the command line and returns the process exit status: 0 on success,
/// 1 on bad input or arguments, 2 on I/O failure.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("granulate: error: {e}");
    if e.is_io() {
        2
    } else {
        1
    }
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == STDIO
}

fn read_text_lines(path: &Path) -> Result<Vec<String>> {
    if is_stdio(path) {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::io("<stdin>", e))?;
        lines_from_bytes(&buf, Path::new("<stdin>"))
    } else {
        corpus::read_lines(path)
    }
}

fn read_input(path: &Path) -> Result<Vec<Sentence>> {
    read_text_lines(path)?.iter().map(|l| Sentence::new(l)).collect()
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if is_stdio(path) {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io("<stdout>", e))
    } else {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    write_output(path, &text)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::validation("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

/// Order-preserving parallel map.
fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    Ok(pool(jobs)?.install(|| items.par_iter().map(f).collect()))
}

fn require_model(model: Option<&Path>, g: Granularity) -> Result<&Path> {
    model.ok_or_else(|| Error::validation(format!("--model is required for {g} granularity")))
}

fn load_segmenter(g: Granularity, model: Option<&Path>) -> Result<Box<dyn Segmenter>> {
    Ok(match g {
        Granularity::Word => Box::new(WordSegmenter {
            vocabulary: model.map(Vocabulary::load).transpose()?,
        }),
        Granularity::Char => Box::new(CharSegmenter),
        Granularity::Hybrid => Box::new(HybridModel::load(require_model(model, g)?)?),
        Granularity::Bpe => Box::new(BpeModel::new(MergeTable::load(require_model(model, g)?)?)),
        Granularity::Wpm => Box::new(WpmModel::load(require_model(model, g)?)?),
    })
}

fn segment_with(seg: &dyn Segmenter, io: &IoArgs, jobs: usize) -> Result<()> {
    let input = read_input(&io.input)?;
    let out = par_map(jobs, &input, |s| seg.encode(s).join(" "))?;
    write_lines(&io.output, out)
}

fn execute(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    match cli.command {
        Command::BuildVocab(a) => build_vocab(a),
        Command::Segment(a) => {
            let seg = load_segmenter(a.granularity.into(), a.model.as_deref())?;
            segment_with(seg.as_ref(), &a.io, jobs)
        }
        Command::Desegment(a) => {
            let g: Granularity = a.granularity.into();
            let input = read_input(&a.io.input)?;
            let decoded = par_map(jobs, &input, |s| decode_tokens(g, s.tokens()))?;
            let warnings: usize = decoded.iter().map(|d| d.warnings).sum();
            if warnings > 0 {
                eprintln!("granulate: warning: repaired {warnings} malformed token sequence(s)");
            }
            write_lines(&a.io.output, decoded.into_iter().map(|d| d.sentence.text().to_string()))
        }
        Command::LearnBpe(a) => {
            let side = read_input(&a.io.input)?;
            let table = bpe::learn_bpe(&bpe::word_frequencies(&side), a.merge_ops)?;
            write_output(&a.io.output, &table.to_file_string())
        }
        Command::ApplyBpe(a) => {
            let seg = BpeModel::new(MergeTable::load(&a.model)?);
            segment_with(&seg, &a.io, jobs)
        }
        Command::TrainWpm(a) => {
            let side = read_input(&a.io.input)?;
            let mode = match a.mode {
                ModeArg::Raw => WpmMode::Raw,
                ModeArg::PreSegmented => WpmMode::PreSegmented,
            };
            let config = WpmTrainConfig {
                batch_size: a.batch_size,
                ..WpmTrainConfig::new(a.vocab_size, mode)
            };
            let model = wpm::train_wpm(&side, &config)?;
            write_output(&a.io.output, &model.to_file_string())
        }
        Command::ApplyWpm(a) => {
            let seg = WpmModel::load(&a.model)?;
            segment_with(&seg, &a.io, jobs)
        }
        Command::TrainToy(a) => train_toy(*a, cli.seed),
        Command::Translate(a) => translate(a, jobs),
        Command::ScoreBleu(a) => score_bleu(a),
        Command::Stats(a) => stats(a),
        Command::Tokenize(io) => {
            let lines = read_text_lines(&io.input)?;
            let out = par_map(jobs, &lines, |l| corpus::rule_tokenize(l))?;
            write_lines(&io.output, out)
        }
    }
}

fn build_vocab(a: BuildVocabArgs) -> Result<()> {
    let side = read_input(&a.io.input)?;
    let text = if a.hybrid {
        let cut = match (a.threshold, a.word_count) {
            (Some(t), _) => WordCut::Threshold(t),
            (None, Some(k)) => WordCut::Size(k),
            (None, None) => WordCut::Auto,
        };
        HybridModel::build(&side, a.max_size, cut)?.to_file_string()
    } else {
        let mut v = vocab::build_vocabulary(&side, a.max_size)?;
        if let Some(t) = a.threshold {
            v = v.with_min_frequency(t);
        }
        v.to_file_string()
    };
    write_output(&a.io.output, &text)
}

fn to_ids(vocab: &Vocabulary, s: &Sentence) -> Vec<usize> {
    s.tokens().iter().map(|t| vocab.id_or_unk(t)).collect()
}

fn train_toy(a: TrainToyArgs, seed: u64) -> Result<()> {
    let corpus = corpus::length_filter(&corpus::load_parallel(&a.source, &a.target)?, a.max_len);
    if corpus.is_empty() {
        return Err(Error::validation(format!("no training pairs within --max-len {}", a.max_len)));
    }
    let source_vocab = vocab::build_vocabulary(&corpus.sources(), a.source_vocab_size)?;
    let target_vocab = vocab::build_vocabulary(&corpus.targets(), a.target_vocab_size)?;
    let mut config = match a.profile {
        Profile::Desk => NmtConfig::desk(source_vocab.len(), target_vocab.len()),
        Profile::Full => NmtConfig::full(source_vocab.len(), target_vocab.len()),
    };
    config.dim = a.dim.unwrap_or(config.dim);
    config.encoder_layers = a.encoder_layers.unwrap_or(config.encoder_layers);
    config.decoder_layers = a.decoder_layers.unwrap_or(config.decoder_layers);
    let base = match a.profile {
        Profile::Desk => Schedule::default(),
        Profile::Full => Schedule::full(),
    };
    let schedule = Schedule {
        adam_epochs: a.adam_epochs.unwrap_or(base.adam_epochs),
        sgd_epochs: a.sgd_epochs.unwrap_or(base.sgd_epochs),
        adam_lr: a.adam_lr.unwrap_or(base.adam_lr),
        sgd_lr: a.sgd_lr.unwrap_or(base.sgd_lr),
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        dropout: a.dropout.unwrap_or(base.dropout),
        seed,
        ..base
    };
    let ids = |c: &Corpus| -> Vec<Pair> {
        c.pairs
            .iter()
            .map(|p: &SentencePair| (to_ids(&source_vocab, &p.source), to_ids(&target_vocab, &p.target)))
            .collect()
    };
    let train = ids(&corpus);
    let dev = match (&a.dev_source, &a.dev_target) {
        (Some(s), Some(t)) => ids(&corpus::load_parallel(s, t)?),
        _ => Vec::new(),
    };
    let mut params = NmtParams::new(config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let start = Instant::now();
    let report = nmt::train_with_progress(&mut params, &train, &dev, &schedule, |e| {
        eprintln!(
            "epoch {} {} lr={} loss={:.4} ppl={:.4} ({:.1}s)",
            e.epoch,
            e.optimizer,
            e.learning_rate,
            e.train_loss,
            e.dev_perplexity,
            start.elapsed().as_secs_f64()
        );
    })?;
    Checkpoint {
        params,
        source_vocab,
        target_vocab,
    }
    .save(&a.output)?;
    if let Some(path) = &a.report {
        write_output(path, &report.to_text())?;
    }
    Ok(())
}

fn translate(a: TranslateArgs, jobs: usize) -> Result<()> {
    let ckpt = Checkpoint::load(&a.model)?;
    if a.beam == 0 {
        return Err(Error::validation("--beam must be at least 1"));
    }
    let input = read_input(&a.io.input)?;
    let results = par_map(jobs, &input, |s| -> Result<String> {
        if s.is_empty() {
            return Ok(String::new());
        }
        let src = to_ids(&ckpt.source_vocab, s);
        let max_len = a.max_len.unwrap_or(2 * src.len() + 10);
        let hyp = nmt::beam_search(&ckpt.params, &src, a.beam, max_len)?;
        Ok(hyp
            .tokens
            .iter()
            .map(|&id| ckpt.target_vocab.token(id).unwrap_or(vocab::UNK))
            .collect::<Vec<_>>()
            .join(" "))
    })?;
    let lines = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_lines(&a.io.output, lines)
}

fn score_bleu(a: ScoreBleuArgs) -> Result<()> {
    let unit = match a.unit {
        UnitArg::Token => BleuUnit::Token,
        UnitArg::Char => BleuUnit::Char,
    };
    let hyps = read_input(&a.hypothesis)?;
    let refs = a.references.iter().map(|p| read_input(p)).collect::<Result<Vec<_>>>()?;
    let report = eval::bleu(&hyps, &refs, unit)?;
    let mut out = match a.format {
        Format::Human => format!("{}\n", report.to_human()),
        Format::Kv => report.to_key_value(),
    };
    if let Some(src) = &a.source {
        let lengths: Vec<usize> = read_input(src)?.iter().map(Sentence::len).collect();
        let cap = (a.bucket_cap > 0).then_some(a.bucket_cap);
        let buckets = eval::bleu_by_length(&hyps, &refs, &lengths, a.bucket_width, cap, unit)?;
        out.push_str(&match a.format {
            Format::Human => buckets.to_human(),
            Format::Kv => buckets.to_key_value(),
        });
    }
    write_output(Path::new(STDIO), &out)
}

fn stats(a: StatsArgs) -> Result<()> {
    let mut sides = vec![("source", a.source, a.source_granularity, a.source_model)];
    if let Some(t) = a.target {
        sides.push(("target", t, a.target_granularity, a.target_model));
    }
    let mut out = match a.format {
        Format::Human => format!("{:<8} {:<12} {:>10} {:>10} {:>8}\n", "side", "granularity", "sentences", "tokens", "average"),
        Format::Kv => String::new(),
    };
    for (name, path, g, model) in sides {
        let g: Granularity = g.into();
        let seg = load_segmenter(g, model.as_deref())?;
        let s = eval::side_stats(&read_input(&path)?, seg.as_ref());
        out.push_str(&match a.format {
            Format::Human => format!(
                "{:<8} {:<12} {:>10} {:>10} {:>8.2}\n",
                name,
                g,
                s.sentences,
                s.tokens,
                s.average()
            ),
            Format::Kv => format!(
                "{name}.granularity={g}\n{name}.sentences={}\n{name}.tokens={}\n{name}.average={:.2}\n",
                s.sentences,
                s.tokens,
                s.average()
            ),
        });
    }
    write_output(Path::new(STDIO), &out)
}
