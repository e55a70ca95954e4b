use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lscd::corpus::{Corpus, ExtractOptions, MatchMode, Period};
use lscd::embeddings::LayerPreset;
use lscd::evaluation::{f1, read_graded, spearman, GoldRecord};
use lscd::measures::{ApdMode, Measure};
use lscd::pipeline::{self, RunConfig};
use lscd::{Error, Result};

const FORMATS: &str = "\
File formats:
  corpus       blank-line separated sentences; one token per line as
               surface[<TAB>lemma[<TAB>pos]] (lemma defaults to surface)
  targets      one target lemma per line (extra TAB columns ignored)
  usage dump   JSON Lines, one object per usage:
               {target, period, sentence_index, token_index, target_offset,
                window_radius, tokens: [{surface, lemma, pos?}]}
               written to <dir>/<target>.<period>.jsonl; the usage key is
               target:period:sentence_index:token_index
  embeddings   JSON Lines, header {target, period, dimension, layer_count}
               then {usage_key, layer, vector} per usage and layer (layers 1-based);
               read from <dir>/<target>.<period>.jsonl
  scores       TSV with header target<TAB>score<TAB>measure<TAB>config, 6 decimals
  prediction   TSV target<TAB>label (0/1), sorted by target
  gold         TSV target<TAB>label; graded gold TSV target<TAB>graded_score
  leaderboard  TSV submission<TAB>threshold<TAB>accuracy
  analysis     TSV target<TAB>period<TAB>metric<TAB>value

Exit status: 0 success, 1 internal error, 2 bad input.
The collocations baseline is not provided.";

#[derive(Parser)]
#[command(name = "lscd", version, about = "Lexical semantic change detection", after_help = FORMATS)]
struct Cli {
    /// TOML file with default settings; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract capped, windowed usages of each target from both corpora.
    Extract(ExtractArgs),
    /// Score targets from per-layer embedding files.
    Score(ScoreArgs),
    /// Label the top-k targets of one score ranking as changed.
    Label(LabelArgs),
    /// Label the targets that are in the top k of every listed ranking.
    Consensus(ConsensusArgs),
    /// Compute the accuracy leaderboard against gold labels.
    Evaluate(EvaluateArgs),
    /// Capitalisation and collocation shares of usage dumps.
    Analyze(AnalyzeArgs),
    /// Frequency-change baseline scores and labels.
    BaselineFreq(BaselineFreqArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus of the first period (t1).
    #[arg(long)]
    corpus1: Option<PathBuf>,
    /// Corpus of the second period (t2).
    #[arg(long)]
    corpus2: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpora: CorpusArgs,
    /// `any-token-form` (surface or lemma) or `lemma-form`.
    #[arg(long)]
    mode: Option<MatchMode>,
    /// Sentences of context on each side of the target sentence [default: 1].
    #[arg(long)]
    window_radius: Option<usize>,
    /// Cap on usages per target and period [default: 200].
    #[arg(long)]
    max_usages: Option<usize>,
    /// Keep every usage.
    #[arg(long, conflicts_with = "max_usages")]
    no_cap: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    /// `first+last`, `last4` or a layer list such as `1,6,12`; repeatable.
    #[arg(long = "preset")]
    presets: Vec<LayerPreset>,
    /// `apd` or `cos`; repeatable [default: apd].
    #[arg(long = "measure")]
    measures: Vec<String>,
    /// Compare at most this many sampled vectors per period in APD.
    #[arg(long)]
    apd_sample_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    measure: Option<String>,
    /// Config column to rank (e.g. `first+last`).
    #[arg(long = "config-id")]
    config_id: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Allow k above half of the targets.
    #[arg(long)]
    allow_over_half: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    measure: Option<String>,
    /// Config column defining one ranking; give at least two.
    #[arg(long = "config-id", required = true, num_args = 1)]
    config_ids: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    allow_over_half: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Submission as NAME=PATH; repeatable.
    #[arg(long = "pred", value_parser = named_path)]
    preds: Vec<(String, PathBuf)>,
    /// Baseline prediction as NAME=PATH; repeatable.
    #[arg(long = "baseline", value_parser = named_path)]
    baselines: Vec<(String, PathBuf)>,
    /// Leave out the all-zero majority baseline row.
    #[arg(long)]
    no_majority: bool,
    /// Graded gold for a Spearman report (requires --scores).
    #[arg(long, requires = "scores")]
    graded_gold: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long = "config-id")]
    config_id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Usage dump files produced by `extract`.
    #[arg(long = "usages", required = true)]
    usages: Vec<PathBuf>,
    /// Lemma sequence containing the target, e.g. "cavallino rampante"; repeatable.
    #[arg(long = "pattern")]
    patterns: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineFreqArgs {
    #[command(flatten)]
    corpora: CorpusArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    allow_over_half: bool,
    /// Where to write the frequency score table.
    #[arg(long)]
    scores_out: Option<PathBuf>,
    /// Where to write the prediction.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_owned(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Missing(format!("--{flag} (flag or config file)")))
}

/// Writes to `path` atomically, or to stdout when no path is given.
fn emit<F>(path: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match path {
        Some(p) => pipeline::write_atomic(p, write),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn load_corpora(args: &CorpusArgs, cfg: &RunConfig) -> Result<([Corpus; 2], Vec<String>)> {
    let c1 = require(args.corpus1.clone().or(cfg.corpus1.clone()), "corpus1")?;
    let c2 = require(args.corpus2.clone().or(cfg.corpus2.clone()), "corpus2")?;
    let targets = require(args.targets.clone().or(cfg.targets.clone()), "targets")?;
    let corpora = [Corpus::from_path(&c1, Period::T1)?, Corpus::from_path(&c2, Period::T2)?];
    Ok((corpora, pipeline::read_targets(&targets)?))
}

fn extract(args: ExtractArgs, cfg: &RunConfig) -> Result<()> {
    let (corpora, targets) = load_corpora(&args.corpora, cfg)?;
    let defaults = ExtractOptions::default();
    let opts = ExtractOptions {
        mode: args.mode.or(cfg.mode).unwrap_or(defaults.mode),
        window_radius: args.window_radius.or(cfg.window_radius).unwrap_or(defaults.window_radius),
        max_usages: if args.no_cap {
            None
        } else {
            args.max_usages.or(cfg.max_usages).or(defaults.max_usages)
        },
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };
    let out_dir = require(args.out_dir.or(cfg.usages_dir.clone()), "out-dir")?;
    let files = pipeline::run_extract([&corpora[0], &corpora[1]], &targets, &opts, &out_dir)?;
    log::info!("wrote {} usage files to {}", files.len(), out_dir.display());
    Ok(())
}

fn score(args: ScoreArgs, cfg: &RunConfig) -> Result<()> {
    let targets = pipeline::read_targets(&require(args.targets.or(cfg.targets.clone()), "targets")?)?;
    let dir = require(args.embeddings_dir.or(cfg.embeddings_dir.clone()), "embeddings-dir")?;
    let presets = if !args.presets.is_empty() {
        args.presets
    } else if let Some(p) = &cfg.presets {
        p.iter().map(|s| s.parse()).collect::<Result<_>>()?
    } else {
        vec![LayerPreset::FirstLast, LayerPreset::LastFour]
    };
    let names = if !args.measures.is_empty() {
        args.measures
    } else {
        cfg.measures.clone().unwrap_or_else(|| vec!["apd".to_owned()])
    };
    let sample = args.apd_sample_size.or(cfg.apd_sample_size);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let measures = names
        .iter()
        .map(|n| {
            Ok(match (n.parse::<Measure>()?, sample) {
                (Measure::Apd(_), Some(sample_size)) => {
                    Measure::Apd(ApdMode::Sampled { sample_size, seed })
                }
                (m, _) => m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = pipeline::score_targets(&targets, &dir, &presets, &measures)?;
    emit(args.out.as_deref(), |w| table.write_tsv(w))
}

fn label(args: LabelArgs, cfg: &RunConfig) -> Result<()> {
    let table = pipeline::read_scores(&args.scores)?;
    let ranking = pipeline::ranking_for(&table, args.measure.as_deref(), args.config_id.as_deref())?;
    let k = require(args.k.or(cfg.k), "k")?;
    let pred = pipeline::run_label(&ranking, k, args.allow_over_half)?;
    emit(args.out.as_deref(), |w| pred.write_tsv(w))
}

fn consensus(args: ConsensusArgs, cfg: &RunConfig) -> Result<()> {
    let table = pipeline::read_scores(&args.scores)?;
    let rankings = args
        .config_ids
        .iter()
        .map(|c| pipeline::ranking_for(&table, args.measure.as_deref(), Some(c)))
        .collect::<Result<Vec<_>>>()?;
    let k = require(args.k.or(cfg.k), "k")?;
    let (pred, agreed) = pipeline::run_consensus(&rankings, k, args.allow_over_half)?;
    eprintln!("agreement: {agreed} of top {k}");
    emit(args.out.as_deref(), |w| pred.write_tsv(w))
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let gold = GoldRecord::from_path(&args.gold)?;
    let load = |items: &[(String, PathBuf)]| {
        items
            .iter()
            .map(|(n, p)| Ok((n.clone(), pipeline::read_prediction(p)?)))
            .collect::<Result<Vec<_>>>()
    };
    let subs = load(&args.preds)?;
    let bases = load(&args.baselines)?;
    let board = pipeline::run_evaluate(&gold, &subs, &bases, !args.no_majority)?;
    for (name, pred) in subs.iter().chain(&bases) {
        eprintln!("{name}: f1 {:.4}", f1(pred, &gold)?);
    }
    for e in &board.entries {
        eprintln!("{}: accuracy {} ({})", e.submission, e.accuracy.rounded(2), e.accuracy.ratio());
    }
    if let (Some(graded), Some(scores)) = (&args.graded_gold, &args.scores) {
        let file = std::fs::File::open(graded).map_err(|e| Error::Io {
            path: graded.clone(),
            source: e,
        })?;
        let graded = read_graded(std::io::BufReader::new(file))?;
        let table = pipeline::read_scores(scores)?
            .select(args.measure.as_deref(), args.config_id.as_deref());
        eprintln!("spearman: {:.4}", spearman(&table, &graded)?);
    }
    emit(args.out.as_deref(), |w| board.write_tsv(w))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let profiles = pipeline::run_analyze(&args.usages, &args.patterns)?;
    emit(args.out.as_deref(), |w| {
        writeln!(w, "{}", lscd::analysis::ANALYSIS_HEADER)?;
        for p in &profiles {
            p.write_tsv(&mut *w)?;
        }
        Ok(())
    })
}

fn baseline_freq(args: BaselineFreqArgs, cfg: &RunConfig) -> Result<()> {
    let (corpora, targets) = load_corpora(&args.corpora, cfg)?;
    let k = require(args.k.or(cfg.k), "k")?;
    let (table, pred) =
        pipeline::run_baseline_freq([&corpora[0], &corpora[1]], &targets, k, args.allow_over_half)?;
    if let Some(p) = &args.scores_out {
        pipeline::write_atomic(p, |w| table.write_tsv(w))?;
    }
    emit(args.out.as_deref(), |w| pred.write_tsv(w))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Extract(a) => extract(a, &cfg),
        Command::Score(a) => score(a, &cfg),
        Command::Label(a) => label(a, &cfg),
        Command::Consensus(a) => consensus(a, &cfg),
        Command::Evaluate(a) => evaluate(a),
        Command::Analyze(a) => analyze(a),
        Command::BaselineFreq(a) => baseline_freq(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lscd: {e}");
            if e.is_bad_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
