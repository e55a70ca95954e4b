//! File-level stages behind the `lscd` command line.
//!
//! Usage dumps and embedding files are named `<target>.<period>.jsonl` inside
//! their directories. Every output file is written to a temporary sibling and
//! renamed into place.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{Collocation, UsageProfile};
use crate::corpus::{extract_usages, read_usages, write_usages, Corpus, ExtractOptions, MatchMode, Period};
use crate::decision::{check_max_positives, consensus_top_k, label_top_k, rank_targets, Prediction, Ranking};
use crate::embeddings::{combine_layers, LayerEmbeddingSet, LayerPreset};
use crate::error::{Error, Result};
use crate::evaluation::{frequency_baseline, majority_baseline, GoldRecord, Leaderboard};
use crate::measures::{Measure, ScoreRow, ScoreTable};

/// Optional settings read from a TOML file; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub corpus1: Option<PathBuf>,
    pub corpus2: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub mode: Option<MatchMode>,
    pub window_radius: Option<usize>,
    pub max_usages: Option<usize>,
    pub seed: Option<u64>,
    pub usages_dir: Option<PathBuf>,
    pub embeddings_dir: Option<PathBuf>,
    pub presets: Option<Vec<String>>,
    pub measures: Option<Vec<String>>,
    pub apd_sample_size: Option<usize>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Writes `path` through a temporary file in the same directory.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads one target per line; extra tab-separated columns are ignored, so a
/// gold file also works.
pub fn read_targets(path: &Path) -> Result<Vec<String>> {
    use std::io::BufRead;
    let mut seen = BTreeSet::new();
    let mut targets = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let Some(t) = line.split('\t').next().map(str::trim).filter(|t| !t.is_empty()) else {
            continue;
        };
        if !seen.insert(t.to_owned()) {
            return Err(Error::Duplicate(t.to_owned()));
        }
        targets.push(t.to_owned());
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no targets", path.display())));
    }
    Ok(targets)
}

pub fn dump_path(dir: &Path, target: &str, period: Period) -> PathBuf {
    dir.join(format!("{target}.{period}.jsonl"))
}

/// Extracts usages for every target from both corpora into `out_dir`.
pub fn run_extract(
    corpora: [&Corpus; 2],
    targets: &[String],
    opts: &ExtractOptions,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(&String, &Corpus)> = targets
        .iter()
        .flat_map(|t| corpora.iter().map(move |c| (t, *c)))
        .collect();
    jobs.par_iter()
        .map(|(target, corpus)| {
            let usages = extract_usages(corpus, target, opts)?;
            if usages.is_empty() {
                log::warn!("no usages of `{target}` in {}", corpus.period);
            }
            let path = dump_path(out_dir, target, corpus.period);
            let mut buf = Vec::new();
            write_usages(&mut buf, &usages)?;
            write_atomic(&path, |w| w.write_all(&buf))?;
            Ok(path)
        })
        .collect()
}

fn load_embeddings(dir: &Path, target: &str, period: Period) -> Result<LayerEmbeddingSet> {
    let path = dump_path(dir, target, period);
    if !path.exists() {
        return Err(Error::Missing(format!(
            "embedding file for `{target}` in {period} ({})",
            path.display()
        )));
    }
    let set = LayerEmbeddingSet::from_path(&path)?;
    if set.target != target || set.period != period {
        return Err(Error::invalid(format!(
            "{} holds {}/{}, expected {target}/{period}",
            path.display(),
            set.target,
            set.period
        )));
    }
    Ok(set)
}

/// Scores every target under each (preset, measure) pair.
///
/// Rows are ordered by target (input order), then preset, then measure.
pub fn score_targets(
    targets: &[String],
    embeddings_dir: &Path,
    presets: &[LayerPreset],
    measures: &[Measure],
) -> Result<ScoreTable> {
    if presets.is_empty() || measures.is_empty() {
        return Err(Error::invalid("need at least one preset and one measure"));
    }
    let per_target: Vec<Vec<ScoreRow>> = targets
        .par_iter()
        .map(|target| {
            let old = load_embeddings(embeddings_dir, target, Period::T1)?;
            let new = load_embeddings(embeddings_dir, target, Period::T2)?;
            if old.layer_count != new.layer_count {
                return Err(Error::invalid(format!(
                    "`{target}`: layer_count differs between periods ({} vs {})",
                    old.layer_count, new.layer_count
                )));
            }
            let mut rows = Vec::new();
            for preset in presets {
                let spec = preset.resolve(old.layer_count)?;
                let v = combine_layers::<f64>(&old, &spec)?;
                let w = combine_layers::<f64>(&new, &spec)?;
                for measure in measures {
                    let score = measure.score(&v, &w)?.with_config(preset.to_string());
                    rows.push(ScoreRow::from(score));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(ScoreTable::new(per_target.into_iter().flatten().collect()))
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    ScoreTable::read_tsv(open(path)?)
}

/// Ranking of the rows matching `measure` / `config`.
pub fn ranking_for(table: &ScoreTable, measure: Option<&str>, config: Option<&str>) -> Result<Ranking> {
    let sel = table.select(measure, config);
    if sel.rows.is_empty() {
        return Err(Error::Missing(format!(
            "no score rows for measure {} / config {}",
            measure.unwrap_or("*"),
            config.unwrap_or("*")
        )));
    }
    rank_targets(&sel)
}

pub fn run_label(ranking: &Ranking, k: usize, allow_over_half: bool) -> Result<Prediction> {
    check_max_positives(k, ranking.len(), allow_over_half)?;
    label_top_k(ranking, k)
}

pub fn run_consensus(rankings: &[Ranking], k: usize, allow_over_half: bool) -> Result<(Prediction, usize)> {
    if let Some(r) = rankings.first() {
        check_max_positives(k, r.len(), allow_over_half)?;
    }
    consensus_top_k(rankings, k)
}

pub fn read_prediction(path: &Path) -> Result<Prediction> {
    Prediction::read_tsv(open(path)?).map_err(|e| match e {
        Error::EmptyInput(m) => Error::EmptyInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Builds the accuracy leaderboard for named submissions and baselines.
pub fn run_evaluate(
    gold: &GoldRecord,
    submissions: &[(String, Prediction)],
    baselines: &[(String, Prediction)],
    include_majority: bool,
) -> Result<Leaderboard> {
    let mut board = Leaderboard::default();
    for (name, pred) in submissions {
        board.push_submission(name, pred, gold)?;
    }
    for (name, pred) in baselines {
        board.push_baseline(name, pred, gold)?;
    }
    if include_majority {
        board.push_baseline("Majority Class Baseline", &majority_baseline(gold.targets())?, gold)?;
    }
    Ok(board.sorted())
}

pub fn run_analyze(usage_files: &[PathBuf], patterns: &[String]) -> Result<Vec<UsageProfile>> {
    usage_files
        .iter()
        .map(|path| {
            let usages = read_usages(open(path)?)?;
            let Some(first) = usages.first() else {
                return Err(Error::EmptyInput(format!("{}: no usages", path.display())));
            };
            let pats = patterns
                .iter()
                .map(|p| Collocation::parse(p, &first.target))
                .collect::<Result<Vec<_>>>()?;
            UsageProfile::build(&usages, &pats)
        })
        .collect()
}

pub fn run_baseline_freq(
    corpora: [&Corpus; 2],
    targets: &[String],
    k: usize,
    allow_over_half: bool,
) -> Result<(ScoreTable, Prediction)> {
    check_max_positives(k, targets.len(), allow_over_half)?;
    frequency_baseline(corpora[0], corpora[1], targets, k)
}
