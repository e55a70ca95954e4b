//! Scoring predictions against gold labels, plus the majority and frequency
//! baselines.
//!
//! Accuracy is kept as an exact fraction. Displayed values are rounded
//! half-to-even from that fraction, so 12/18 shows as `0.67`; the shared-task
//! leaderboard printed `.66` for the same fraction, which looks like
//! truncation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use num_rational::Ratio;

use crate::corpus::{count_frequency, Corpus, MatchMode};
use crate::decision::{label_top_k, rank_targets, read_binary_labels, Prediction};
use crate::error::{Error, Result};
use crate::measures::{ScoreRow, ScoreTable};

/// Gold binary labels with optional graded scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldRecord {
    pub labels: BTreeMap<String, bool>,
    pub graded: Option<BTreeMap<String, f64>>,
}

impl GoldRecord {
    pub fn read_binary<R: BufRead>(reader: R) -> Result<Self> {
        let labels = read_binary_labels(reader)?;
        if labels.is_empty() {
            return Err(Error::EmptyInput("gold file has no labels".into()));
        }
        let labels = Prediction::from_labels(labels)?.labels;
        Ok(GoldRecord { labels, graded: None })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(std::io::BufReader::new(file))
    }

    pub fn positives(&self) -> usize {
        self.labels.values().filter(|&&l| l).count()
    }

    pub fn targets(&self) -> impl Iterator<Item = &String> {
        self.labels.keys()
    }
}

/// Reads `target<TAB>graded_score` lines.
pub fn read_graded<R: BufRead>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(t), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(line_no, "expected `target<TAB>graded_score`"));
        };
        let v: f64 = v
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(line_no, format!("bad graded score `{v}`")))?;
        if map.insert(t.to_owned(), v).is_some() {
            return Err(Error::Duplicate(t.to_owned()));
        }
    }
    Ok(map)
}

/// An exact proportion `hits / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    pub hits: u64,
    pub total: u64,
}

impl Rate {
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.hits, self.total)
    }

    pub fn value(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }

    /// Decimal rendering rounded half-to-even at `places` digits.
    pub fn rounded(&self, places: u32) -> String {
        let scale = 10u128.pow(places);
        let num = u128::from(self.hits) * scale;
        let den = u128::from(self.total);
        let (mut q, r) = (num / den, num % den);
        if 2 * r > den || (2 * r == den && q % 2 == 1) {
            q += 1;
        }
        let int = q / scale;
        let frac = q % scale;
        if places == 0 {
            int.to_string()
        } else {
            format!("{int}.{frac:0width$}", width = places as usize)
        }
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ratio().cmp(&other.ratio())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rounded(4))
    }
}

fn check_targets(pred: &Prediction, gold: &GoldRecord) -> Result<()> {
    match Error::target_mismatch(pred.labels.keys(), gold.labels.keys()) {
        Some(e) => Err(e),
        None if gold.labels.is_empty() => Err(Error::EmptyInput("no targets".into())),
        None => Ok(()),
    }
}

pub fn accuracy(pred: &Prediction, gold: &GoldRecord) -> Result<Rate> {
    check_targets(pred, gold)?;
    let hits = gold
        .labels
        .iter()
        .filter(|(t, g)| pred.labels[*t] == **g)
        .count();
    Ok(Rate {
        hits: hits as u64,
        total: gold.labels.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(pred: &Prediction, gold: &GoldRecord) -> Result<Confusion> {
    check_targets(pred, gold)?;
    let mut c = Confusion::default();
    for (t, &g) in &gold.labels {
        match (pred.labels[t], g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// F1 of the positive class; 0 when precision + recall is 0.
pub fn f1(pred: &Prediction, gold: &GoldRecord) -> Result<f64> {
    let c = confusion(pred, gold)?;
    let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
    let precision = if c.tp + c.fp == 0 { 0.0 } else { tp / (tp + fp) };
    let recall = if c.tp + c.fn_ == 0 { 0.0 } else { tp / (tp + fn_) };
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Average (1-based) ranks, ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation between scores and graded gold.
pub fn spearman(scores: &ScoreTable, graded: &BTreeMap<String, f64>) -> Result<f64> {
    let mut by_target = BTreeMap::new();
    for r in &scores.rows {
        if by_target.insert(r.target.clone(), r.score).is_some() {
            return Err(Error::Duplicate(r.target.clone()));
        }
    }
    if let Some(e) = Error::target_mismatch(by_target.keys(), graded.keys()) {
        return Err(e);
    }
    if by_target.len() < 2 {
        return Err(Error::Undefined("spearman needs at least two targets".into()));
    }
    let x: Vec<f64> = by_target.values().copied().collect();
    let y: Vec<f64> = graded.values().copied().collect();
    pearson(&average_ranks(&x), &average_ranks(&y))
        .ok_or_else(|| Error::Undefined("spearman of a constant ranking".into()))
}

/// Predicts "no change" for every target.
pub fn majority_baseline<'a, I>(targets: I) -> Result<Prediction>
where
    I: IntoIterator<Item = &'a String>,
{
    let p = Prediction::from_labels(targets.into_iter().map(|t| (t.clone(), false)))?;
    if p.labels.is_empty() {
        return Err(Error::EmptyInput("majority baseline needs targets".into()));
    }
    Ok(p)
}

/// `|log2((f1+1)/(N1+1)) − log2((f2+1)/(N2+1))|`.
pub fn log_frequency_change(f1: usize, n1: usize, f2: usize, n2: usize) -> f64 {
    let rel = |f: usize, n: usize| ((f as f64 + 1.0) / (n as f64 + 1.0)).log2();
    (rel(f1, n1) - rel(f2, n2)).abs()
}

/// Frequency-change scores (any-token-form counts) and their top-k labels.
pub fn frequency_baseline(
    c1: &Corpus,
    c2: &Corpus,
    targets: &[String],
    k: usize,
) -> Result<(ScoreTable, Prediction)> {
    let rows = targets
        .iter()
        .map(|t| {
            let (f1, n1) = count_frequency(c1, t, MatchMode::AnyTokenForm);
            let (f2, n2) = count_frequency(c2, t, MatchMode::AnyTokenForm);
            ScoreRow {
                target: t.clone(),
                score: log_frequency_change(f1, n1, f2, n2),
                measure: "freq".into(),
                config: MatchMode::AnyTokenForm.to_string(),
            }
        })
        .collect();
    let table = ScoreTable::new(rows);
    let pred = label_top_k(&rank_targets(&table)?, k)?;
    Ok((table, pred))
}

/// One leaderboard row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub submission: String,
    /// Number of targets labelled as changed; `None` for baselines.
    pub threshold: Option<usize>,
    pub accuracy: Rate,
    pub baseline: bool,
}

/// Accuracy leaderboard, sorted by accuracy (descending), then submissions
/// before baselines, then by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Leaderboard {
    pub entries: Vec<Entry>,
}

impl Leaderboard {
    pub fn push_submission(&mut self, name: &str, pred: &Prediction, gold: &GoldRecord) -> Result<()> {
        self.entries.push(Entry {
            submission: name.into(),
            threshold: Some(pred.positives()),
            accuracy: accuracy(pred, gold)?,
            baseline: false,
        });
        Ok(())
    }

    pub fn push_baseline(&mut self, name: &str, pred: &Prediction, gold: &GoldRecord) -> Result<()> {
        self.entries.push(Entry {
            submission: name.into(),
            threshold: None,
            accuracy: accuracy(pred, gold)?,
            baseline: true,
        });
        Ok(())
    }

    pub fn sorted(mut self) -> Self {
        self.entries.sort_by(|a, b| {
            b.accuracy
                .cmp(&a.accuracy)
                .then(a.baseline.cmp(&b.baseline))
                .then_with(|| a.submission.cmp(&b.submission))
        });
        self
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "submission\tthreshold\taccuracy")?;
        for e in &self.entries {
            let thr = e.threshold.map_or_else(|| "-".to_owned(), |t| t.to_string());
            writeln!(out, "{}\t{thr}\t{}", e.submission, e.accuracy.rounded(4))?;
        }
        out.flush()
    }
}
