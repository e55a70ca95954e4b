//! Ranking graded scores and turning them into binary change labels.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::measures::ScoreTable;

/// Targets ordered by descending score; ties broken by ascending target.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    entries: Vec<(String, f64)>,
}

impl Ranking {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, k: usize) -> BTreeSet<&str> {
        self.targets().take(k).collect()
    }
}

/// Binary labels keyed by target, kept in target order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Prediction {
    pub labels: BTreeMap<String, bool>,
}

impl Prediction {
    pub fn positives(&self) -> usize {
        self.labels.values().filter(|&&l| l).count()
    }

    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, bool)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (t, l) in labels {
            let t = t.into();
            if map.insert(t.clone(), l).is_some() {
                return Err(Error::Duplicate(t));
            }
        }
        Ok(Prediction { labels: map })
    }

    /// TSV `target<TAB>label`, sorted by target.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, &l) in &self.labels {
            writeln!(out, "{t}\t{}", u8::from(l))?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let labels = read_binary_labels(reader)?;
        if labels.is_empty() {
            return Err(Error::EmptyInput("prediction file has no labels".into()));
        }
        Self::from_labels(labels)
    }
}

/// Reads `target<TAB>0|1` lines.
pub(crate) fn read_binary_labels<R: BufRead>(reader: R) -> Result<Vec<(String, bool)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(target), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(line_no, "expected `target<TAB>label`"));
        };
        let label = match label.trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(line_no, format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push((target.to_owned(), label));
    }
    Ok(out)
}

pub fn rank_targets(scores: &ScoreTable) -> Result<Ranking> {
    let mut seen = BTreeSet::new();
    for r in &scores.rows {
        if !seen.insert(r.target.as_str()) {
            return Err(Error::Duplicate(r.target.clone()));
        }
        if r.score.is_nan() {
            return Err(Error::invalid(format!("score for `{}` is NaN", r.target)));
        }
    }
    let mut entries: Vec<(String, f64)> =
        scores.rows.iter().map(|r| (r.target.clone(), r.score)).collect();
    entries.sort_by(|(ta, sa), (tb, sb)| match sb.total_cmp(sa) {
        Ordering::Equal => ta.cmp(tb),
        o => o,
    });
    Ok(Ranking { entries })
}

/// Labels the first `k` targets of `ranking` as changed.
pub fn label_top_k(ranking: &Ranking, k: usize) -> Result<Prediction> {
    if k > ranking.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of targets ({})",
            ranking.len()
        )));
    }
    Ok(Prediction {
        labels: ranking
            .targets()
            .enumerate()
            .map(|(i, t)| (t.to_owned(), i < k))
            .collect(),
    })
}

/// Labels as changed exactly the targets in every ranking's top `k`.
///
/// Returns the prediction and the size of the agreement set.
pub fn consensus_top_k(rankings: &[Ranking], k: usize) -> Result<(Prediction, usize)> {
    let first = rankings
        .first()
        .ok_or_else(|| Error::invalid("consensus needs at least one ranking"))?;
    let universe: BTreeSet<String> = first.targets().map(str::to_owned).collect();
    for r in &rankings[1..] {
        let other: BTreeSet<String> = r.targets().map(str::to_owned).collect();
        if let Some(e) = Error::target_mismatch(&universe, &other) {
            return Err(e);
        }
    }
    if k > universe.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of targets ({})",
            universe.len()
        )));
    }
    let mut agreed: BTreeSet<&str> = first.top(k);
    for r in &rankings[1..] {
        let top = r.top(k);
        agreed.retain(|t| top.contains(t));
    }
    let labels = universe
        .iter()
        .map(|t| (t.clone(), agreed.contains(t.as_str())))
        .collect();
    Ok((Prediction { labels }, agreed.len()))
}

/// Rejects `k` above half the targets (rounded up) unless `allow` is set.
pub fn check_max_positives(k: usize, targets: usize, allow: bool) -> Result<()> {
    let limit = targets.div_ceil(2);
    if k > limit && !allow {
        return Err(Error::invalid(format!(
            "k = {k} labels more than half of {targets} targets (limit {limit}); \
             pass --allow-over-half to override"
        )));
    }
    Ok(())
}
