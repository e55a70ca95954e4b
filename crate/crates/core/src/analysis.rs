//! Error-analysis probes over extracted usages: how often the target is
//! capitalised, and how often it appears inside a fixed collocation.

use std::collections::BTreeMap;
use std::io::Write;

use crate::corpus::{fold, Period, Usage};
use crate::error::{Error, Result};
use crate::evaluation::Rate;

/// A lemma sequence containing the target exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collocation {
    lemmas: Vec<String>,
    anchor: usize,
}

impl Collocation {
    pub fn new<S: AsRef<str>>(lemmas: &[S], target: &str) -> Result<Self> {
        let lemmas: Vec<String> = lemmas.iter().map(|l| fold(l.as_ref())).collect();
        let target = fold(target);
        let hits: Vec<usize> = lemmas
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == target)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [anchor] => Ok(Collocation {
                lemmas,
                anchor: *anchor,
            }),
            [] => Err(Error::invalid(format!(
                "pattern `{}` does not contain target `{target}`",
                lemmas.join(" ")
            ))),
            _ => Err(Error::invalid(format!(
                "pattern `{}` contains target `{target}` more than once",
                lemmas.join(" ")
            ))),
        }
    }

    /// Whitespace-separated pattern text, e.g. `cavallino rampante`.
    pub fn parse(text: &str, target: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        Self::new(&parts, target)
    }

    pub fn label(&self) -> String {
        self.lemmas.join(" ")
    }

    /// True if the pattern lines up with the usage context around the target.
    pub fn matches(&self, usage: &Usage) -> bool {
        let Some(start) = usage.target_offset.checked_sub(self.anchor) else {
            return false;
        };
        let Some(window) = usage.context.get(start..start + self.lemmas.len()) else {
            return false;
        };
        window
            .iter()
            .zip(&self.lemmas)
            .all(|(tok, lemma)| fold(&tok.lemma) == *lemma)
    }
}

fn non_empty(usages: &[Usage]) -> Result<()> {
    if usages.is_empty() {
        Err(Error::EmptyInput("no usages to analyse".into()))
    } else {
        Ok(())
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

/// Share of usages whose target surface starts with an upper-case letter.
pub fn uppercase_share(usages: &[Usage]) -> Result<Rate> {
    non_empty(usages)?;
    let hits = usages
        .iter()
        .filter(|u| starts_upper(&u.target_token().surface))
        .count();
    Ok(Rate {
        hits: hits as u64,
        total: usages.len() as u64,
    })
}

/// Share of usages in which `pattern` occurs anchored on the target token.
pub fn collocation_share(usages: &[Usage], pattern: &Collocation) -> Result<Rate> {
    non_empty(usages)?;
    let hits = usages.iter().filter(|u| pattern.matches(u)).count();
    Ok(Rate {
        hits: hits as u64,
        total: usages.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageProfile {
    pub target: String,
    pub period: Period,
    pub total_usages: usize,
    pub uppercase_count: usize,
    pub collocation_counts: BTreeMap<String, usize>,
}

impl UsageProfile {
    pub fn build(usages: &[Usage], patterns: &[Collocation]) -> Result<Self> {
        non_empty(usages)?;
        let first = &usages[0];
        if let Some(u) = usages
            .iter()
            .find(|u| u.target != first.target || u.period != first.period)
        {
            return Err(Error::invalid(format!(
                "mixed usages: {}/{} and {}/{}",
                first.target, first.period, u.target, u.period
            )));
        }
        let collocation_counts = patterns
            .iter()
            .map(|p| Ok((p.label(), collocation_share(usages, p)?.hits as usize)))
            .collect::<Result<_>>()?;
        Ok(UsageProfile {
            target: first.target.clone(),
            period: first.period,
            total_usages: usages.len(),
            uppercase_count: uppercase_share(usages)?.hits as usize,
            collocation_counts,
        })
    }

    fn rate(&self, hits: usize) -> Rate {
        Rate {
            hits: hits as u64,
            total: self.total_usages as u64,
        }
    }

    /// Report lines `target<TAB>period<TAB>metric<TAB>value`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (t, p) = (&self.target, self.period);
        writeln!(out, "{t}\t{p}\ttotal_usages\t{}", self.total_usages)?;
        writeln!(out, "{t}\t{p}\tuppercase_share\t{}", self.rate(self.uppercase_count))?;
        for (pattern, &n) in &self.collocation_counts {
            writeln!(out, "{t}\t{p}\tcollocation_share:{pattern}\t{}", self.rate(n))?;
        }
        Ok(())
    }
}

pub const ANALYSIS_HEADER: &str = "target\tperiod\tmetric\tvalue";
