//! Time-sliced corpora and target usage extraction.
//!
//! A corpus file holds one sentence per blank-line-delimited block. Each line
//! is a token written as `surface[\tlemma[\tpos]]`; a missing lemma defaults to
//! the surface form.
//!
//! Extraction records every matching token occurrence as its own [`Usage`], so
//! a sentence containing the target twice contributes two usages. The usage cap
//! therefore counts occurrences, not sentences.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{derive_seed, sample_indices};

/// One of the two time periods being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    #[serde(rename = "t1")]
    T1,
    #[serde(rename = "t2")]
    T2,
}

impl Period {
    pub const BOTH: [Period; 2] = [Period::T1, Period::T2];

    pub fn as_str(self) -> &'static str {
        match self {
            Period::T1 => "t1",
            Period::T2 => "t2",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1" => Ok(Period::T1),
            "t2" => Ok(Period::T2),
            other => Err(Error::invalid(format!(
                "unknown period `{other}` (expected t1 or t2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>, lemma: impl Into<String>, pos: Option<&str>) -> Self {
        Token {
            surface: surface.into(),
            lemma: lemma.into(),
            pos: pos.map(str::to_owned),
        }
    }

    /// True if this token is an occurrence of `target` under `mode`.
    pub fn matches(&self, target_folded: &str, mode: MatchMode) -> bool {
        match mode {
            MatchMode::AnyTokenForm => {
                fold(&self.surface) == target_folded || fold(&self.lemma) == target_folded
            }
            MatchMode::LemmaForm => fold(&self.lemma) == target_folded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub period: Period,
    pub sentences: Vec<Sentence>,
}

/// How a token is matched against a target lemma. Both modes are case-folded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Surface form or lemma equals the target.
    #[default]
    AnyTokenForm,
    /// Lemma equals the target.
    LemmaForm,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" | "any-token-form" => Ok(MatchMode::AnyTokenForm),
            "lemma" | "lemma-form" => Ok(MatchMode::LemmaForm),
            other => Err(Error::invalid(format!("unknown match mode `{other}`"))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::AnyTokenForm => "any-token-form",
            MatchMode::LemmaForm => "lemma-form",
        })
    }
}

pub(crate) fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// A single occurrence of a target word together with its context window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub target: String,
    pub period: Period,
    pub sentence_index: usize,
    pub token_index: usize,
    pub target_offset: usize,
    pub window_radius: usize,
    #[serde(rename = "tokens")]
    pub context: Vec<Token>,
}

impl Usage {
    /// Key linking this usage to its records in an embedding file:
    /// `target:period:sentence_index:token_index`.
    pub fn key(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.target, self.period, self.sentence_index, self.token_index
        )
    }

    pub fn target_token(&self) -> &Token {
        &self.context[self.target_offset]
    }
}

/// Options for [`extract_usages`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub mode: MatchMode,
    pub window_radius: usize,
    /// `None` keeps every occurrence.
    pub max_usages: Option<usize>,
    pub seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            mode: MatchMode::AnyTokenForm,
            window_radius: 1,
            max_usages: Some(200),
            seed: 0,
        }
    }
}

/// Parses a corpus in the blank-line-delimited TSV format.
pub fn parse_corpus<R: BufRead>(reader: R, period: Period) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();

    let flush = |current: &mut Vec<Token>, sentences: &mut Vec<Sentence>| {
        if !current.is_empty() {
            sentences.push(Sentence {
                index: sentences.len(),
                tokens: std::mem::take(current),
            });
        }
    };

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            flush(&mut current, &mut sentences);
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() > 3 {
            return Err(Error::parse(
                line_no,
                format!("expected 1 to 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let surface = cols[0];
        if surface.is_empty() {
            return Err(Error::parse(line_no, "empty surface form"));
        }
        let lemma = match cols.get(1) {
            Some(l) if !l.is_empty() => *l,
            _ => surface,
        };
        let pos = cols.get(2).copied().filter(|p| !p.is_empty());
        current.push(Token::new(surface, lemma, pos));
    }
    flush(&mut current, &mut sentences);

    if sentences.is_empty() {
        return Err(Error::EmptyInput(format!("corpus for {period} has no sentences")));
    }
    Ok(Corpus { period, sentences })
}

impl Corpus {
    pub fn from_path(path: impl AsRef<Path>, period: Period) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_corpus(std::io::BufReader::new(file), period).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    }

    pub fn token_total(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// (sentence, token) positions of every token matching `target`.
    fn matches(&self, target: &str, mode: MatchMode) -> Vec<(usize, usize)> {
        let folded = fold(target);
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(si, s)| {
                let folded = &folded;
                s.tokens
                    .iter()
                    .enumerate()
                    .filter(move |(_, t)| t.matches(folded, mode))
                    .map(move |(ti, _)| (si, ti))
            })
            .collect()
    }

    fn usage_at(&self, target: &str, pos: (usize, usize), window_radius: usize) -> Usage {
        let (si, ti) = pos;
        let first = si.saturating_sub(window_radius);
        let last = (si + window_radius).min(self.sentences.len() - 1);
        let window = &self.sentences[first..=last];
        let before: usize = window[..si - first].iter().map(|s| s.tokens.len()).sum();
        Usage {
            target: target.to_owned(),
            period: self.period,
            sentence_index: self.sentences[si].index,
            token_index: ti,
            target_offset: before + ti,
            window_radius,
            context: window.iter().flat_map(|s| s.tokens.iter().cloned()).collect(),
        }
    }
}

/// Extracts windowed usages of `target`, capped by a seeded uniform sample.
///
/// The sample is drawn without replacement with a seed derived from
/// `(opts.seed, target, period)`; the result is always ordered by
/// `(sentence_index, token_index)`. No matches yields an empty vector.
pub fn extract_usages(corpus: &Corpus, target: &str, opts: &ExtractOptions) -> Result<Vec<Usage>> {
    if opts.max_usages == Some(0) {
        return Err(Error::invalid("max_usages must be at least 1"));
    }
    let matches = corpus.matches(target, opts.mode);
    let keep = match opts.max_usages {
        Some(cap) if matches.len() > cap => {
            let seed = derive_seed(opts.seed, &[target, corpus.period.as_str()]);
            sample_indices(matches.len(), cap, seed)
        }
        _ => (0..matches.len()).collect(),
    };
    Ok(keep
        .into_iter()
        .map(|i| corpus.usage_at(target, matches[i], opts.window_radius))
        .collect())
}

/// Returns `(matching tokens, all tokens)` for `target` in `corpus`.
pub fn count_frequency(corpus: &Corpus, target: &str, mode: MatchMode) -> (usize, usize) {
    let folded = fold(target);
    let count = corpus
        .sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .filter(|t| t.matches(&folded, mode))
        .count();
    (count, corpus.token_total())
}

/// Writes usages as JSON Lines.
pub fn write_usages<W: Write>(mut out: W, usages: &[Usage]) -> Result<()> {
    let wrap = |e: std::io::Error| Error::io("<usage dump>", e);
    for usage in usages {
        serde_json::to_writer(&mut out, usage)
            .map_err(|e| Error::invalid(format!("failed to serialize usage: {e}")))?;
        out.write_all(b"\n").map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}

/// Reads a usage dump written by [`write_usages`].
pub fn read_usages<R: BufRead>(reader: R) -> Result<Vec<Usage>> {
    let mut usages = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let usage: Usage =
            serde_json::from_str(&line).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        if usage.target_offset >= usage.context.len() {
            return Err(Error::parse(n + 1, "target_offset outside context"));
        }
        usages.push(usage);
    }
    Ok(usages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(text: &str) -> Corpus {
        parse_corpus(text.as_bytes(), Period::T1).unwrap()
    }

    #[test]
    fn blocks_become_sentences() {
        let c = corpus("a\nb\nc\n\n\nd\ne\n");
        let lens: Vec<usize> = c.sentences.iter().map(|s| s.tokens.len()).collect();
        assert_eq!(lens, vec![3, 2]);
        assert_eq!(c.sentences[1].index, 1);
    }

    #[test]
    fn token_columns() {
        let c = corpus("casa\tcasa\tNOUN\ncase\tcasa\nCasa\n");
        let t = &c.sentences[0].tokens;
        assert_eq!(t[0], Token::new("casa", "casa", Some("NOUN")));
        assert_eq!(t[1], Token::new("case", "casa", None));
        assert_eq!(t[2], Token::new("Casa", "Casa", None));
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let err = parse_corpus("a\nb\tb\tX\textra\n".as_bytes(), Period::T2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_corpus("\tlemma\n".as_bytes(), Period::T1),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_corpus("".as_bytes(), Period::T1), Err(Error::EmptyInput(_))));
        assert!(matches!(parse_corpus("\n \n".as_bytes(), Period::T1), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn all_occurrences_under_cap() {
        let c = corpus("x\ncasa\n\ncasa\ncasa\n\ny\n\ncasa\n\ncasa\n");
        let u = extract_usages(&c, "casa", &ExtractOptions::default()).unwrap();
        assert_eq!(u.len(), 5);
        let pos: Vec<(usize, usize)> = u.iter().map(|u| (u.sentence_index, u.token_index)).collect();
        assert_eq!(pos, vec![(0, 1), (1, 0), (1, 1), (3, 0), (4, 0)]);
    }

    #[test]
    fn window_truncates_at_edges() {
        let c = corpus("casa\nx\n\ny\n\nz\n");
        let opts = ExtractOptions { window_radius: 1, ..Default::default() };
        let u = &extract_usages(&c, "casa", &opts).unwrap()[0];
        let surfaces: Vec<&str> = u.context.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["casa", "x", "y"]);
        assert_eq!(u.target_offset, 0);
    }

    #[test]
    fn target_offset_counts_preceding_sentences() {
        let c = corpus("a\nb\n\nc\ncasa\n\nd\n");
        let opts = ExtractOptions { window_radius: 1, ..Default::default() };
        let u = &extract_usages(&c, "casa", &opts).unwrap()[0];
        assert_eq!(u.target_offset, 3);
        assert_eq!(u.target_token().surface, "casa");
        assert_eq!(u.context.len(), 5);
    }

    #[test]
    fn zero_radius_keeps_only_the_sentence() {
        let c = corpus("a\n\nb\ncasa\n\nc\n");
        let opts = ExtractOptions { window_radius: 0, ..Default::default() };
        let u = &extract_usages(&c, "casa", &opts).unwrap()[0];
        assert_eq!(u.context, c.sentences[1].tokens);
    }

    #[test]
    fn match_modes() {
        let c = corpus("Case\tcasa\ncasa\tcasa\nCASA\tCASA\ncasetta\tcasetta\n");
        let any = extract_usages(&c, "casa", &ExtractOptions::default()).unwrap();
        assert_eq!(any.len(), 3);
        let c2 = corpus("case\tcasa\ncase\tcaso\n");
        let lemma = ExtractOptions { mode: MatchMode::LemmaForm, ..Default::default() };
        assert_eq!(extract_usages(&c2, "case", &lemma).unwrap().len(), 0);
        assert_eq!(extract_usages(&c2, "case", &ExtractOptions::default()).unwrap().len(), 2);
        assert_eq!(extract_usages(&c2, "casa", &lemma).unwrap().len(), 1);
    }

    #[test]
    fn no_matches_is_empty() {
        let c = corpus("a\nb\n");
        assert!(extract_usages(&c, "casa", &ExtractOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn zero_cap_rejected() {
        let c = corpus("a\n");
        let opts = ExtractOptions { max_usages: Some(0), ..Default::default() };
        assert!(extract_usages(&c, "a", &opts).is_err());
    }

    #[test]
    fn frequency_counts() {
        let c = corpus("a\na\nb\n");
        assert_eq!(count_frequency(&c, "a", MatchMode::AnyTokenForm), (2, 3));
        assert_eq!(count_frequency(&c, "zzz", MatchMode::AnyTokenForm), (0, 3));
    }

    #[test]
    fn usage_json_shape() {
        let c = corpus("casa\tcasa\tNOUN\nè\n");
        let opts = ExtractOptions { window_radius: 0, ..Default::default() };
        let u = extract_usages(&c, "casa", &opts).unwrap();
        let mut buf = Vec::new();
        write_usages(&mut buf, &u).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"target\":\"casa\",\"period\":\"t1\",\"sentence_index\":0,\"token_index\":0,\
             \"target_offset\":0,\"window_radius\":0,\"tokens\":[{\"surface\":\"casa\",\
             \"lemma\":\"casa\",\"pos\":\"NOUN\"},{\"surface\":\"è\",\"lemma\":\"è\"}]}\n"
        );
        assert_eq!(read_usages(buf.as_slice()).unwrap(), u);
        assert_eq!(u[0].key(), "casa:t1:0:0");
    }

    fn arb_corpus() -> impl Strategy<Value = String> {
        let token = prop_oneof![
            Just("casa\tcasa"),
            Just("Casa\tcasa"),
            Just("case\tcasa"),
            Just("x\tx"),
            Just("casa\tcaso"),
        ];
        prop::collection::vec(prop::collection::vec(token, 1..6), 1..30).prop_map(|sents| {
            sents
                .into_iter()
                .map(|s| s.join("\n"))
                .collect::<Vec<_>>()
                .join("\n\n")
        })
    }

    proptest! {
        #[test]
        fn sampled_is_subset_and_deterministic(text in arb_corpus(), cap in 1usize..10, seed: u64, radius in 0usize..3) {
            let c = corpus(&text);
            let full = ExtractOptions { max_usages: None, window_radius: radius, seed, ..Default::default() };
            let capped = ExtractOptions { max_usages: Some(cap), ..full };
            let all = extract_usages(&c, "casa", &full).unwrap();
            let some = extract_usages(&c, "casa", &capped).unwrap();
            prop_assert_eq!(some.len(), all.len().min(cap));
            prop_assert!(some.iter().all(|u| all.contains(u)));
            prop_assert_eq!(&some, &extract_usages(&c, "casa", &capped).unwrap());
            prop_assert!(some.windows(2).all(|w| (w[0].sentence_index, w[0].token_index) < (w[1].sentence_index, w[1].token_index)));
        }

        #[test]
        fn frequency_matches_uncapped_extraction(text in arb_corpus(), lemma_mode: bool) {
            let c = corpus(&text);
            let mode = if lemma_mode { MatchMode::LemmaForm } else { MatchMode::AnyTokenForm };
            let opts = ExtractOptions { mode, max_usages: None, ..Default::default() };
            let n = extract_usages(&c, "casa", &opts).unwrap().len();
            prop_assert_eq!(count_frequency(&c, "casa", mode).0, n);
        }

        #[test]
        fn lemma_matches_within_any_form(text in arb_corpus()) {
            let c = corpus(&text);
            let any = ExtractOptions { max_usages: None, ..Default::default() };
            let lemma = ExtractOptions { mode: MatchMode::LemmaForm, ..any };
            let a = extract_usages(&c, "casa", &any).unwrap();
            let l = extract_usages(&c, "casa", &lemma).unwrap();
            prop_assert!(l.iter().all(|u| a.contains(u)));
        }
    }
}
