//! Graded change measures over two usage vector sets.
//!
//! All pairwise sums use a fixed order: for APD each row `v ∈ V` is summed over
//! `W` in order with Neumaier compensation, and the row totals are then summed
//! in row order the same way. Rows may be evaluated on several threads; the
//! reduction order does not depend on scheduling, so results are identical to
//! a sequential run.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::embeddings::UsageVectorSet;
use crate::error::{Error, Result};
use crate::sampling::{derive_seed, sample_indices};
use crate::scalar::{CompensatedSum, Scalar};

/// How APD chooses the vectors to compare.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ApdMode {
    /// Every `|V| × |W|` pair.
    #[default]
    Exhaustive,
    /// At most `sample_size` vectors from each side, drawn without replacement
    /// using a seed specialised per (target, period).
    Sampled { sample_size: usize, seed: u64 },
}

/// A registered change measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Apd(ApdMode),
    /// Cosine distance between the two centroids.
    Cos,
}

impl Measure {
    pub fn id(&self) -> &'static str {
        match self {
            Measure::Apd(ApdMode::Exhaustive) => "apd",
            Measure::Apd(ApdMode::Sampled { .. }) => "apd-sampled",
            Measure::Cos => "cos",
        }
    }

    pub fn score<T: Scalar>(
        &self,
        v: &UsageVectorSet<T>,
        w: &UsageVectorSet<T>,
    ) -> Result<ChangeScore<T>> {
        match self {
            Measure::Apd(mode) => apd(v, w, *mode),
            Measure::Cos => cos_centroid(v, w),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apd" => Ok(Measure::Apd(ApdMode::Exhaustive)),
            "cos" => Ok(Measure::Cos),
            other => Err(Error::invalid(format!("unknown measure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScore<T> {
    pub target: String,
    pub value: T,
    pub measure: String,
    pub config: String,
}

impl<T: Scalar> ChangeScore<T> {
    pub fn with_config(mut self, config: impl Into<String>) -> Self {
        self.config = config.into();
        self
    }
}

#[inline]
fn parts<T: Scalar>(v: &[T], w: &[T]) -> (T, T, T) {
    v.iter()
        .zip(w)
        .fold((T::zero(), T::zero(), T::zero()), |(vw, vv, ww), (&x, &y)| {
            (vw + x * y, vv + x * x, ww + y * y)
        })
}

#[inline]
fn squared_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

#[inline]
fn dot<T: Scalar>(v: &[T], w: &[T]) -> T {
    v.iter().zip(w).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn distance_from_parts<T: Scalar>(vw: T, vv: T, ww: T) -> T {
    let two = T::one() + T::one();
    (T::one() - vw / (vv * ww).sqrt()).max(T::zero()).min(two)
}

/// `1 − (v·w)/(‖v‖‖w‖)`, clamped to `[0, 2]`.
pub fn cosine_distance<T: Scalar>(v: &[T], w: &[T]) -> Result<T> {
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch {
            key: "cosine_distance".into(),
            expected: v.len(),
            found: w.len(),
        });
    }
    let (vw, vv, ww) = parts(v, w);
    if vv.is_zero() || ww.is_zero() {
        return Err(Error::ZeroNorm("cosine distance of a zero vector".into()));
    }
    Ok(distance_from_parts(vw, vv, ww))
}

fn check_pair<T: Scalar>(v: &UsageVectorSet<T>, w: &UsageVectorSet<T>) -> Result<()> {
    for set in [v, w] {
        if set.is_empty() {
            return Err(Error::EmptyInput(format!(
                "no vectors for `{}` in {}",
                set.target, set.period
            )));
        }
    }
    if v.dimension != w.dimension {
        return Err(Error::DimensionMismatch {
            key: v.target.clone(),
            expected: v.dimension,
            found: w.dimension,
        });
    }
    Ok(())
}

fn norms<T: Scalar>(set: &UsageVectorSet<T>, rows: &[usize]) -> Result<Vec<T>> {
    rows.iter()
        .map(|&i| {
            let n = squared_norm(&set.vectors[i]);
            if n.is_zero() {
                Err(Error::ZeroNorm(format!(
                    "vector {i} of `{}` in {}",
                    set.target, set.period
                )))
            } else {
                Ok(n)
            }
        })
        .collect()
}

fn mean_pairwise<T: Scalar>(
    v: &UsageVectorSet<T>,
    v_rows: &[usize],
    w: &UsageVectorSet<T>,
    w_rows: &[usize],
) -> Result<T> {
    let v_norms = norms(v, v_rows)?;
    let w_norms = norms(w, w_rows)?;
    let row_totals: Vec<T> = v_rows
        .par_iter()
        .zip(v_norms.par_iter())
        .map(|(&i, &vv)| {
            let a = &v.vectors[i];
            w_rows
                .iter()
                .zip(&w_norms)
                .map(|(&j, &ww)| distance_from_parts(dot(a, &w.vectors[j]), vv, ww))
                .collect::<CompensatedSum<T>>()
                .total()
        })
        .collect();
    let total = row_totals.into_iter().collect::<CompensatedSum<T>>().total();
    let pairs = T::from_usize(v_rows.len() * w_rows.len())
        .ok_or_else(|| Error::invalid("too many pairs for scalar type"))?;
    let two = T::one() + T::one();
    Ok((total / pairs).max(T::zero()).min(two))
}

/// Average pairwise cosine distance between `v` and `w`.
pub fn apd<T: Scalar>(
    v: &UsageVectorSet<T>,
    w: &UsageVectorSet<T>,
    mode: ApdMode,
) -> Result<ChangeScore<T>> {
    check_pair(v, w)?;
    let measure = Measure::Apd(mode);
    let (v_rows, w_rows) = match mode {
        ApdMode::Exhaustive => ((0..v.len()).collect(), (0..w.len()).collect()),
        ApdMode::Sampled { sample_size, seed } => {
            if sample_size == 0 {
                return Err(Error::invalid("sample_size must be at least 1"));
            }
            let pick = |set: &UsageVectorSet<T>| {
                let s = derive_seed(seed, &[&set.target, set.period.as_str()]);
                sample_indices(set.len(), sample_size, s)
            };
            (pick(v), pick(w))
        }
    };
    let value = mean_pairwise(v, &v_rows, w, &w_rows)?;
    Ok(ChangeScore {
        target: v.target.clone(),
        value,
        measure: measure.id().into(),
        config: String::new(),
    })
}

fn centroid<T: Scalar>(set: &UsageVectorSet<T>) -> Vec<T> {
    let n = T::from_usize(set.len()).unwrap_or_else(T::nan);
    (0..set.dimension)
        .map(|d| {
            set.vectors
                .iter()
                .map(|v| v[d])
                .collect::<CompensatedSum<T>>()
                .total()
                / n
        })
        .collect()
}

/// Cosine distance between the component-wise means of `v` and `w`.
pub fn cos_centroid<T: Scalar>(
    v: &UsageVectorSet<T>,
    w: &UsageVectorSet<T>,
) -> Result<ChangeScore<T>> {
    check_pair(v, w)?;
    let (cv, cw) = (centroid(v), centroid(w));
    let value = cosine_distance(&cv, &cw).map_err(|e| match e {
        Error::ZeroNorm(_) => Error::ZeroNorm(format!("centroid of `{}`", v.target)),
        other => other,
    })?;
    Ok(ChangeScore {
        target: v.target.clone(),
        value,
        measure: Measure::Cos.id().into(),
        config: String::new(),
    })
}

/// One row of a score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub target: String,
    pub score: f64,
    pub measure: String,
    pub config: String,
}

impl<T: Scalar> From<ChangeScore<T>> for ScoreRow {
    fn from(s: ChangeScore<T>) -> Self {
        ScoreRow {
            target: s.target,
            score: s.value.to_f64_lossless(),
            measure: s.measure,
            config: s.config,
        }
    }
}

/// Graded scores, written as TSV `target score measure config` with six decimals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

pub const SCORE_HEADER: &str = "target\tscore\tmeasure\tconfig";

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Self {
        ScoreTable { rows }
    }

    /// Builds a single-configuration table from `(target, score)` pairs.
    pub fn from_scores<'a, I>(scores: I, measure: &str, config: &str) -> Self
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        ScoreTable {
            rows: scores
                .into_iter()
                .map(|(t, s)| ScoreRow {
                    target: t.to_owned(),
                    score: s,
                    measure: measure.to_owned(),
                    config: config.to_owned(),
                })
                .collect(),
        }
    }

    /// Rows matching the optional measure and config filters.
    pub fn select(&self, measure: Option<&str>, config: Option<&str>) -> ScoreTable {
        ScoreTable {
            rows: self
                .rows
                .iter()
                .filter(|r| measure.is_none_or(|m| r.measure == m))
                .filter(|r| config.is_none_or(|c| r.config == c))
                .cloned()
                .collect(),
        }
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SCORE_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{}\t{:.6}\t{}\t{}", r.target, r.score, r.measure, r.config)?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                if line.trim_end() != SCORE_HEADER {
                    return Err(Error::parse(line_no, format!("expected header `{SCORE_HEADER}`")));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(line_no, "expected 4 columns"));
            }
            let score: f64 = cols[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad score `{}`", cols[1])))?;
            if !score.is_finite() {
                return Err(Error::parse(line_no, "score must be finite"));
            }
            rows.push(ScoreRow {
                target: cols[0].to_owned(),
                score,
                measure: cols[2].to_owned(),
                config: cols[3].to_owned(),
            });
        }
        if !saw_header {
            return Err(Error::EmptyInput("score table".into()));
        }
        Ok(ScoreTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Period;
    use proptest::prelude::*;

    fn set(period: Period, vectors: Vec<Vec<f64>>) -> UsageVectorSet<f64> {
        UsageVectorSet::new("w", period, vectors).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0f32, 0.0], &[-2.0, 0.0]).unwrap(), 2.0);
        // 1 − 32/(√14·√77), evaluated at 40 digits
        #[allow(clippy::excessive_precision)]
        let expected = 0.025_368_153_802_923_728_921_427_508_873_877_f64;
        let got = cosine_distance(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm(_))));
        assert!(matches!(
            cosine_distance(&[1.0, 0.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apd_examples() {
        let v = set(Period::T1, vec![vec![1.0, 0.0]]);
        assert_eq!(apd(&v, &v, ApdMode::Exhaustive).unwrap().value, 0.0);
        let w = set(Period::T2, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let s = apd(&v, &w, ApdMode::Exhaustive).unwrap();
        assert_eq!(s.value, 1.5);
        assert_eq!(s.measure, "apd");
    }

    #[test]
    fn apd_errors() {
        let v = set(Period::T1, vec![vec![1.0, 0.0]]);
        let empty = set(Period::T2, vec![]);
        assert!(matches!(apd(&v, &empty, ApdMode::Exhaustive), Err(Error::EmptyInput(_))));
        let zero = set(Period::T2, vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        match apd(&v, &zero, ApdMode::Exhaustive) {
            Err(Error::ZeroNorm(msg)) => assert!(msg.contains("vector 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let wide = set(Period::T2, vec![vec![1.0, 1.0, 1.0]]);
        assert!(apd(&v, &wide, ApdMode::Exhaustive).is_err());
        let bad = ApdMode::Sampled { sample_size: 0, seed: 1 };
        assert!(apd(&v, &v, bad).is_err());
    }

    #[test]
    fn centroid_examples() {
        let v = set(Period::T1, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let w = set(Period::T2, vec![vec![0.0, 2.0]]);
        assert_eq!(cos_centroid(&v, &w).unwrap().value, 1.0);
        let u = set(Period::T1, vec![vec![1.0, 2.0], vec![-3.0, 0.5]]);
        assert_eq!(cos_centroid(&u, &u).unwrap().value, 0.0);
        let opposite = set(Period::T1, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(matches!(cos_centroid(&opposite, &w), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn generic_over_f32() {
        let v = UsageVectorSet::new("w", Period::T1, vec![vec![1.0f32, 0.0]]).unwrap();
        let w = UsageVectorSet::new("w", Period::T2, vec![vec![0.0f32, 1.0], vec![-1.0, 0.0]])
            .unwrap();
        assert_eq!(apd(&v, &w, ApdMode::Exhaustive).unwrap().value, 1.5f32);
    }

    #[test]
    fn score_table_tsv() {
        let t = ScoreTable::from_scores([("a", 0.1234567), ("b", 1.0)], "apd", "first+last");
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "target\tscore\tmeasure\tconfig\na\t0.123457\tapd\tfirst+last\nb\t1.000000\tapd\tfirst+last\n"
        );
        let back = ScoreTable::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(back.rows[0].score, 0.123457);
        assert!(ScoreTable::read_tsv("a\t1\tapd\tx\n".as_bytes()).is_err());
        assert!(ScoreTable::read_tsv("".as_bytes()).is_err());
    }

    fn arb_vectors(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(
            prop::collection::vec(-5.0f64..5.0, dim)
                .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3)),
            1..8,
        )
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        (1usize..6).prop_flat_map(|d| (arb_vectors(d), arb_vectors(d)))
    }

    proptest! {
        #[test]
        fn apd_symmetric_and_bounded((a, b) in arb_pair()) {
            let (v, w) = (set(Period::T1, a), set(Period::T2, b));
            let vw = apd(&v, &w, ApdMode::Exhaustive).unwrap().value;
            let wv = apd(&w, &v, ApdMode::Exhaustive).unwrap().value;
            prop_assert!((vw - wv).abs() <= 1e-12);
            prop_assert!((0.0..=2.0).contains(&vw));
            let c = cos_centroid(&v, &w);
            if let Ok(c) = c {
                prop_assert!((0.0..=2.0).contains(&c.value));
            }
        }

        #[test]
        fn sampled_covering_equals_exhaustive((a, b) in arb_pair(), seed: u64) {
            let (v, w) = (set(Period::T1, a), set(Period::T2, b));
            let size = v.len().max(w.len());
            let s = apd(&v, &w, ApdMode::Sampled { sample_size: size, seed }).unwrap().value;
            prop_assert_eq!(s, apd(&v, &w, ApdMode::Exhaustive).unwrap().value);
        }

        #[test]
        fn self_distance_of_singleton_is_zero(v in arb_vectors(4)) {
            let s = set(Period::T1, vec![v[0].clone()]);
            prop_assert_eq!(apd(&s, &s, ApdMode::Exhaustive).unwrap().value, 0.0);
        }
    }
}
