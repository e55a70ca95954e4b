//! Per-layer usage vectors and layer combination.
//!
//! The wire format is JSON Lines. The first line is a header
//! `{"target", "period", "dimension", "layer_count"}`; every following line is
//! one `{"usage_key", "layer", "vector"}` record. Layers are numbered from 1
//! (first encoder output layer) to `layer_count` (last). Vectors are stored as
//! `f32` and averaged in `f64`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Period;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    target: String,
    period: Period,
    dimension: usize,
    layer_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    usage_key: String,
    layer: usize,
    vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredUsage {
    pub key: String,
    pub layers: BTreeMap<usize, Vec<f32>>,
}

/// Per-usage, per-layer vectors of one target in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEmbeddingSet {
    pub target: String,
    pub period: Period,
    pub dimension: usize,
    pub layer_count: usize,
    pub usages: Vec<LayeredUsage>,
}

impl LayerEmbeddingSet {
    /// Validates and assembles a set; usages keep their given order.
    pub fn new(
        target: impl Into<String>,
        period: Period,
        dimension: usize,
        layer_count: usize,
        usages: Vec<LayeredUsage>,
    ) -> Result<Self> {
        if dimension == 0 || layer_count == 0 {
            return Err(Error::invalid("dimension and layer_count must be positive"));
        }
        let mut seen = BTreeSet::new();
        let mut expected_layers: Option<Vec<usize>> = None;
        for u in &usages {
            if !seen.insert(u.key.as_str()) {
                return Err(Error::Duplicate(u.key.clone()));
            }
            for (&layer, v) in &u.layers {
                if layer == 0 || layer > layer_count {
                    return Err(Error::UnknownLayer { layer, layer_count });
                }
                if v.len() != dimension {
                    return Err(Error::DimensionMismatch {
                        key: u.key.clone(),
                        expected: dimension,
                        found: v.len(),
                    });
                }
            }
            let layers: Vec<usize> = u.layers.keys().copied().collect();
            match &expected_layers {
                None => expected_layers = Some(layers),
                Some(exp) if *exp != layers => {
                    return Err(Error::invalid(format!(
                        "usage `{}` carries layers {layers:?}, expected {exp:?}",
                        u.key
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(LayerEmbeddingSet {
            target: target.into(),
            period,
            dimension,
            layer_count,
            usages,
        })
    }

    /// Layer indices present on every usage.
    pub fn available_layers(&self) -> BTreeSet<usize> {
        self.usages
            .first()
            .map(|u| u.layers.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_embedding_file(std::io::BufReader::new(file))
    }
}

/// Parses the embedding wire format.
pub fn parse_embedding_file<R: BufRead>(reader: R) -> Result<LayerEmbeddingSet> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(n, l)| l.map(|l| (n + 1, l)).map_err(|e| Error::parse(n + 1, e.to_string())))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput("embedding file has no header".into()))??;
    let header: Header = serde_json::from_str(&header)
        .map_err(|e| Error::parse(line_no, format!("bad header: {e}")))?;
    if header.dimension == 0 || header.layer_count == 0 {
        return Err(Error::parse(line_no, "dimension and layer_count must be positive"));
    }

    let mut usages: Vec<LayeredUsage> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for item in lines {
        let (line_no, line) = item?;
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if rec.layer == 0 || rec.layer > header.layer_count {
            return Err(Error::UnknownLayer {
                layer: rec.layer,
                layer_count: header.layer_count,
            });
        }
        if rec.vector.len() != header.dimension {
            return Err(Error::DimensionMismatch {
                key: rec.usage_key,
                expected: header.dimension,
                found: rec.vector.len(),
            });
        }
        let slot = *index.entry(rec.usage_key.clone()).or_insert_with(|| {
            usages.push(LayeredUsage {
                key: rec.usage_key.clone(),
                layers: BTreeMap::new(),
            });
            usages.len() - 1
        });
        if usages[slot].layers.insert(rec.layer, rec.vector).is_some() {
            return Err(Error::Duplicate(format!("{} layer {}", rec.usage_key, rec.layer)));
        }
    }

    LayerEmbeddingSet::new(
        header.target,
        header.period,
        header.dimension,
        header.layer_count,
        usages,
    )
}

/// Writes a set in the wire format, usage-major then ascending layer.
pub fn write_embedding_file<W: Write>(mut out: W, set: &LayerEmbeddingSet) -> Result<()> {
    let wrap = |e: std::io::Error| Error::io("<embedding file>", e);
    let ser = |e: serde_json::Error| Error::invalid(format!("failed to serialize: {e}"));
    let header = Header {
        target: set.target.clone(),
        period: set.period,
        dimension: set.dimension,
        layer_count: set.layer_count,
    };
    serde_json::to_writer(&mut out, &header).map_err(ser)?;
    out.write_all(b"\n").map_err(wrap)?;
    for u in &set.usages {
        for (&layer, vector) in &u.layers {
            #[derive(Serialize)]
            struct RecordRef<'a> {
                usage_key: &'a str,
                layer: usize,
                vector: &'a [f32],
            }
            serde_json::to_writer(
                &mut out,
                &RecordRef {
                    usage_key: &u.key,
                    layer,
                    vector,
                },
            )
            .map_err(ser)?;
            out.write_all(b"\n").map_err(wrap)?;
        }
    }
    out.flush().map_err(wrap)
}

/// Named or explicit selection of layers to average.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LayerPreset {
    /// First and last layer.
    FirstLast,
    /// The last four layers.
    LastFour,
    Explicit(BTreeSet<usize>),
}

impl LayerPreset {
    pub fn resolve(&self, layer_count: usize) -> Result<LayerSpec> {
        match self {
            LayerPreset::FirstLast => LayerSpec::new([1, layer_count]),
            LayerPreset::LastFour => {
                if layer_count < 4 {
                    return Err(Error::invalid(format!(
                        "preset last4 needs at least 4 layers, set has {layer_count}"
                    )));
                }
                LayerSpec::new(layer_count - 3..=layer_count)
            }
            LayerPreset::Explicit(layers) => LayerSpec::new(layers.iter().copied()),
        }
    }
}

impl fmt::Display for LayerPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerPreset::FirstLast => f.write_str("first+last"),
            LayerPreset::LastFour => f.write_str("last4"),
            LayerPreset::Explicit(layers) => {
                let parts: Vec<String> = layers.iter().map(|l| l.to_string()).collect();
                write!(f, "layers:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for LayerPreset {
    type Err = Error;

    /// Accepts `first+last`, `last4`, or a comma-separated layer list
    /// (optionally prefixed with `layers:`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first+last" => Ok(LayerPreset::FirstLast),
            "last4" => Ok(LayerPreset::LastFour),
            other => {
                let list = other.strip_prefix("layers:").unwrap_or(other);
                let layers = list
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<BTreeSet<_>, _>>()
                    .map_err(|_| Error::invalid(format!("unknown layer preset `{other}`")))?;
                if layers.is_empty() {
                    return Err(Error::invalid("empty layer list"));
                }
                Ok(LayerPreset::Explicit(layers))
            }
        }
    }
}

/// A non-empty set of 1-based layer indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerSpec(BTreeSet<usize>);

impl LayerSpec {
    pub fn new(layers: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = layers.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("layer spec must not be empty"));
        }
        if set.contains(&0) {
            return Err(Error::UnknownLayer { layer: 0, layer_count: 0 });
        }
        Ok(LayerSpec(set))
    }

    pub fn layers(&self) -> &BTreeSet<usize> {
        &self.0
    }
}

/// The vectors of one target in one period that enter a change measure.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageVectorSet<T> {
    pub target: String,
    pub period: Period,
    pub dimension: usize,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> UsageVectorSet<T> {
    pub fn new(
        target: impl Into<String>,
        period: Period,
        vectors: Vec<Vec<T>>,
    ) -> Result<Self> {
        let target = target.into();
        let dimension = vectors.first().map_or(0, Vec::len);
        if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dimension) {
            return Err(Error::DimensionMismatch {
                key: format!("{target}:{period}#{i}"),
                expected: dimension,
                found: v.len(),
            });
        }
        Ok(UsageVectorSet {
            target,
            period,
            dimension,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Averages the selected layers component-wise for every usage.
pub fn combine_layers<T: Scalar>(
    set: &LayerEmbeddingSet,
    spec: &LayerSpec,
) -> Result<UsageVectorSet<T>> {
    let available = set.available_layers();
    for &layer in spec.layers() {
        if layer > set.layer_count || (!set.usages.is_empty() && !available.contains(&layer)) {
            return Err(Error::UnknownLayer {
                layer,
                layer_count: set.layer_count,
            });
        }
    }
    let count = spec.layers().len() as f64;
    let vectors = set
        .usages
        .iter()
        .map(|u| {
            let mut acc = vec![0.0f64; set.dimension];
            for layer in spec.layers() {
                for (a, &x) in acc.iter_mut().zip(&u.layers[layer]) {
                    *a += f64::from(x);
                }
            }
            acc.into_iter().map(|a| T::from_f64_lossy(a / count)).collect()
        })
        .collect();
    Ok(UsageVectorSet {
        target: set.target.clone(),
        period: set.period,
        dimension: set.dimension,
        vectors,
    })
}
