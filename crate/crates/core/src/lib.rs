//! Lexical semantic change detection from contextualized usage vectors.
//!
//! The crate compares the usages of a target word in two time-sliced corpora.
//! [`corpus`] extracts windowed usages, [`embeddings`] reads the per-layer
//! vectors an external encoder produced for them and averages layers,
//! [`measures`] scores the two vector sets (average pairwise cosine distance
//! and centroid cosine), [`decision`] turns score rankings into binary labels,
//! and [`evaluation`] compares labels and scores with gold data.
//!
//! Measures are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the common choices.

pub mod analysis;
pub mod corpus;
pub mod decision;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod measures;
pub mod pipeline;
pub mod sampling;
pub mod scalar;

pub use analysis::{collocation_share, uppercase_share, Collocation, UsageProfile};
pub use corpus::{
    count_frequency, extract_usages, parse_corpus, Corpus, ExtractOptions, MatchMode, Period,
    Sentence, Token, Usage,
};
pub use decision::{consensus_top_k, label_top_k, rank_targets, Prediction, Ranking};
pub use embeddings::{
    combine_layers, parse_embedding_file, write_embedding_file, LayerEmbeddingSet, LayerPreset,
    LayerSpec, LayeredUsage, UsageVectorSet,
};
pub use error::{Error, Result};
pub use evaluation::{
    accuracy, f1, frequency_baseline, majority_baseline, spearman, GoldRecord, Leaderboard, Rate,
};
pub use measures::{apd, cos_centroid, cosine_distance, ApdMode, ChangeScore, Measure, ScoreTable};
pub use scalar::Scalar;

/// Usage vectors in double precision, the default for scoring.
pub type VectorSet = UsageVectorSet<f64>;
/// Usage vectors in single precision, matching the wire format.
pub type VectorSet32 = UsageVectorSet<f32>;
pub type Score = ChangeScore<f64>;
pub type Score32 = ChangeScore<f32>;
