//! Answer re-ranking with word embeddings.
//!
//! A Dirichlet-smoothed language model retrieves candidates from an inverted
//! index. Candidates are then re-scored by embedding similarities (RWMD_Q,
//! its spanning variant and min-max pooling) or a relevance model, and the
//! channels are fused by CombSUM over min-max normalized scores. A feature
//! extractor and a linear learning-to-rank model cover the supervised
//! setting, and the `eval` module scores runs against qrels.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod candidates;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod fusion;
pub mod pipeline;
pub mod retrieval;
pub mod rm;
pub mod semantic;

pub use analysis::{analyze, AnalyzerConfig, TokenSequence};
pub use candidates::{Candidate, CandidateList};
pub use config::RunConfig;
pub use corpus::{read_records, FieldRule, Record};
pub use embeddings::{EmbeddingFormat, EmbeddingTable, LookupPolicy};
pub use error::{Error, Result};
pub use eval::Judgments;
pub use features::{FeatureMatrix, FeatureRow, FeatureSet, LinearRanker};
pub use fusion::FusionSpec;
pub use pipeline::{Pipeline, PipelineSettings, Runner};
pub use retrieval::InvertedIndex;
pub use semantic::{MmpConfig, SemanticScorer, SpanConfig};
