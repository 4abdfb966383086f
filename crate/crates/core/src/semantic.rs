//! Embedding re-rank scores.
//!
//! All scores are similarities (higher is better):
//!
//! * `rwmd_q`: every in-vocabulary question token is matched to its most
//!   similar answer token; the score is the mean of those best cosines.
//! * `s_rwmd_q`: `rwmd_q` on overlapping answer windows, maximum over windows.
//! * `mmp`: blend of the cosines between max/min pooled vectors of the answer
//!   prefix and of the prefix followed by the question.
//!
//! OOV tokens are skipped everywhere. Degenerate inputs (no usable question or
//! answer vectors) score 0.

use serde::{Deserialize, Serialize};

use crate::analysis::TokenSequence;
use crate::embeddings::{cosine, unit_cosine, EmbeddingTable, LookupPolicy};
use crate::error::{Error, Result};

pub const RWMD_CHANNEL: &str = "rwmd";
pub const SRWMD_CHANNEL: &str = "srwmd";
pub const MMP_CHANNEL: &str = "mmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanConfig {
    pub span_length: usize,
    pub stride: usize,
}

impl Default for SpanConfig {
    fn default() -> Self {
        Self {
            span_length: 20,
            stride: 2,
        }
    }
}

impl SpanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.span_length == 0 || self.stride == 0 || self.stride > self.span_length {
            return Err(Error::Config(format!(
                "span config needs span_length >= 1 and 1 <= stride <= span_length, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmpConfig {
    /// Weight on the max-pool cosine; the min-pool cosine gets `1 - weight`.
    pub weight: f64,
    pub prefix_tokens: usize,
}

impl Default for MmpConfig {
    fn default() -> Self {
        Self {
            weight: 0.7,
            prefix_tokens: 20,
        }
    }
}

impl MmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::Config(format!(
                "mmp weight must lie in [0, 1], got {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// `[start, end)` token ranges of the answer windows.
///
/// Windows start at `0, stride, 2*stride, ...`; generation stops after the
/// first window that reaches the end of the answer.
pub fn span_bounds(len: usize, cfg: &SpanConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    let stride = cfg.stride.max(1);
    let mut start = 0;
    loop {
        let end = (start + cfg.span_length).min(len);
        out.push((start, end));
        if end == len {
            return out;
        }
        start += stride;
    }
}

pub fn spans(answer: &TokenSequence, cfg: &SpanConfig) -> Vec<TokenSequence> {
    span_bounds(answer.len(), cfg)
        .into_iter()
        .map(|(s, e)| answer.slice(s, e))
        .collect()
}

/// Best-match cosine of each in-vocabulary question token against every
/// answer position. `NEG_INFINITY` marks OOV answer positions.
struct SimilarityGrid {
    rows: Vec<Vec<f64>>,
}

impl SimilarityGrid {
    fn new(question: &[Option<&[f64]>], answer: &[Option<&[f64]>]) -> Self {
        let rows = question
            .iter()
            .flatten()
            .map(|q| {
                answer
                    .iter()
                    .map(|a| a.map_or(f64::NEG_INFINITY, |a| unit_cosine(q, a)))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// Mean over question rows of the max within `[start, end)`; `None` when
    /// either side has nothing to match.
    fn window_score(&self, start: usize, end: usize) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for row in &self.rows {
            let best = row[start..end]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            if best == f64::NEG_INFINITY {
                return None;
            }
            total += best;
        }
        Some(total / self.rows.len() as f64)
    }
}

/// Max over spans; a span without usable vectors scores 0 like any
/// degenerate pair. An empty answer has no spans and scores 0.
fn max_span_score(grid: &SimilarityGrid, len: usize, cfg: &SpanConfig) -> f64 {
    span_bounds(len, cfg)
        .into_iter()
        .map(|(s, e)| grid.window_score(s, e).unwrap_or(0.0))
        .fold(None, |best: Option<f64>, x| {
            Some(best.map_or(x, |b: f64| b.max(x)))
        })
        .unwrap_or(0.0)
}

pub fn rwmd_q(
    question: &TokenSequence,
    answer: &TokenSequence,
    table: &EmbeddingTable,
    policy: LookupPolicy,
) -> f64 {
    let q = table.embed(question, policy);
    let a = table.embed(answer, policy);
    rwmd_embedded(&q, &a)
}

pub fn s_rwmd_q(
    question: &TokenSequence,
    answer: &TokenSequence,
    table: &EmbeddingTable,
    policy: LookupPolicy,
    cfg: &SpanConfig,
) -> f64 {
    let q = table.embed(question, policy);
    let a = table.embed(answer, policy);
    s_rwmd_embedded(&q, &a, cfg)
}

pub fn rwmd_embedded(question: &[Option<&[f64]>], answer: &[Option<&[f64]>]) -> f64 {
    SimilarityGrid::new(question, answer)
        .window_score(0, answer.len())
        .unwrap_or(0.0)
}

pub fn s_rwmd_embedded(
    question: &[Option<&[f64]>],
    answer: &[Option<&[f64]>],
    cfg: &SpanConfig,
) -> f64 {
    let grid = SimilarityGrid::new(question, answer);
    max_span_score(&grid, answer.len(), cfg)
}

fn pool(vectors: &[&[f64]], dim: usize, pick: fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vectors[0].to_vec();
    for v in &vectors[1..] {
        for (o, &x) in out.iter_mut().zip(v.iter()) {
            *o = pick(*o, x);
        }
    }
    debug_assert_eq!(out.len(), dim);
    out
}

/// Cosine of two pooled vectors. A zero vector has no direction: identical
/// vectors still count as 1, anything else as 0.
fn pooled_cosine(a: &[f64], b: &[f64]) -> f64 {
    match cosine(a, b) {
        Ok(c) => c,
        Err(_) if a == b => 1.0,
        Err(_) => 0.0,
    }
}

/// `(max-pool cosine, min-pool cosine)` before blending.
pub fn mmp_components_embedded(
    question: &[Option<&[f64]>],
    answer: &[Option<&[f64]>],
    cfg: &MmpConfig,
) -> (f64, f64) {
    let prefix: Vec<&[f64]> = answer
        .iter()
        .flatten()
        .take(cfg.prefix_tokens)
        .copied()
        .collect();
    if prefix.is_empty() {
        return (0.0, 0.0);
    }
    let dim = prefix[0].len();
    let mut joined = prefix.clone();
    joined.extend(question.iter().flatten().copied());
    let max_a = pool(&prefix, dim, f64::max);
    let max_aq = pool(&joined, dim, f64::max);
    let min_a = pool(&prefix, dim, f64::min);
    let min_aq = pool(&joined, dim, f64::min);
    (
        pooled_cosine(&max_a, &max_aq),
        pooled_cosine(&min_a, &min_aq),
    )
}

pub fn mmp_embedded(
    question: &[Option<&[f64]>],
    answer: &[Option<&[f64]>],
    cfg: &MmpConfig,
) -> f64 {
    let (max_sim, min_sim) = mmp_components_embedded(question, answer, cfg);
    blend(max_sim, min_sim, cfg.weight)
}

#[inline]
pub fn blend(max_sim: f64, min_sim: f64, weight: f64) -> f64 {
    weight * max_sim + (1.0 - weight) * min_sim
}

pub fn mmp(
    question: &TokenSequence,
    answer: &TokenSequence,
    table: &EmbeddingTable,
    policy: LookupPolicy,
    cfg: &MmpConfig,
) -> f64 {
    mmp_embedded(
        &table.embed(question, policy),
        &table.embed(answer, policy),
        cfg,
    )
}

pub fn mmp_components(
    question: &TokenSequence,
    answer: &TokenSequence,
    table: &EmbeddingTable,
    policy: LookupPolicy,
    cfg: &MmpConfig,
) -> (f64, f64) {
    mmp_components_embedded(
        &table.embed(question, policy),
        &table.embed(answer, policy),
        cfg,
    )
}

/// Every embedding score for one (question, answer) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    pub rwmd_q: f64,
    pub s_rwmd_q: f64,
    pub mmp: f64,
    pub mmp_max: f64,
    pub mmp_min: f64,
    /// No in-vocabulary question or answer tokens.
    pub degenerate: bool,
}

/// Bundles a table with the per-run lookup policy and scorer configs.
#[derive(Debug, Clone, Copy)]
pub struct SemanticScorer<'t> {
    pub table: &'t EmbeddingTable,
    pub policy: LookupPolicy,
    pub spans: SpanConfig,
    pub mmp: MmpConfig,
}

impl<'t> SemanticScorer<'t> {
    pub fn new(table: &'t EmbeddingTable) -> Self {
        Self {
            table,
            policy: LookupPolicy::default(),
            spans: SpanConfig::default(),
            mmp: MmpConfig::default(),
        }
    }

    pub fn score(&self, question: &TokenSequence, answer: &TokenSequence) -> SemanticScores {
        let q = self.table.embed(question, self.policy);
        self.score_embedded(&q, answer)
    }

    pub fn score_embedded(&self, q: &[Option<&[f64]>], answer: &TokenSequence) -> SemanticScores {
        let a = self.table.embed(answer, self.policy);
        let grid = SimilarityGrid::new(q, &a);
        let rwmd = grid.window_score(0, a.len());
        let s_rwmd = max_span_score(&grid, a.len(), &self.spans);
        let (mmp_max, mmp_min) = mmp_components_embedded(q, &a, &self.mmp);
        SemanticScores {
            rwmd_q: rwmd.unwrap_or(0.0),
            s_rwmd_q: s_rwmd,
            mmp: blend(mmp_max, mmp_min, self.mmp.weight),
            mmp_max,
            mmp_min,
            degenerate: rwmd.is_none(),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "lookup={},span_length={},stride={},mmp_weight={},mmp_prefix={}",
            self.policy,
            self.spans.span_length,
            self.spans.stride,
            self.mmp.weight,
            self.mmp.prefix_tokens
        )
    }
}
