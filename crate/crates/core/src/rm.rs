//! Relevance-model (RM1 + query interpolation) second-pass re-ranker.
//!
//! `p(w|R) ∝ Σ_d p(w|d) p(Q|d)` over the top feedback documents, with
//! Dirichlet-smoothed document models and `p(Q|d)` taken as the softmax of
//! the first-pass LM scores over the feedback set. The expanded query mixes
//! the original query with the truncated `p(w|R)` and candidates are rescored
//! by negative cross entropy.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::analysis::TokenSequence;
use crate::candidates::CandidateList;
use crate::error::{Error, Result};
use crate::retrieval::{InvertedIndex, DEFAULT_MU, LM_CHANNEL};

pub const RM_CHANNEL: &str = "rm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmConfig {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight of the original query in the expanded query.
    pub interp_lambda: f64,
    pub mu: f64,
}

impl Default for RmConfig {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 50,
            interp_lambda: 0.5,
            mu: DEFAULT_MU,
        }
    }
}

impl RmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(Error::Config(
                "rm fb_docs and fb_terms must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.interp_lambda) {
            return Err(Error::Config(format!(
                "rm interp_lambda must lie in [0, 1], got {}",
                self.interp_lambda
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!(
                "rm mu must be positive, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Sparse term distribution, sorted by descending probability then term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDistribution {
    pub terms: Vec<(String, f64)>,
}

impl TermDistribution {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p).sum()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.terms
            .iter()
            .find(|(t, _)| t == term)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Dirichlet-smoothed `p(w|d)`.
pub fn smoothed_prob(index: &InvertedIndex, term: &str, doc: u32, mu: f64) -> f64 {
    let tf = index.tf(term, doc) as f64;
    (tf + mu * index.collection_prob(term)) / (index.doc_length(doc) as f64 + mu)
}

fn feedback_weights(candidates: &CandidateList, fb_docs: usize) -> Result<Vec<(String, f64)>> {
    let top = &candidates.entries[..fb_docs.min(candidates.len())];
    let scores: Vec<f64> = top
        .iter()
        .map(|c| c.channel(LM_CHANNEL))
        .collect::<Result<_>>()?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    Ok(top
        .iter()
        .zip(exp)
        .map(|(c, e)| (c.doc_id.clone(), e / z))
        .collect())
}

pub fn estimate_relevance_model(
    candidates: &CandidateList,
    index: &InvertedIndex,
    cfg: &RmConfig,
) -> Result<TermDistribution> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates(candidates.query_id.clone()));
    }
    let weights = feedback_weights(candidates, cfg.fb_docs)?;
    let docs: Vec<(u32, f64)> = weights
        .iter()
        .map(|(id, w)| Ok((index.require(id)?, *w)))
        .collect::<Result<_>>()?;

    // p(w|R) = sparse(w) + smooth_mass * p(w|C), where sparse only involves
    // terms that occur in a feedback document.
    let mut sparse: BTreeMap<&str, f64> = BTreeMap::new();
    let mut smooth_mass = 0.0;
    for &(d, w) in &docs {
        let denom = index.doc_length(d) as f64 + cfg.mu;
        smooth_mass += w * cfg.mu / denom;
        let doc = index.doc(d);
        let mut seen = HashSet::new();
        for t in doc.tokens.iter() {
            if seen.insert(t) {
                *sparse.entry(t).or_default() += w * index.tf(t, d) as f64 / denom;
            }
        }
    }
    let mut scored: Vec<(String, f64)> = sparse
        .iter()
        .map(|(&t, &s)| (t.to_string(), s + smooth_mass * index.collection_prob(t)))
        .collect();
    // terms absent from every feedback doc rank by collection frequency alone
    scored.extend(
        index
            .terms_by_collection_frequency()
            .iter()
            .filter(|t| !sparse.contains_key(t.as_str()))
            .take(cfg.fb_terms)
            .map(|t| (t.clone(), smooth_mass * index.collection_prob(t))),
    );
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(cfg.fb_terms);
    let z: f64 = scored.iter().map(|(_, p)| p).sum();
    if !(z > 0.0) {
        return Err(Error::Invariant(
            "relevance model has no probability mass".into(),
        ));
    }
    for (_, p) in &mut scored {
        *p /= z;
    }
    Ok(TermDistribution { terms: scored })
}

/// Interpolate the original query (maximum likelihood over its in-collection
/// tokens) with the relevance model.
pub fn expanded_query(
    query: &TokenSequence,
    rm: &TermDistribution,
    index: &InvertedIndex,
    lambda: f64,
) -> Vec<(String, f64)> {
    let known: Vec<&str> = query
        .iter()
        .filter(|t| index.collection_tf(t) > 0)
        .collect();
    let (lambda, rm_weight) = if known.is_empty() {
        (0.0, 1.0)
    } else {
        (lambda, 1.0 - lambda)
    };
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for t in &known {
        *weights.entry(t.to_string()).or_default() += lambda / known.len() as f64;
    }
    for (t, p) in &rm.terms {
        *weights.entry(t.clone()).or_default() += rm_weight * p;
    }
    weights.into_iter().filter(|(_, w)| *w > 0.0).collect()
}

/// Rescore and re-sort candidates by the expanded query. Membership is unchanged.
pub fn rm_rescore(
    query: &TokenSequence,
    candidates: &CandidateList,
    index: &InvertedIndex,
    cfg: &RmConfig,
) -> Result<CandidateList> {
    let rm = estimate_relevance_model(candidates, index, cfg)?;
    let q = expanded_query(query, &rm, index, cfg.interp_lambda);
    let mut out = candidates.clone();
    for c in &mut out.entries {
        let d = index.require(&c.doc_id)?;
        let score: f64 = q
            .iter()
            .map(|(t, w)| w * smoothed_prob(index, t, d, cfg.mu).ln())
            .sum();
        c.channels.insert(RM_CHANNEL.to_string(), score);
    }
    out.sort_by_channel(RM_CHANNEL)?;
    out.metadata.insert(
        RM_CHANNEL.into(),
        format!(
            "rm1+interp,fb_docs={},fb_terms={},lambda={},mu={}",
            cfg.fb_docs, cfg.fb_terms, cfg.interp_lambda, cfg.mu
        ),
    );
    Ok(out)
}
