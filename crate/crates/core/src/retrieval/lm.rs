//! Dirichlet-smoothed query likelihood, scored the way Lucene's
//! `LMDirichletSimilarity` does it: each matching query term contributes
//! `log(1 + tf / (mu * p(t|C))) + log(mu / (mu + |d|))`, floored at zero.

use crate::analysis::TokenSequence;
use crate::candidates::{rank_order, Candidate, CandidateList};
use crate::error::{Error, Result};

use super::InvertedIndex;

pub const DEFAULT_MU: f64 = 2000.0;
pub const DEFAULT_K: usize = 400;

pub const LM_CHANNEL: &str = "lm";

/// Contribution of one query term occurrence.
#[inline]
pub fn term_score(tf: u32, doc_length: u32, collection_prob: f64, mu: f64) -> f64 {
    if tf == 0 || collection_prob <= 0.0 {
        return 0.0;
    }
    let s = (1.0 + tf as f64 / (mu * collection_prob)).ln() + (mu / (mu + doc_length as f64)).ln();
    s.max(0.0)
}

/// Score of one document. Duplicate query tokens contribute once each.
pub fn lm_dirichlet_score(
    query: &TokenSequence,
    doc_id: &str,
    index: &InvertedIndex,
    mu: f64,
) -> Result<f64> {
    let d = index.require(doc_id)?;
    Ok(score_internal(query, d, index, mu))
}

pub(crate) fn score_internal(query: &TokenSequence, d: u32, index: &InvertedIndex, mu: f64) -> f64 {
    let dl = index.doc_length(d);
    query
        .iter()
        .map(|t| term_score(index.tf(t, d), dl, index.collection_prob(t), mu))
        .sum()
}

/// Top-`k` documents by [`lm_dirichlet_score`]. Documents whose score is zero
/// for every query term are not returned.
pub fn retrieve(
    query_id: &str,
    query: &TokenSequence,
    index: &InvertedIndex,
    k: usize,
    mu: f64,
) -> Result<CandidateList> {
    if k == 0 {
        return Err(Error::Config(
            "retrieval cutoff k must be at least 1".into(),
        ));
    }
    if !(mu > 0.0) {
        return Err(Error::Config(format!(
            "Dirichlet mu must be positive, got {mu}"
        )));
    }
    let mut acc: Vec<f64> = vec![0.0; index.num_docs()];
    let mut touched: Vec<u32> = Vec::new();
    // accumulate in query-token order so per-doc sums match score_internal bit for bit
    for t in query.iter() {
        let p = index.collection_prob(t);
        for post in index.postings(t) {
            let s = term_score(post.tf, index.doc_length(post.doc), p, mu);
            if acc[post.doc as usize] == 0.0 && s > 0.0 {
                touched.push(post.doc);
            }
            acc[post.doc as usize] += s;
        }
    }
    let mut scored: Vec<(u32, f64)> = touched
        .into_iter()
        .map(|d| (d, acc[d as usize]))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    scored.sort_by(|a, b| rank_order(a.1, index.doc_id(a.0), b.1, index.doc_id(b.0)));
    scored.truncate(k);

    let mut list = CandidateList::new(query_id, LM_CHANNEL);
    list.entries = scored
        .into_iter()
        .map(|(d, s)| Candidate::new(index.doc_id(d)).with(LM_CHANNEL, s))
        .collect();
    list.metadata
        .insert(LM_CHANNEL.into(), format!("lm_dirichlet,mu={mu},k={k}"));
    Ok(list)
}
