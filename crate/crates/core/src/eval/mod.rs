//! Ranking metrics, TREC file I/O, significance testing and reports.

mod report;
mod stats;
mod trec;

pub use report::{evaluate, render_tsv, EvalReport, Metric, QueryMetrics, SystemEval, ALPHA};
pub use stats::{
    paired_t_one_tailed, regularized_incomplete_beta, student_t_cdf, student_t_critical, PairedT,
};
pub use trec::{read_qrels, read_run, write_run, Run};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Graded relevance per query; unjudged documents count as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    pub by_query: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Judgments {
    pub fn insert(&mut self, query_id: &str, doc_id: &str, rel: u32) {
        self.by_query
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), rel);
    }

    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.by_query.get(query_id)
    }

    pub fn relevance(&self, query_id: &str, doc_id: &str) -> u32 {
        self.for_query(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn has_relevant(&self, query_id: &str) -> bool {
        self.for_query(query_id)
            .is_some_and(|m| m.values().any(|&r| r > 0))
    }
}

pub const NDCG_CUTOFF: usize = 20;

fn gain(rel: u32) -> f64 {
    (2f64).powi(rel as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    // rank is 1-based
    ((rank + 1) as f64).log2()
}

/// NDCG@k with exponential gain. A query with no relevant documents scores 0.
pub fn ndcg_at_k<S: AsRef<str>>(
    ranking: &[S],
    judgments: Option<&BTreeMap<String, u32>>,
    k: usize,
) -> f64 {
    assert!(k >= 1, "NDCG cutoff must be at least 1");
    let Some(judged) = judgments else {
        return 0.0;
    };
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&r| r > 0).collect();
    if ideal.is_empty() {
        return 0.0;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / discount(i + 1))
        .sum();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(judged.get(d.as_ref()).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    dcg / idcg
}

pub fn precision_at_1<S: AsRef<str>>(
    ranking: &[S],
    judgments: Option<&BTreeMap<String, u32>>,
) -> f64 {
    match (ranking.first(), judgments) {
        (Some(top), Some(j)) if j.get(top.as_ref()).copied().unwrap_or(0) > 0 => 1.0,
        _ => 0.0,
    }
}

/// Seeded partition into `folds` groups whose sizes differ by at most one.
/// Input order does not matter: ids are sorted before shuffling.
pub fn cross_validation_splits<S: AsRef<str>>(
    query_ids: &[S],
    folds: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    assert!(folds >= 1, "need at least one fold");
    let mut ids: Vec<String> = query_ids.iter().map(|s| s.as_ref().to_string()).collect();
    ids.sort();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, id) in ids.into_iter().enumerate() {
        out[i % folds].push(id);
    }
    out
}
