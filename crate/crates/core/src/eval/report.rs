use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ndcg_at_k, paired_t_one_tailed, precision_at_1, Judgments, PairedT, NDCG_CUTOFF};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ndcg@20")]
    Ndcg20,
    #[serde(rename = "p@1")]
    P1,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Ndcg20, Metric::P1];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ndcg20 => "ndcg@20",
            Metric::P1 => "p@1",
        }
    }

    pub fn compute<S: AsRef<str>>(
        &self,
        ranking: &[S],
        judged: Option<&BTreeMap<String, u32>>,
    ) -> f64 {
        match self {
            Metric::Ndcg20 => ndcg_at_k(ranking, judged, NDCG_CUTOFF),
            Metric::P1 => precision_at_1(ranking, judged),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndcg@20" | "ndcg20" | "ndcg" => Ok(Metric::Ndcg20),
            "p@1" | "p1" | "precision@1" => Ok(Metric::P1),
            other => Err(Error::Config(format!(
                "unknown metric `{other}` (expected ndcg@20 or p@1)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    #[serde(rename = "ndcg@20")]
    pub ndcg20: f64,
    #[serde(rename = "p@1")]
    pub p1: f64,
}

impl QueryMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Ndcg20 => self.ndcg20,
            Metric::P1 => self.p1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemEval {
    pub name: String,
    /// Aligned with [`EvalReport::query_ids`].
    pub per_query: Vec<QueryMetrics>,
    pub means: QueryMetrics,
}

impl SystemEval {
    pub fn values(&self, m: Metric) -> Vec<f64> {
        self.per_query.iter().map(|q| q.get(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub query_ids: Vec<String>,
    /// Queries without any relevant judgment; they contribute 0 to every mean.
    pub queries_without_relevant: Vec<String>,
    pub systems: Vec<SystemEval>,
    /// `significance[metric][i][j]`: test of H1 "system i beats system j".
    /// `None` on the diagonal and when fewer than two queries exist.
    pub significance: BTreeMap<Metric, Vec<Vec<Option<PairedT>>>>,
}

impl EvalReport {
    /// 1-based indices of systems that `i` beats at `ALPHA`.
    pub fn beats(&self, metric: Metric, i: usize) -> Vec<usize> {
        self.significance[&metric][i]
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some_and(|r| r.significant(ALPHA)))
            .map(|(j, _)| j + 1)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluate each `(name, rankings)` system over `query_ids`. Queries a system
/// did not answer count as empty rankings.
pub fn evaluate(
    systems: &[(String, BTreeMap<String, Vec<String>>)],
    judgments: &Judgments,
    query_ids: &[String],
) -> EvalReport {
    let empty: Vec<String> = Vec::new();
    let evals: Vec<SystemEval> = systems
        .iter()
        .map(|(name, rankings)| {
            let per_query: Vec<QueryMetrics> = query_ids
                .iter()
                .map(|q| {
                    let ranking = rankings.get(q).unwrap_or(&empty);
                    let judged = judgments.for_query(q);
                    QueryMetrics {
                        ndcg20: Metric::Ndcg20.compute(ranking, judged),
                        p1: Metric::P1.compute(ranking, judged),
                    }
                })
                .collect();
            let n = per_query.len().max(1) as f64;
            let means = QueryMetrics {
                ndcg20: per_query.iter().map(|q| q.ndcg20).sum::<f64>() / n,
                p1: per_query.iter().map(|q| q.p1).sum::<f64>() / n,
            };
            SystemEval {
                name: name.clone(),
                per_query,
                means,
            }
        })
        .collect();

    let mut significance = BTreeMap::new();
    for m in Metric::ALL {
        let values: Vec<Vec<f64>> = evals.iter().map(|s| s.values(m)).collect();
        let matrix = (0..evals.len())
            .map(|i| {
                (0..evals.len())
                    .map(|j| {
                        if i == j {
                            None
                        } else {
                            paired_t_one_tailed(&values[i], &values[j]).ok()
                        }
                    })
                    .collect()
            })
            .collect();
        significance.insert(m, matrix);
    }

    EvalReport {
        query_ids: query_ids.to_vec(),
        queries_without_relevant: query_ids
            .iter()
            .filter(|q| !judgments.has_relevant(q))
            .cloned()
            .collect(),
        systems: evals,
        significance,
    }
}

/// Means table with `^[i,j]` marking systems beaten at α = 0.05.
pub fn render_tsv(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("#\tsystem");
    for m in Metric::ALL {
        let _ = write!(out, "\t{}", m.name());
    }
    out.push('\n');
    for (i, s) in report.systems.iter().enumerate() {
        let _ = write!(out, "{}\t{}", i + 1, s.name);
        for m in Metric::ALL {
            let beats = report.beats(m, i);
            let _ = write!(out, "\t{:.4}", s.means.get(m));
            if !beats.is_empty() {
                let list: Vec<String> = beats.iter().map(usize::to_string).collect();
                let _ = write!(out, "^[{}]", list.join(","));
            }
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "# queries={} without_relevant={}",
        report.query_ids.len(),
        report.queries_without_relevant.len()
    );
    out
}
