//! Coordinate-ascent linear ranker optimizing mean NDCG@20.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::candidates::{rank_order, Candidate, CandidateList};
use crate::error::{Error, Result};
use crate::eval::{cross_validation_splits, ndcg_at_k, Judgments, NDCG_CUTOFF};

use super::{schema_hash, FeatureMatrix};

pub const LTR_CHANNEL: &str = "ltr";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub restarts: usize,
    pub seed: u64,
    /// Candidate values for each weight during the line search.
    pub grid: Vec<f64>,
    /// Upper bound on full passes over the features per restart.
    pub max_passes: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 42,
            grid: vec![-2.0, -1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0, 2.0],
            max_passes: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRanker {
    pub schema: Vec<String>,
    pub weights: Vec<f64>,
    /// Accepted coordinate steps summed over restarts.
    pub iterations: usize,
    /// Objective after each accepted step, one trace per restart, starting
    /// with the objective of the initial weights.
    pub traces: Vec<Vec<f64>>,
    pub train_ndcg20: Option<f64>,
}

struct Group {
    rows: Vec<usize>,
    idcg: f64,
}

struct TrainingSet<'m> {
    matrix: &'m FeatureMatrix,
    groups: Vec<Group>,
}

fn gain(rel: u32) -> f64 {
    (2f64).powi(rel as i32) - 1.0
}

fn discount(i: usize) -> f64 {
    ((i + 2) as f64).log2()
}

impl<'m> TrainingSet<'m> {
    fn new(matrix: &'m FeatureMatrix) -> Result<Self> {
        let mut groups = Vec::new();
        for rows in matrix.groups().into_values() {
            let mut labels: Vec<u32> = rows.iter().map(|&r| matrix.rows[r].label).collect();
            if labels.iter().all(|&l| l == 0) {
                continue;
            }
            labels.sort_unstable_by(|a, b| b.cmp(a));
            let idcg = labels
                .iter()
                .take(NDCG_CUTOFF)
                .enumerate()
                .map(|(i, &l)| gain(l) / discount(i))
                .sum();
            groups.push(Group { rows, idcg });
        }
        if groups.is_empty() {
            return Err(Error::NoTrainableQueries);
        }
        Ok(Self { matrix, groups })
    }

    fn objective(&self, scores: &[f64]) -> f64 {
        let rows = &self.matrix.rows;
        let mut total = 0.0;
        let mut order = Vec::new();
        for g in &self.groups {
            order.clear();
            order.extend_from_slice(&g.rows);
            order.sort_by(|&a, &b| {
                rank_order(scores[a], &rows[a].doc_id, scores[b], &rows[b].doc_id)
            });
            let dcg: f64 = order
                .iter()
                .take(NDCG_CUTOFF)
                .enumerate()
                .map(|(i, &r)| gain(rows[r].label) / discount(i))
                .sum();
            total += dcg / g.idcg;
        }
        total / self.groups.len() as f64
    }

    fn scores(&self, weights: &[f64]) -> Vec<f64> {
        self.matrix
            .rows
            .iter()
            .map(|r| r.values.iter().zip(weights).map(|(x, w)| x * w).sum())
            .collect()
    }

    fn ascend(&self, mut weights: Vec<f64>, params: &TrainParams) -> (Vec<f64>, Vec<f64>) {
        let rows = &self.matrix.rows;
        let mut scores = self.scores(&weights);
        let mut obj = self.objective(&scores);
        let mut trace = vec![obj];
        let mut trial = scores.clone();
        for _ in 0..params.max_passes {
            let mut improved = false;
            for f in 0..weights.len() {
                let mut best = (obj, weights[f]);
                for &g in &params.grid {
                    if g == weights[f] {
                        continue;
                    }
                    let delta = g - weights[f];
                    for (t, (s, r)) in trial.iter_mut().zip(scores.iter().zip(rows)) {
                        *t = s + delta * r.values[f];
                    }
                    let o = self.objective(&trial);
                    if o > best.0 + 1e-12 {
                        best = (o, g);
                    }
                }
                if best.1 != weights[f] {
                    let delta = best.1 - weights[f];
                    for (s, r) in scores.iter_mut().zip(rows) {
                        *s += delta * r.values[f];
                    }
                    weights[f] = best.1;
                    obj = best.0;
                    trace.push(obj);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        (weights, trace)
    }
}

/// Train on the matrix labels. Queries without a relevant candidate are
/// ignored. Restart 0 starts from all-zero weights, later restarts from
/// random grid points. With several restarts, the L1-normalized restart
/// weights are averaged, which averages the restart rankers' scores.
pub fn train_linear(matrix: &FeatureMatrix, params: &TrainParams) -> Result<LinearRanker> {
    if params.restarts == 0 || params.grid.is_empty() {
        return Err(Error::Config(
            "training needs restarts >= 1 and a non-empty grid".into(),
        ));
    }
    let set = TrainingSet::new(matrix)?;
    let n = matrix.schema.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let inits: Vec<Vec<f64>> = (0..params.restarts)
        .map(|r| {
            if r == 0 {
                vec![0.0; n]
            } else {
                (0..n)
                    .map(|_| *params.grid.choose(&mut rng).unwrap())
                    .collect()
            }
        })
        .collect();
    let results: Vec<(Vec<f64>, Vec<f64>)> = inits
        .into_par_iter()
        .map(|w| set.ascend(w, params))
        .collect();

    let weights = if results.len() == 1 {
        results[0].0.clone()
    } else {
        let mut avg = vec![0.0; n];
        let mut used = 0;
        for (w, _) in &results {
            let l1: f64 = w.iter().map(|x| x.abs()).sum();
            if l1 > 0.0 {
                for (a, x) in avg.iter_mut().zip(w) {
                    *a += x / l1;
                }
                used += 1;
            }
        }
        if used > 0 {
            avg.iter_mut().for_each(|a| *a /= used as f64);
        }
        avg
    };
    let train = set.objective(&set.scores(&weights));
    Ok(LinearRanker {
        schema: matrix.schema.clone(),
        weights,
        iterations: results.iter().map(|(_, t)| t.len() - 1).sum(),
        traces: results.into_iter().map(|(_, t)| t).collect(),
        train_ndcg20: Some(train),
    })
}

impl LinearRanker {
    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.schema
            .iter()
            .position(|c| c == feature)
            .map(|i| self.weights[i])
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# schema {}\n", schema_hash(&self.schema));
        if let Some(t) = self.train_ndcg20 {
            out.push_str(&format!("# train_ndcg20 {t}\n"));
        }
        for (f, w) in self.schema.iter().zip(&self.weights) {
            out.push_str(&format!("{f}\t{w}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut hash = None;
        let mut train = None;
        let mut schema = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix("# schema ") {
                hash = Some(h.trim().to_string());
            } else if let Some(t) = line.strip_prefix("# train_ndcg20 ") {
                train = Some(
                    t.trim()
                        .parse()
                        .map_err(|_| Error::parse(path, i + 1, "bad train_ndcg20"))?,
                );
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else {
                let (f, w) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(path, i + 1, "expected `feature<TAB>weight`"))?;
                schema.push(f.to_string());
                weights.push(
                    w.trim()
                        .parse()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad weight `{w}`")))?,
                );
            }
        }
        let hash = hash.ok_or_else(|| Error::parse(path, 1, "missing `# schema` header"))?;
        if hash != schema_hash(&schema) {
            return Err(Error::SchemaMismatch(format!(
                "{}: header hash does not match the listed features",
                path.display()
            )));
        }
        Ok(Self {
            schema,
            weights,
            iterations: 0,
            traces: Vec::new(),
            train_ndcg20: train,
        })
    }
}

/// Score each row by the weighted sum of its features; one list per query,
/// in query id order, sorted on channel `ltr`.
pub fn score_with_ranker(
    ranker: &LinearRanker,
    matrix: &FeatureMatrix,
) -> Result<Vec<CandidateList>> {
    if ranker.schema != matrix.schema {
        return Err(Error::SchemaMismatch(format!(
            "ranker schema {} differs from feature schema {}",
            schema_hash(&ranker.schema),
            schema_hash(&matrix.schema)
        )));
    }
    matrix
        .groups()
        .into_iter()
        .map(|(q, rows)| {
            let mut list = CandidateList::new(q, LTR_CHANNEL);
            list.entries = rows
                .iter()
                .map(|&r| {
                    let row = &matrix.rows[r];
                    let s: f64 = row
                        .values
                        .iter()
                        .zip(&ranker.weights)
                        .map(|(x, w)| x * w)
                        .sum();
                    Candidate::new(row.doc_id.clone()).with(LTR_CHANNEL, s)
                })
                .collect();
            list.sort_by_channel(LTR_CHANNEL)?;
            list.metadata.insert(
                LTR_CHANNEL.into(),
                format!("linear,schema={}", schema_hash(&ranker.schema)),
            );
            Ok(list)
        })
        .collect()
}

/// Held-out NDCG@20 per query: each fold is scored by a ranker trained on
/// the remaining folds. Fold assignment uses `params.seed`.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    judgments: &Judgments,
    folds: usize,
    params: &TrainParams,
) -> Result<BTreeMap<String, f64>> {
    let ids = matrix.query_ids();
    let splits = cross_validation_splits(&ids, folds, params.seed);
    let mut out = BTreeMap::new();
    for (k, test) in splits.iter().enumerate() {
        if test.is_empty() {
            continue;
        }
        let train: Vec<&String> = splits
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f)
            .collect();
        let ranker = train_linear(&matrix.subset(&train), params)?;
        for list in score_with_ranker(&ranker, &matrix.subset(test))? {
            let ranking: Vec<&str> = list.doc_ids().collect();
            let v = ndcg_at_k(&ranking, judgments.for_query(&list.query_id), NDCG_CUTOFF);
            out.insert(list.query_id, v);
        }
    }
    Ok(out)
}
