//! Learning-to-rank features, per-query standardization, LETOR I/O and a
//! coordinate-ascent linear ranker.

mod letor;
mod linear;

pub use letor::{export_letor, parse_letor, schema_path};
pub use linear::{
    cross_validate, score_with_ranker, train_linear, LinearRanker, TrainParams, LTR_CHANNEL,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{analyze, TokenSequence};
use crate::candidates::CandidateList;
use crate::error::{Error, Result};
use crate::eval::Judgments;
use crate::retrieval::{lm_dirichlet_score, InvertedIndex};
use crate::semantic::SemanticScorer;

pub const BASE_FEATURES: [&str; 5] = ["unigram", "bigram", "skipgram", "sloppy_bigram", "lm"];
pub const EMBEDDING_FEATURES: [&str; 4] = ["rwmd_q", "mmp_max", "mmp_min", "s_rwmd_q"];

/// Suffix of the per-query standardized twin of a raw column.
pub const Z_SUFFIX: &str = ".z";

/// Which raw feature groups a matrix carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    Base,
    BaseEmbedding,
}

impl FeatureSet {
    pub fn raw_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
        if *self == FeatureSet::BaseEmbedding {
            cols.extend(EMBEDDING_FEATURES.iter().map(|s| s.to_string()));
        }
        cols
    }

    /// Raw columns followed by their `.z` twins.
    pub fn standardized_columns(&self) -> Vec<String> {
        let raw = self.raw_columns();
        let z = raw.iter().map(|c| format!("{c}{Z_SUFFIX}"));
        raw.iter().cloned().chain(z).collect()
    }

    pub fn needs_embeddings(&self) -> bool {
        *self == FeatureSet::BaseEmbedding
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(FeatureSet::Base),
            "embedding" | "base+embedding" => Ok(FeatureSet::BaseEmbedding),
            other => Err(Error::Config(format!(
                "unknown feature schema `{other}` (expected base or embedding)"
            ))),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Base => "base",
            FeatureSet::BaseEmbedding => "embedding",
        })
    }
}

/// Hex sha256 of the newline-joined column names.
pub fn schema_hash(schema: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(schema.join("\n").as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub query_id: String,
    pub doc_id: String,
    pub label: u32,
    pub values: Vec<f64>,
    /// Set where the value was unavailable and filled with 0.
    pub missing: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub schema: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(schema: Vec<String>) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.schema.len() || row.missing.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "row ({}, {}) has {} values for {} columns",
                row.query_id,
                row.doc_id,
                row.values.len(),
                self.schema.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c == name)
    }

    /// Sort rows by (query id, doc id).
    pub fn sort_rows(&mut self) {
        self.rows
            .sort_by(|a, b| (&a.query_id, &a.doc_id).cmp(&(&b.query_id, &b.doc_id)));
    }

    pub fn query_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.rows.iter().map(|r| r.query_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Row indices per query id.
    pub fn groups(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            g.entry(r.query_id.as_str()).or_default().push(i);
        }
        g
    }

    /// Only the rows of the given queries.
    pub fn subset<S: AsRef<str>>(&self, query_ids: &[S]) -> FeatureMatrix {
        let keep: HashSet<&str> = query_ids.iter().map(|s| s.as_ref()).collect();
        FeatureMatrix {
            schema: self.schema.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| keep.contains(r.query_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Only the named columns, in the given order.
    pub fn project(&self, columns: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                self.column(c)
                    .ok_or_else(|| Error::SchemaMismatch(format!("no column `{c}`")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            schema: columns.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    query_id: r.query_id.clone(),
                    doc_id: r.doc_id.clone(),
                    label: r.label,
                    values: idx.iter().map(|&i| r.values[i]).collect(),
                    missing: idx.iter().map(|&i| r.missing[i]).collect(),
                })
                .collect(),
        })
    }
}

fn coverage(matched: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

fn positions(answer: &TokenSequence) -> BTreeMap<&str, Vec<usize>> {
    let mut p: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in answer.iter().enumerate() {
        p.entry(t).or_default().push(i);
    }
    p
}

/// Fraction of question token pairs `(i, j)`, `i < j <= i + max_gap`, found in
/// the answer as `x` then `y` with `0 < pos(y) - pos(x) <= window`, or in
/// either order when `unordered`.
fn pair_coverage(
    question: &TokenSequence,
    answer: &TokenSequence,
    max_gap: usize,
    window: usize,
    unordered: bool,
) -> f64 {
    let q = &question.tokens;
    let pos = positions(answer);
    let empty = Vec::new();
    let mut total = 0;
    let mut matched = 0;
    for i in 0..q.len() {
        for j in i + 1..q.len().min(i + max_gap + 1) {
            total += 1;
            let px = pos.get(q[i].as_str()).unwrap_or(&empty);
            let py = pos.get(q[j].as_str()).unwrap_or(&empty);
            let hit = px.iter().any(|&x| {
                py.iter()
                    .any(|&y| (y > x && y - x <= window) || (unordered && x > y && x - y <= window))
            });
            if hit {
                matched += 1;
            }
        }
    }
    coverage(matched, total)
}

/// Fraction of question tokens that occur in the answer.
pub fn unigram_coverage(question: &TokenSequence, answer: &TokenSequence) -> f64 {
    let present: HashSet<&str> = answer.iter().collect();
    coverage(
        question.iter().filter(|t| present.contains(t)).count(),
        question.len(),
    )
}

/// Fraction of contiguous question bigrams that occur contiguously in the answer.
pub fn bigram_coverage(question: &TokenSequence, answer: &TokenSequence) -> f64 {
    let present: HashSet<(&str, &str)> = answer
        .tokens
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect();
    let q = &question.tokens;
    let total = q.len().saturating_sub(1);
    let matched = q
        .windows(2)
        .filter(|w| present.contains(&(w[0].as_str(), w[1].as_str())))
        .count();
    coverage(matched, total)
}

/// Question pairs with at most two tokens between them, found in order within
/// a 10-token answer window.
pub fn skipgram_coverage(question: &TokenSequence, answer: &TokenSequence) -> f64 {
    pair_coverage(question, answer, 3, 9, false)
}

/// Question bigrams found in either order within a 3-token answer window.
pub fn sloppy_bigram_coverage(question: &TokenSequence, answer: &TokenSequence) -> f64 {
    pair_coverage(question, answer, 1, 2, true)
}

/// The five lexical features, in [`BASE_FEATURES`] order.
pub fn extract_base_features(
    query: &TokenSequence,
    doc_id: &str,
    index: &InvertedIndex,
    mu: f64,
) -> Result<[f64; 5]> {
    let d = index.require(doc_id)?;
    let answer = &index.doc(d).tokens;
    Ok([
        unigram_coverage(query, answer),
        bigram_coverage(query, answer),
        skipgram_coverage(query, answer),
        sloppy_bigram_coverage(query, answer),
        lm_dirichlet_score(query, doc_id, index, mu)?,
    ])
}

/// The four embedding features, in [`EMBEDDING_FEATURES`] order, plus whether
/// the pair was degenerate (no usable vectors on one side).
pub fn extract_embedding_features(
    question: &TokenSequence,
    answer: &TokenSequence,
    scorer: &SemanticScorer<'_>,
) -> ([f64; 4], bool) {
    let s = scorer.score(question, answer);
    ([s.rwmd_q, s.mmp_max, s.mmp_min, s.s_rwmd_q], s.degenerate)
}

/// Builds feature rows for candidate lists.
pub struct FeatureExtractor<'a> {
    pub index: &'a InvertedIndex,
    pub scorer: Option<SemanticScorer<'a>>,
    pub mu: f64,
    pub set: FeatureSet,
}

impl FeatureExtractor<'_> {
    /// Raw (unstandardized) rows for one query, one per candidate.
    pub fn extract(
        &self,
        query_text: &str,
        candidates: &CandidateList,
        judgments: &Judgments,
    ) -> Result<Vec<FeatureRow>> {
        let scorer = match (self.set.needs_embeddings(), &self.scorer) {
            (true, Some(s)) => Some(s),
            (true, None) => {
                return Err(Error::Config(
                    "embedding features need an embedding table".into(),
                ))
            }
            (false, _) => None,
        };
        let analyzer = self.index.analyzer();
        let query = analyze(query_text, analyzer);
        let query_surface = analyze(query_text, &analyzer.surface());
        let width = self.set.raw_columns().len();
        candidates
            .entries
            .par_iter()
            .map(|c| {
                let mut values =
                    extract_base_features(&query, &c.doc_id, self.index, self.mu)?.to_vec();
                let mut missing = vec![false; values.len()];
                if let Some(scorer) = scorer {
                    let d = self.index.require(&c.doc_id)?;
                    let answer = analyze(&self.index.doc(d).raw, &analyzer.surface());
                    let (emb, degenerate) =
                        extract_embedding_features(&query_surface, &answer, scorer);
                    values.extend(emb);
                    missing.extend([degenerate; 4]);
                }
                debug_assert_eq!(values.len(), width);
                Ok(FeatureRow {
                    query_id: candidates.query_id.clone(),
                    doc_id: c.doc_id.clone(),
                    label: judgments.relevance(&candidates.query_id, &c.doc_id),
                    values,
                    missing,
                })
            })
            .collect()
    }
}

/// Append a `<f>.z` column for every raw column: `(x - mean) / std` over the
/// query's rows with population std, and 0 where the std is 0.
pub fn standardize_per_query(matrix: &FeatureMatrix) -> FeatureMatrix {
    let raw: Vec<usize> = (0..matrix.schema.len())
        .filter(|&i| !matrix.schema[i].ends_with(Z_SUFFIX))
        .collect();
    let mut out = matrix.clone();
    out.schema.extend(
        raw.iter()
            .map(|&i| format!("{}{Z_SUFFIX}", matrix.schema[i])),
    );
    for rows in matrix.groups().values() {
        let n = rows.len() as f64;
        for &col in &raw {
            let mean = rows
                .iter()
                .map(|&r| matrix.rows[r].values[col])
                .sum::<f64>()
                / n;
            let var = rows
                .iter()
                .map(|&r| (matrix.rows[r].values[col] - mean).powi(2))
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            for &r in rows {
                let x = matrix.rows[r].values[col];
                let z = if std > 1e-12 * mean.abs().max(1.0) {
                    (x - mean) / std
                } else {
                    0.0
                };
                out.rows[r].values.push(z);
                out.rows[r].missing.push(matrix.rows[r].missing[col]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AnalyzerConfig;
    use crate::corpus::Record;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::new(s.split_whitespace().map(String::from).collect())
    }

    #[test]
    fn coverage_examples() {
        let q = seq("a b c");
        let a = seq("a x b");
        assert_abs_diff_eq!(unigram_coverage(&q, &a), 2.0 / 3.0);
        assert_eq!(bigram_coverage(&q, &a), 0.0);
        assert_abs_diff_eq!(sloppy_bigram_coverage(&q, &a), 0.5);
        // pairs (a,b) (a,c) (b,c); only (a,b) in order
        assert_abs_diff_eq!(skipgram_coverage(&q, &a), 1.0 / 3.0);

        let contiguous = seq("z a b c y");
        assert_eq!(unigram_coverage(&q, &contiguous), 1.0);
        assert_eq!(bigram_coverage(&q, &contiguous), 1.0);

        let none = seq("p q r");
        for f in [
            unigram_coverage,
            bigram_coverage,
            skipgram_coverage,
            sloppy_bigram_coverage,
        ] {
            assert_eq!(f(&q, &none), 0.0);
        }
    }

    #[test]
    fn window_edges() {
        let q = seq("a b");
        assert_eq!(sloppy_bigram_coverage(&q, &seq("b x a")), 1.0);
        assert_eq!(sloppy_bigram_coverage(&q, &seq("b x x a")), 0.0);
        assert_eq!(skipgram_coverage(&q, &seq("a 1 2 3 4 5 6 7 8 b")), 1.0);
        assert_eq!(skipgram_coverage(&q, &seq("a 1 2 3 4 5 6 7 8 9 b")), 0.0);
        assert_eq!(skipgram_coverage(&q, &seq("b a")), 0.0);
        // pairs at distance 4 in the question are not skipgrams
        let long = seq("a x y z b");
        assert_abs_diff_eq!(skipgram_coverage(&long, &seq("a b")), 0.0);
    }

    #[test]
    fn lm_feature_zero_without_overlap() {
        let idx = InvertedIndex::build(
            [Record {
                id: "d1".into(),
                text: "cats sleep".into(),
            }],
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let f = extract_base_features(&seq("dog"), "d1", &idx, 2000.0).unwrap();
        assert_eq!(f, [0.0; 5]);
        assert!(matches!(
            extract_base_features(&seq("dog"), "nope", &idx, 2000.0),
            Err(Error::UnknownDoc(_))
        ));
    }

    fn matrix(values: &[f64]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec!["f".into()]);
        for (i, v) in values.iter().enumerate() {
            m.push(FeatureRow {
                query_id: "q".into(),
                doc_id: format!("d{i}"),
                label: 0,
                values: vec![*v],
                missing: vec![false],
            })
            .unwrap();
        }
        m
    }

    fn z(m: &FeatureMatrix) -> Vec<f64> {
        let s = standardize_per_query(m);
        assert_eq!(s.schema, ["f", "f.z"]);
        s.rows.iter().map(|r| r.values[1]).collect()
    }

    #[test]
    fn standardize_examples() {
        let got = z(&matrix(&[1.0, 2.0, 3.0]));
        let want = [-1.2247, 0.0, 1.2247];
        for (g, w) in got.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-4);
        }
        assert_eq!(z(&matrix(&[4.0, 4.0])), [0.0, 0.0]);
        assert_eq!(z(&matrix(&[9.0])), [0.0]);
    }

    #[test]
    fn schema_sizes() {
        assert_eq!(FeatureSet::Base.standardized_columns().len(), 10);
        assert_eq!(FeatureSet::BaseEmbedding.standardized_columns().len(), 18);
        assert_eq!("base".parse::<FeatureSet>().unwrap(), FeatureSet::Base);
    }

    #[test]
    fn push_rejects_wrong_width() {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]);
        let r = FeatureRow {
            query_id: "q".into(),
            doc_id: "d".into(),
            label: 0,
            values: vec![1.0],
            missing: vec![false],
        };
        assert!(m.push(r).is_err());
    }

    proptest! {
        #[test]
        fn z_columns_have_zero_mean_unit_std(
            groups in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..12), 1..5)
        ) {
            let mut m = FeatureMatrix::new(vec!["f".into()]);
            for (g, vals) in groups.iter().enumerate() {
                for (i, v) in vals.iter().enumerate() {
                    m.push(FeatureRow {
                        query_id: format!("q{g}"),
                        doc_id: format!("d{i}"),
                        label: 0,
                        values: vec![*v],
                        missing: vec![false],
                    }).unwrap();
                }
            }
            let s = standardize_per_query(&m);
            for rows in s.groups().values() {
                let raw: Vec<f64> = rows.iter().map(|&r| s.rows[r].values[0]).collect();
                let zs: Vec<f64> = rows.iter().map(|&r| s.rows[r].values[1]).collect();
                let n = zs.len() as f64;
                let mean = zs.iter().sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                let spread = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - raw.iter().cloned().fold(f64::INFINITY, f64::min);
                if spread > 1e-6 {
                    let std = (zs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    prop_assert!((std - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
