use std::collections::HashMap;

use crate::analysis::{analyze, AnalyzerConfig, TokenSequence};
use crate::corpus::Record;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// A stored document: raw text (re-analyzed for surface-form embedding
/// lookups) and its analyzed tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredDoc {
    pub raw: String,
    pub tokens: TokenSequence,
}

/// Postings, per-document lengths and collection statistics.
///
/// Documents are addressed internally by their insertion position; postings
/// lists are sorted by that position.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    pub(crate) analyzer: AnalyzerConfig,
    pub(crate) doc_ids: Vec<String>,
    pub(crate) doc_lookup: HashMap<String, u32>,
    pub(crate) docs: Vec<StoredDoc>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) postings: HashMap<String, Vec<Posting>>,
    pub(crate) collection_tf: HashMap<String, u64>,
    pub(crate) collection_length: u64,
    /// Vocabulary by descending collection frequency, ties by term.
    pub(crate) terms_by_cf: Vec<String>,
}

impl InvertedIndex {
    pub fn build<I>(corpus: I, config: &AnalyzerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = Record>,
    {
        let mut doc_ids = Vec::new();
        let mut doc_lookup = HashMap::new();
        let mut docs = Vec::new();
        for record in corpus {
            if doc_lookup.contains_key(&record.id) {
                return Err(Error::DuplicateDoc(record.id));
            }
            let tokens = analyze(&record.text, config);
            doc_lookup.insert(record.id.clone(), doc_ids.len() as u32);
            doc_ids.push(record.id);
            docs.push(StoredDoc {
                raw: record.text,
                tokens,
            });
        }
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_parts(config.clone(), doc_ids, doc_lookup, docs))
    }

    pub(crate) fn from_parts(
        analyzer: AnalyzerConfig,
        doc_ids: Vec<String>,
        doc_lookup: HashMap<String, u32>,
        docs: Vec<StoredDoc>,
    ) -> Self {
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut collection_tf: HashMap<String, u64> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut collection_length = 0u64;
        for (d, doc) in docs.iter().enumerate() {
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for t in doc.tokens.iter() {
                *counts.entry(t).or_default() += 1;
            }
            for (t, tf) in counts {
                postings
                    .entry(t.to_string())
                    .or_default()
                    .push(Posting { doc: d as u32, tf });
                *collection_tf.entry(t.to_string()).or_default() += tf as u64;
            }
            doc_lengths.push(doc.tokens.len() as u32);
            collection_length += doc.tokens.len() as u64;
        }
        for list in postings.values_mut() {
            list.sort_by_key(|p| p.doc);
        }
        let terms_by_cf = sort_by_cf(&collection_tf);
        Self {
            analyzer,
            doc_ids,
            doc_lookup,
            docs,
            doc_lengths,
            postings,
            collection_tf,
            collection_length,
            terms_by_cf,
        }
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_length
    }

    pub fn collection_tf(&self, term: &str) -> u64 {
        self.collection_tf.get(term).copied().unwrap_or(0)
    }

    /// Maximum-likelihood collection model `cf(t) / |C|`.
    pub fn collection_prob(&self, term: &str) -> f64 {
        if self.collection_length == 0 {
            return 0.0;
        }
        self.collection_tf(term) as f64 / self.collection_length as f64
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn internal_id(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn require(&self, doc_id: &str) -> Result<u32> {
        self.internal_id(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))
    }

    pub fn doc_id(&self, internal: u32) -> &str {
        &self.doc_ids[internal as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc(&self, internal: u32) -> &StoredDoc {
        &self.docs[internal as usize]
    }

    pub fn doc_length(&self, internal: u32) -> u32 {
        self.doc_lengths[internal as usize]
    }

    pub fn tf(&self, term: &str, internal: u32) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&internal, |p| p.doc)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    pub fn terms_by_collection_frequency(&self) -> &[String] {
        &self.terms_by_cf
    }

    /// Verify the counting invariants. Used after loading from disk.
    pub fn check_invariants(&self) -> Result<()> {
        let total: u64 = self.doc_lengths.iter().map(|&l| l as u64).sum();
        if total != self.collection_length {
            return Err(Error::Invariant(format!(
                "sum of document lengths {total} != collection length {}",
                self.collection_length
            )));
        }
        for (term, list) in &self.postings {
            let sum: u64 = list.iter().map(|p| p.tf as u64).sum();
            if sum != self.collection_tf(term) {
                return Err(Error::Invariant(format!(
                    "postings of `{term}` sum to {sum}, collection tf is {}",
                    self.collection_tf(term)
                )));
            }
            if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return Err(Error::Invariant(format!("postings of `{term}` not sorted")));
            }
        }
        if self.collection_tf.len() != self.postings.len() {
            return Err(Error::Invariant(
                "collection tf and postings vocabularies differ".into(),
            ));
        }
        if self.doc_lengths.len() != self.docs.len() || self.doc_ids.len() != self.docs.len() {
            return Err(Error::Invariant(
                "document tables have different sizes".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn sort_by_cf(collection_tf: &HashMap<String, u64>) -> Vec<String> {
    let mut terms: Vec<(&String, u64)> = collection_tf.iter().map(|(t, &c)| (t, c)).collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    terms.into_iter().map(|(t, _)| t.clone()).collect()
}
