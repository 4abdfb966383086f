use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate document with its named score channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub channels: BTreeMap<String, f64>,
}

impl Candidate {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            channels: BTreeMap::new(),
        }
    }

    pub fn with(mut self, channel: &str, value: f64) -> Self {
        self.channels.insert(channel.to_string(), value);
        self
    }

    pub fn channel(&self, name: &str) -> Result<f64> {
        self.channels
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingChannel {
                channel: name.to_string(),
                doc_id: self.doc_id.clone(),
            })
    }
}

/// Per-query ranked candidates.
///
/// Entries are ordered by the active channel, descending, ties broken by
/// ascending doc id. `metadata` records how each channel was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub query_id: String,
    pub entries: Vec<Candidate>,
    pub active: String,
    pub metadata: BTreeMap<String, String>,
}

/// Descending score, then ascending doc id.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

impl CandidateList {
    pub fn new(query_id: impl Into<String>, active: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            entries: Vec::new(),
            active: active.into(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.doc_id.as_str())
    }

    /// Make `channel` the active one and re-sort by it.
    pub fn sort_by_channel(&mut self, channel: &str) -> Result<()> {
        for c in &self.entries {
            c.channel(channel)?;
        }
        self.active = channel.to_string();
        self.entries.sort_by(|a, b| {
            rank_order(
                a.channels[channel],
                &a.doc_id,
                b.channels[channel],
                &b.doc_id,
            )
        });
        Ok(())
    }

    pub fn values(&self, channel: &str) -> Result<Vec<f64>> {
        self.entries.iter().map(|c| c.channel(channel)).collect()
    }

    /// Check the ordering and uniqueness invariants.
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.entries {
            if !seen.insert(c.doc_id.as_str()) {
                return Err(Error::Invariant(format!(
                    "duplicate doc `{}` in candidates for `{}`",
                    c.doc_id, self.query_id
                )));
            }
        }
        for w in self.entries.windows(2) {
            let a = w[0].channel(&self.active)?;
            let b = w[1].channel(&self.active)?;
            if rank_order(a, &w[0].doc_id, b, &w[1].doc_id) == Ordering::Greater {
                return Err(Error::Invariant(format!(
                    "candidates for `{}` not sorted by `{}`",
                    self.query_id, self.active
                )));
            }
        }
        Ok(())
    }
}
