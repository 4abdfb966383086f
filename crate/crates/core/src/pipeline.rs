//! Named first-pass + re-rank pipelines.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::analysis::analyze;
use crate::candidates::CandidateList;
use crate::corpus::Record;
use crate::embeddings::{EmbeddingTable, LookupPolicy};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionSpec};
use crate::retrieval::{retrieve, InvertedIndex, LM_CHANNEL};
use crate::rm::{rm_rescore, RmConfig, RM_CHANNEL};
use crate::semantic::{
    MmpConfig, SemanticScorer, SpanConfig, MMP_CHANNEL, RWMD_CHANNEL, SRWMD_CHANNEL,
};

pub const PIPELINE_NAMES: [&str; 6] = ["lm", "lm+rwmd", "lm+mmp0.7", "lm+srwmd", "rm", "rm+srwmd"];

/// Channels a pipeline can compute and fuse.
pub const CHANNELS: [&str; 5] = [
    LM_CHANNEL,
    RM_CHANNEL,
    RWMD_CHANNEL,
    SRWMD_CHANNEL,
    MMP_CHANNEL,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub name: String,
    /// Channels to compute, in [`CHANNELS`] order.
    pub channels: Vec<String>,
    /// Present when two or more channels are fused; otherwise the single
    /// channel ranks.
    pub fusion: Option<FusionSpec>,
    /// Fixed MMP weight the pipeline name implies, if any.
    pub mmp_weight: Option<f64>,
}

fn ordered(channels: &[&str]) -> Vec<String> {
    CHANNELS
        .iter()
        .filter(|c| channels.contains(c))
        .map(|c| c.to_string())
        .collect()
}

impl Pipeline {
    pub fn named(name: &str) -> Result<Self> {
        let (channels, mmp_weight): (&[&str], _) = match name {
            "lm" => (&[LM_CHANNEL], None),
            "lm+rwmd" => (&[LM_CHANNEL, RWMD_CHANNEL], None),
            "lm+mmp0.7" => (&[LM_CHANNEL, MMP_CHANNEL], Some(0.7)),
            "lm+srwmd" => (&[LM_CHANNEL, SRWMD_CHANNEL], None),
            "rm" => (&[RM_CHANNEL], None),
            "rm+srwmd" => (&[RM_CHANNEL, SRWMD_CHANNEL], None),
            other => {
                return Err(Error::Config(format!(
                    "unknown pipeline `{other}`; valid pipelines: {}",
                    PIPELINE_NAMES.join(", ")
                )))
            }
        };
        Self::from_channels(name, channels, mmp_weight)
    }

    /// Explicit CombSUM over the listed channels.
    pub fn fused<S: AsRef<str>>(channels: &[S]) -> Result<Self> {
        let names: Vec<&str> = channels.iter().map(|c| c.as_ref()).collect();
        for c in &names {
            if !CHANNELS.contains(c) {
                return Err(Error::Config(format!(
                    "unknown channel `{c}`; valid channels: {}",
                    CHANNELS.join(", ")
                )));
            }
        }
        let spec = FusionSpec::comb_sum(names.iter().copied())?;
        let mut p = Self::from_channels(
            &format!("combsum({})", spec.channels.join(",")),
            &names,
            None,
        )?;
        p.fusion = Some(spec);
        Ok(p)
    }

    fn from_channels(name: &str, channels: &[&str], mmp_weight: Option<f64>) -> Result<Self> {
        let fusion = if channels.len() > 1 {
            Some(FusionSpec::comb_sum(channels.iter().copied())?)
        } else {
            None
        };
        Ok(Self {
            name: name.to_string(),
            channels: ordered(channels),
            fusion,
            mmp_weight,
        })
    }

    pub fn needs_embeddings(&self) -> bool {
        self.channels
            .iter()
            .any(|c| [RWMD_CHANNEL, SRWMD_CHANNEL, MMP_CHANNEL].contains(&c.as_str()))
    }

    fn has(&self, channel: &str) -> bool {
        self.channels.iter().any(|c| c == channel)
    }

    /// Channel the final list is sorted by.
    pub fn output_channel(&self) -> String {
        match &self.fusion {
            Some(_) => crate::fusion::FUSED_CHANNEL.to_string(),
            None => self.channels[0].clone(),
        }
    }
}

/// Numeric settings shared by every query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub k: usize,
    pub mu: f64,
    pub rm: RmConfig,
    pub spans: SpanConfig,
    pub mmp: MmpConfig,
    pub policy: LookupPolicy,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            k: crate::retrieval::DEFAULT_K,
            mu: crate::retrieval::DEFAULT_MU,
            rm: RmConfig::default(),
            spans: SpanConfig::default(),
            mmp: MmpConfig::default(),
            policy: LookupPolicy::default(),
        }
    }
}

pub struct Runner<'a> {
    pub index: &'a InvertedIndex,
    pub table: Option<&'a EmbeddingTable>,
    pub pipeline: Pipeline,
    pub settings: PipelineSettings,
}

impl<'a> Runner<'a> {
    pub fn new(
        index: &'a InvertedIndex,
        table: Option<&'a EmbeddingTable>,
        pipeline: Pipeline,
        settings: PipelineSettings,
    ) -> Result<Self> {
        if pipeline.needs_embeddings() && table.is_none() {
            return Err(Error::Config(format!(
                "pipeline `{}` needs an embedding table",
                pipeline.name
            )));
        }
        settings.rm.validate()?;
        settings.spans.validate()?;
        settings.mmp.validate()?;
        Ok(Self {
            index,
            table,
            pipeline,
            settings,
        })
    }

    fn scorer(&self) -> Option<SemanticScorer<'a>> {
        self.table.map(|t| {
            let mut mmp = self.settings.mmp;
            if let Some(w) = self.pipeline.mmp_weight {
                mmp.weight = w;
            }
            SemanticScorer {
                table: t,
                policy: self.settings.policy,
                spans: self.settings.spans,
                mmp,
            }
        })
    }

    /// Scorer parameters, for run metadata.
    pub fn describe(&self) -> String {
        let mut parts = vec![
            format!("pipeline={}", self.pipeline.name),
            format!("channels={}", self.pipeline.channels.join(",")),
            format!("k={}", self.settings.k),
            format!("mu={}", self.settings.mu),
        ];
        if self.pipeline.has(RM_CHANNEL) {
            let rm = &self.settings.rm;
            parts.push(format!(
                "rm=fb_docs:{},fb_terms:{},lambda:{},mu:{}",
                rm.fb_docs, rm.fb_terms, rm.interp_lambda, rm.mu
            ));
        }
        if self.pipeline.needs_embeddings() {
            if let Some(s) = self.scorer() {
                parts.push(s.describe());
            }
        }
        parts.join(" ")
    }

    /// First pass, channel scoring and fusion for one query.
    pub fn run_query(&self, query: &Record) -> Result<CandidateList> {
        let analyzer = self.index.analyzer();
        let tokens = analyze(&query.text, analyzer);
        let mut list = retrieve(
            &query.id,
            &tokens,
            self.index,
            self.settings.k,
            self.settings.mu,
        )?;
        if self.pipeline.has(RM_CHANNEL) && !list.is_empty() {
            list = rm_rescore(&tokens, &list, self.index, &self.settings.rm)?;
        }
        if let Some(scorer) = self.scorer().filter(|_| self.pipeline.needs_embeddings()) {
            let surface = analyzer.surface();
            let q = scorer
                .table
                .embed(&analyze(&query.text, &surface), scorer.policy);
            for c in &mut list.entries {
                let d = self.index.require(&c.doc_id)?;
                let answer = analyze(&self.index.doc(d).raw, &surface);
                let s = scorer.score_embedded(&q, &answer);
                if self.pipeline.has(RWMD_CHANNEL) {
                    c.channels.insert(RWMD_CHANNEL.into(), s.rwmd_q);
                }
                if self.pipeline.has(SRWMD_CHANNEL) {
                    c.channels.insert(SRWMD_CHANNEL.into(), s.s_rwmd_q);
                }
                if self.pipeline.has(MMP_CHANNEL) {
                    c.channels.insert(MMP_CHANNEL.into(), s.mmp);
                }
            }
            list.metadata.insert("semantic".into(), scorer.describe());
        }
        match &self.pipeline.fusion {
            Some(spec) => list = fuse(&list, spec)?,
            None => list.sort_by_channel(&self.pipeline.channels[0])?,
        }
        list.check()?;
        Ok(list)
    }

    /// All queries, in input order. Runs in the current rayon pool; results do
    /// not depend on its size.
    pub fn run(&self, queries: &[Record]) -> Result<Vec<CandidateList>> {
        let mut seen = BTreeSet::new();
        for q in queries {
            if !seen.insert(q.id.as_str()) {
                return Err(Error::Config(format!("duplicate query id `{}`", q.id)));
            }
        }
        queries.par_iter().map(|q| self.run_query(q)).collect()
    }
}
