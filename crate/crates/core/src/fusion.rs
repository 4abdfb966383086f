//! Per-query min-max normalization and CombSUM.

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateList;
use crate::error::{Error, Result};

pub const FUSED_CHANNEL: &str = "combsum";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combiner {
    CombSum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub channels: Vec<String>,
    pub normalization: Normalization,
    pub combiner: Combiner,
}

impl FusionSpec {
    pub fn comb_sum<S: Into<String>>(channels: impl IntoIterator<Item = S>) -> Result<Self> {
        let spec = Self {
            channels: channels.into_iter().map(Into::into).collect(),
            normalization: Normalization::MinMax,
            combiner: Combiner::CombSum,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::Config(format!(
                "fusion needs at least two channels, got {:?}",
                self.channels
            )));
        }
        let mut sorted = self.channels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.channels.len() {
            return Err(Error::Config(format!(
                "fusion channels must be distinct, got {:?}",
                self.channels
            )));
        }
        Ok(())
    }
}

pub fn norm_channel(channel: &str) -> String {
    format!("{channel}.norm")
}

/// Adds `<channel>.norm` = `(x - min) / (max - min)` over this list. A
/// constant channel maps to 0.5 and is flagged in the metadata.
pub fn min_max_normalize(candidates: &CandidateList, channel: &str) -> Result<CandidateList> {
    let values = candidates.values(channel)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = norm_channel(channel);
    let degenerate = !(max > min);
    let mut out = candidates.clone();
    for (c, x) in out.entries.iter_mut().zip(values) {
        let v = if degenerate {
            0.5
        } else {
            (x - min) / (max - min)
        };
        c.channels.insert(target.clone(), v);
    }
    if degenerate && !out.is_empty() {
        out.metadata
            .insert(format!("{target}.degenerate"), "true".into());
    }
    Ok(out)
}

/// Unweighted sum of the normalized channels named by `spec`, re-sorted.
///
/// Channels are summed in sorted name order so the output does not depend on
/// how `spec` lists them.
pub fn comb_sum(candidates: &CandidateList, spec: &FusionSpec) -> Result<CandidateList> {
    spec.validate()?;
    let mut names: Vec<String> = spec.channels.iter().map(|c| norm_channel(c)).collect();
    names.sort();
    let mut out = candidates.clone();
    for c in &mut out.entries {
        let mut total = 0.0;
        for n in &names {
            total += c.channel(n)?;
        }
        c.channels.insert(FUSED_CHANNEL.to_string(), total);
    }
    out.sort_by_channel(FUSED_CHANNEL)?;
    let mut listed = spec.channels.clone();
    listed.sort();
    out.metadata.insert(
        FUSED_CHANNEL.into(),
        format!("minmax+combsum({})", listed.join(",")),
    );
    Ok(out)
}

/// Normalize every channel in `spec`, then CombSUM.
pub fn fuse(candidates: &CandidateList, spec: &FusionSpec) -> Result<CandidateList> {
    let mut list = candidates.clone();
    for c in &spec.channels {
        list = min_max_normalize(&list, c)?;
    }
    comb_sum(&list, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::Candidate;
    use approx::assert_abs_diff_eq;

    fn list(channel: &str, values: &[f64]) -> CandidateList {
        let mut l = CandidateList::new("q", channel);
        l.entries = values
            .iter()
            .enumerate()
            .map(|(i, v)| Candidate::new(format!("d{}", i + 1)).with(channel, *v))
            .collect();
        l
    }

    fn norm_values(l: &CandidateList, c: &str) -> Vec<f64> {
        l.values(&norm_channel(c)).unwrap()
    }

    #[test]
    fn affine_map() {
        let out = min_max_normalize(&list("s", &[2.0, 4.0, 6.0]), "s").unwrap();
        assert_eq!(norm_values(&out, "s"), [0.0, 0.5, 1.0]);
        assert!(!out.metadata.contains_key("s.norm.degenerate"));
    }

    #[test]
    fn constant_and_single() {
        let out = min_max_normalize(&list("s", &[3.0, 3.0]), "s").unwrap();
        assert_eq!(norm_values(&out, "s"), [0.5, 0.5]);
        assert_eq!(out.metadata["s.norm.degenerate"], "true");
        let out = min_max_normalize(&list("s", &[7.0]), "s").unwrap();
        assert_eq!(norm_values(&out, "s"), [0.5]);
    }

    #[test]
    fn missing_channel() {
        assert!(min_max_normalize(&list("s", &[1.0]), "t").is_err());
        let l = min_max_normalize(&list("s", &[1.0, 2.0]), "s").unwrap();
        let spec = FusionSpec::comb_sum(["s", "t"]).unwrap();
        assert!(matches!(
            comb_sum(&l, &spec),
            Err(Error::MissingChannel { .. })
        ));
    }

    #[test]
    fn spec_needs_two_distinct_channels() {
        assert!(FusionSpec::comb_sum(["lm"]).is_err());
        assert!(FusionSpec::comb_sum(["lm", "lm"]).is_err());
    }

    #[test]
    fn opposite_channels_tie_by_doc_id() {
        let mut l = CandidateList::new("q", "a");
        l.entries = vec![
            Candidate::new("d2").with("a.norm", 0.0).with("b.norm", 1.0),
            Candidate::new("d1").with("a.norm", 1.0).with("b.norm", 0.0),
        ];
        let out = comb_sum(&l, &FusionSpec::comb_sum(["a", "b"]).unwrap()).unwrap();
        assert_eq!(out.values(FUSED_CHANNEL).unwrap(), [1.0, 1.0]);
        assert_eq!(out.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);
    }

    #[test]
    fn three_doc_arithmetic() {
        let mut l = CandidateList::new("q", "lm");
        let lm = [1.0, 0.5, 0.0];
        let sr = [0.0, 1.0, 0.5];
        l.entries = (0..3)
            .map(|i| {
                Candidate::new(format!("d{}", i + 1))
                    .with("lm.norm", lm[i])
                    .with("srwmd.norm", sr[i])
            })
            .collect();
        let out = comb_sum(&l, &FusionSpec::comb_sum(["lm", "srwmd"]).unwrap()).unwrap();
        assert_eq!(out.doc_ids().collect::<Vec<_>>(), ["d2", "d1", "d3"]);
        let fused = out.values(FUSED_CHANNEL).unwrap();
        assert_abs_diff_eq!(fused[0], 1.5);
        assert_abs_diff_eq!(fused[1], 1.0);
        assert_abs_diff_eq!(fused[2], 0.5);
    }

    #[test]
    fn identical_channels_keep_ranking() {
        let mut l = list("a", &[0.3, 0.9, 0.1, 0.5]);
        for c in &mut l.entries {
            let v = c.channels["a"];
            c.channels.insert("b".into(), v);
        }
        l.sort_by_channel("a").unwrap();
        let out = fuse(&l, &FusionSpec::comb_sum(["a", "b"]).unwrap()).unwrap();
        assert_eq!(
            out.doc_ids().collect::<Vec<_>>(),
            l.doc_ids().collect::<Vec<_>>()
        );
    }
}
