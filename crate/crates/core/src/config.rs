//! Run configuration: a plain `key = value` file plus overrides.
//!
//! Later assignments win, so applying the file and then command-line
//! overrides gives flag > file > default. [`RunConfig::resolved`] writes every
//! key back out in a fixed order; loading that snapshot reproduces the run.

use std::path::{Path, PathBuf};

use crate::analysis::{default_stopwords, load_stopwords, AnalyzerConfig};
use crate::corpus::FieldRule;
use crate::embeddings::EmbeddingFormat;
use crate::error::{Error, Result};
use crate::features::{FeatureSet, TrainParams};
use crate::retrieval::{DEFAULT_K, DEFAULT_MU};
use crate::rm::RmConfig;
use crate::semantic::{MmpConfig, SpanConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub corpus_fields: String,
    pub queries: Option<PathBuf>,
    pub query_fields: String,
    pub qrels: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embeddings_format: EmbeddingFormat,
    pub index_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,

    pub lowercase: bool,
    /// `default`, `none` or a path to a one-word-per-line list.
    pub stopwords: String,
    pub strip_possessive: bool,
    pub stem: bool,

    pub k: usize,
    pub mu: f64,
    pub pipeline: String,
    /// Explicit CombSUM channels; overrides the pipeline's fusion when set.
    pub fusion: Option<Vec<String>>,

    pub rm: RmConfig,
    pub spans: SpanConfig,
    pub mmp: MmpConfig,

    pub features: FeatureSet,
    pub standardize: bool,
    pub train: TrainParams,
    pub folds: usize,

    pub seed: u64,
    pub run_tag: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            corpus_fields: "text".into(),
            queries: None,
            query_fields: "text".into(),
            qrels: None,
            embeddings: None,
            embeddings_format: EmbeddingFormat::Word2VecText,
            index_dir: None,
            output_dir: None,
            lowercase: true,
            stopwords: "default".into(),
            strip_possessive: true,
            stem: true,
            k: DEFAULT_K,
            mu: DEFAULT_MU,
            pipeline: "lm".into(),
            fusion: None,
            rm: RmConfig::default(),
            spans: SpanConfig::default(),
            mmp: MmpConfig::default(),
            features: FeatureSet::BaseEmbedding,
            standardize: true,
            train: TrainParams::default(),
            folds: 5,
            seed: 42,
            run_tag: "embrank".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "corpus",
        "corpus_fields",
        "queries",
        "query_fields",
        "qrels",
        "embeddings",
        "embeddings_format",
        "index_dir",
        "output_dir",
        "lowercase",
        "stopwords",
        "strip_possessive",
        "stem",
        "k",
        "mu",
        "pipeline",
        "fusion",
        "rm.fb_docs",
        "rm.fb_terms",
        "rm.lambda",
        "rm.mu",
        "span.length",
        "span.stride",
        "mmp.weight",
        "mmp.prefix",
        "features",
        "standardize",
        "train.restarts",
        "train.grid",
        "train.max_passes",
        "folds",
        "seed",
        "run_tag",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "corpus" => self.corpus = opt_path(v),
            "corpus_fields" => self.corpus_fields = v.into(),
            "queries" => self.queries = opt_path(v),
            "query_fields" => self.query_fields = v.into(),
            "qrels" => self.qrels = opt_path(v),
            "embeddings" => self.embeddings = opt_path(v),
            "embeddings_format" => self.embeddings_format = v.parse()?,
            "index_dir" => self.index_dir = opt_path(v),
            "output_dir" => self.output_dir = opt_path(v),
            "lowercase" => self.lowercase = parse_bool(key, v)?,
            "stopwords" => self.stopwords = v.into(),
            "strip_possessive" => self.strip_possessive = parse_bool(key, v)?,
            "stem" => self.stem = parse_bool(key, v)?,
            "k" => self.k = parse(key, v)?,
            "mu" => self.mu = parse(key, v)?,
            "pipeline" => self.pipeline = v.into(),
            "fusion" => {
                self.fusion = if v.is_empty() {
                    None
                } else {
                    Some(v.split(',').map(|c| c.trim().to_string()).collect())
                }
            }
            "rm.fb_docs" => self.rm.fb_docs = parse(key, v)?,
            "rm.fb_terms" => self.rm.fb_terms = parse(key, v)?,
            "rm.lambda" => self.rm.interp_lambda = parse(key, v)?,
            "rm.mu" => self.rm.mu = parse(key, v)?,
            "span.length" => self.spans.span_length = parse(key, v)?,
            "span.stride" => self.spans.stride = parse(key, v)?,
            "mmp.weight" => self.mmp.weight = parse(key, v)?,
            "mmp.prefix" => self.mmp.prefix_tokens = parse(key, v)?,
            "features" => self.features = v.parse()?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "train.restarts" => self.train.restarts = parse(key, v)?,
            "train.grid" => {
                self.train.grid = v
                    .split(',')
                    .map(|g| parse(key, g.trim()))
                    .collect::<Result<_>>()?
            }
            "train.max_passes" => self.train.max_passes = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "seed" => {
                self.seed = parse(key, v)?;
                self.train.seed = self.seed;
            }
            "run_tag" => {
                if v.is_empty() || v.chars().any(char::is_whitespace) {
                    return Err(Error::Config(
                        "run_tag must be a single non-empty word".into(),
                    ));
                }
                self.run_tag = v.into()
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown key `{other}`; valid keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "corpus" => show_path(&self.corpus),
            "corpus_fields" => self.corpus_fields.clone(),
            "queries" => show_path(&self.queries),
            "query_fields" => self.query_fields.clone(),
            "qrels" => show_path(&self.qrels),
            "embeddings" => show_path(&self.embeddings),
            "embeddings_format" => self.embeddings_format.to_string(),
            "index_dir" => show_path(&self.index_dir),
            "output_dir" => show_path(&self.output_dir),
            "lowercase" => self.lowercase.to_string(),
            "stopwords" => self.stopwords.clone(),
            "strip_possessive" => self.strip_possessive.to_string(),
            "stem" => self.stem.to_string(),
            "k" => self.k.to_string(),
            "mu" => self.mu.to_string(),
            "pipeline" => self.pipeline.clone(),
            "fusion" => self
                .fusion
                .as_ref()
                .map(|f| f.join(","))
                .unwrap_or_default(),
            "rm.fb_docs" => self.rm.fb_docs.to_string(),
            "rm.fb_terms" => self.rm.fb_terms.to_string(),
            "rm.lambda" => self.rm.interp_lambda.to_string(),
            "rm.mu" => self.rm.mu.to_string(),
            "span.length" => self.spans.span_length.to_string(),
            "span.stride" => self.spans.stride.to_string(),
            "mmp.weight" => self.mmp.weight.to_string(),
            "mmp.prefix" => self.mmp.prefix_tokens.to_string(),
            "features" => self.features.to_string(),
            "standardize" => self.standardize.to_string(),
            "train.restarts" => self.train.restarts.to_string(),
            "train.grid" => self
                .train
                .grid
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "train.max_passes" => self.train.max_passes.to_string(),
            "folds" => self.folds.to_string(),
            "seed" => self.seed.to_string(),
            "run_tag" => self.run_tag.clone(),
            _ => return None,
        })
    }

    /// Apply `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            self.set(k, v)
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(k, v)
    }

    /// Every key with its effective value, one per line.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).expect("listed key")));
        }
        out
    }

    pub fn analyzer(&self) -> Result<AnalyzerConfig> {
        let stopwords = match self.stopwords.as_str() {
            "default" => default_stopwords(),
            "none" | "" => Default::default(),
            path => load_stopwords(Path::new(path))?,
        };
        Ok(AnalyzerConfig {
            lowercase: self.lowercase,
            stopwords,
            strip_possessive: self.strip_possessive,
            stem: self.stem,
        })
    }

    pub fn corpus_rule(&self) -> FieldRule {
        FieldRule::parse(&self.corpus_fields)
    }

    pub fn query_rule(&self) -> FieldRule {
        FieldRule::parse(&self.query_fields)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config("mu must be positive".into()));
        }
        self.rm.validate()?;
        self.spans.validate()?;
        self.mmp.validate()?;
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        Ok(())
    }

    /// A path option that the current command needs.
    pub fn require<'a>(&self, name: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{name}` is not set")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_snapshot() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\nk = 50\nmu=1000\npipeline = lm+srwmd\n",
            Path::new("x"),
        )
        .unwrap();
        cfg.apply_override("k=10").unwrap();
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.mu, 1000.0);
        let snap = cfg.resolved();
        let mut again = RunConfig::default();
        again.apply_text(&snap, Path::new("snap")).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.resolved(), snap);
    }

    #[test]
    fn every_key_round_trips() {
        let cfg = RunConfig::default();
        for key in RunConfig::KEYS {
            let mut c = RunConfig::default();
            c.set(key, &cfg.get(key).unwrap()).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }

    #[test]
    fn errors() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("k", "many").is_err());
        assert!(matches!(
            cfg.apply_text("k 5\n", Path::new("c")),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(cfg.apply_override("k").is_err());
    }
}
