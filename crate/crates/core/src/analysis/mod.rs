//! Text analysis chain shared by indexing, querying and the embedding scorers.
//!
//! tokenize on non-alphanumeric runs -> drop possessive `'s` -> lowercase ->
//! stopword filter -> Porter stem.

pub mod porter;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Parse a stopword list: one surface form per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub strip_possessive: bool,
    pub stem: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: default_stopwords(),
            strip_possessive: true,
            stem: true,
        }
    }
}

impl AnalyzerConfig {
    /// Same chain without the stemmer; the form embedding lookups use.
    pub fn surface(&self) -> Self {
        Self {
            stem: false,
            ..self.clone()
        }
    }
}

/// Analyzed tokens in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Tokens produced by the tokenizer before stopword removal.
    pub source_length: usize,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        let source_length = tokens.len();
        Self {
            tokens,
            source_length,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Contiguous sub-sequence `tokens[start..end]`.
    pub fn slice(&self, start: usize, end: usize) -> TokenSequence {
        TokenSequence::new(self.tokens[start..end].to_vec())
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Split into maximal alphanumeric runs. With `strip_possessive`, a lone
/// `s`/`S` run glued to the previous run by a single apostrophe is dropped.
fn tokenize(text: &str, strip_possessive: bool) -> Vec<&str> {
    let mut out = Vec::new();
    // (start byte, end byte) of the previous emitted run
    let mut prev_end: Option<usize> = None;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !c.is_alphanumeric() {
            continue;
        }
        let start = i;
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = iter.peek() {
            if d.is_alphanumeric() {
                end = j + d.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let run = &text[start..end];
        let possessive = strip_possessive
            && (run == "s" || run == "S")
            && prev_end.is_some_and(|pe| {
                let gap = &text[pe..start];
                let mut chars = gap.chars();
                matches!((chars.next(), chars.next()), (Some(a), None) if is_apostrophe(a))
            });
        if !possessive {
            out.push(run);
        }
        prev_end = Some(end);
    }
    out
}

fn stem_token(token: String) -> String {
    if !token.is_empty() && token.bytes().all(|b| b.is_ascii_lowercase()) {
        porter::stem(&token)
    } else {
        token
    }
}

/// Run the full analysis chain. Pure: identical input and config always give
/// identical output.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> TokenSequence {
    let raw = tokenize(text, config.strip_possessive);
    let source_length = raw.len();
    let tokens = raw
        .into_iter()
        .map(|t| {
            if config.lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .filter(|t| !config.stopwords.contains(t))
        .map(|t| if config.stem { stem_token(t) } else { t })
        .filter(|t| !t.is_empty())
        .collect();
    TokenSequence {
        tokens,
        source_length,
    }
}

/// Contiguous n-grams joined by a single space.
///
/// # Panics
/// If `n == 0`.
pub fn ngrams(seq: &TokenSequence, n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram order must be at least 1");
    if seq.len() < n {
        return Vec::new();
    }
    seq.tokens.windows(n).map(|w| w.join(" ")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(seq: &TokenSequence) -> Vec<&str> {
        seq.iter().collect()
    }

    #[test]
    fn empty_input() {
        let seq = analyze("", &AnalyzerConfig::default());
        assert!(seq.is_empty());
        assert_eq!(seq.source_length, 0);
    }

    #[test]
    fn insurer_policies() {
        let seq = analyze("The insurer's policies", &AnalyzerConfig::default());
        assert_eq!(toks(&seq), ["insur", "polici"]);
        assert_eq!(seq.source_length, 3);
    }

    #[test]
    fn curly_apostrophe_possessive() {
        let seq = analyze(
            "the insurer\u{2019}s cover",
            &AnalyzerConfig::default().surface(),
        );
        assert_eq!(toks(&seq), ["insurer", "cover"]);
    }

    #[test]
    fn possessive_kept_when_disabled() {
        let cfg = AnalyzerConfig {
            strip_possessive: false,
            stem: false,
            ..AnalyzerConfig::default()
        };
        let seq = analyze("insurer's", &cfg);
        assert_eq!(toks(&seq), ["insurer", "s"]);
    }

    #[test]
    fn standalone_s_is_not_possessive() {
        let cfg = AnalyzerConfig::default().surface();
        assert_eq!(toks(&analyze("s vitamin", &cfg)), ["s", "vitamin"]);
        assert_eq!(toks(&analyze("x '' s", &cfg)), ["x", "s"]);
    }

    #[test]
    fn stopwords_match_after_lowercasing() {
        let seq = analyze("THE And Health", &AnalyzerConfig::default());
        assert_eq!(toks(&seq), ["health"]);
        let case_kept = AnalyzerConfig {
            lowercase: false,
            stem: false,
            ..AnalyzerConfig::default()
        };
        assert_eq!(toks(&analyze("THE the x", &case_kept)), ["THE", "x"]);
    }

    #[test]
    fn non_ascii_passes_through_stemmer() {
        let seq = analyze("Über naïve running", &AnalyzerConfig::default());
        assert_eq!(toks(&seq), ["über", "naïve", "run"]);
    }

    #[test]
    fn deterministic() {
        let cfg = AnalyzerConfig::default();
        assert_eq!(
            analyze("Health Insurance", &cfg),
            analyze("Health Insurance", &cfg)
        );
    }

    #[test]
    fn stopword_file_format() {
        let set = parse_stopwords("# header\nthe\n  a  # trailing\n\nof\n");
        assert_eq!(set.into_iter().collect::<Vec<_>>(), ["a", "of", "the"]);
        assert_eq!(default_stopwords().len(), 33);
    }

    #[test]
    fn ngram_examples() {
        let abc = TokenSequence::new(vec!["a".into(), "b".into(), "c".into()]);
        assert_eq!(ngrams(&abc, 2), ["a b", "b c"]);
        assert!(ngrams(&TokenSequence::new(vec!["a".into()]), 2).is_empty());
        let abcd = TokenSequence::new(["a", "b", "c", "d"].map(String::from).to_vec());
        assert_eq!(ngrams(&abcd, 3), ["a b c", "b c d"]);
    }

    #[test]
    #[should_panic]
    fn ngram_zero_panics() {
        ngrams(&TokenSequence::default(), 0);
    }

    // Porter is not idempotent on every English word, so the fixed-point
    // property is checked over this vocabulary; see `stems_that_move_again`.
    const WORDS: &[&str] = &[
        "health",
        "insurance",
        "insurer",
        "policies",
        "policy",
        "coverage",
        "looking",
        "start",
        "starting",
        "internet",
        "quotes",
        "premium",
        "premiums",
        "deductible",
        "claims",
        "claimed",
        "doctor",
        "hospital",
        "medical",
        "cheap",
        "price",
        "prices",
        "family",
        "families",
        "plans",
        "planning",
        "benefits",
        "retirement",
        "life",
        "car",
        "vehicle",
        "driving",
        "accident",
        "home",
        "damage",
        "flood",
        "theft",
        "disability",
        "income",
        "monthly",
        "payment",
        "running",
        "relational",
        "conditional",
        "generalization",
        "electrical",
        "adjustment",
        "goodness",
        "hopeful",
        "allowance",
        "society",
        "economics",
        "scanners",
        "nation",
        "success",
        "debate",
        "century",
    ];

    #[test]
    fn stems_that_move_again() {
        for (word, first, second) in [
            ("agreed", "agre", "agr"),
            ("employer", "employ", "emploi"),
            ("house", "hous", "hou"),
            ("universal", "univers", "univ"),
        ] {
            assert_eq!(porter::stem(word), first);
            assert_eq!(porter::stem(first), second);
        }
    }

    #[test]
    fn reanalysis_is_fixed_point_on_vocabulary() {
        let cfg = AnalyzerConfig::default();
        let text = WORDS.join(" ");
        let once = analyze(&text, &cfg);
        let twice = analyze(&once.tokens.join(" "), &cfg);
        assert_eq!(once.tokens, twice.tokens);
    }

    proptest! {
        #[test]
        fn token_count_bounded(text in "[a-zA-Z' ,.’0-9é]{0,80}") {
            let seq = analyze(&text, &AnalyzerConfig::default());
            prop_assert!(seq.len() <= seq.source_length);
            prop_assert!(seq.tokens.iter().all(|t| !t.is_empty()));
        }

        #[test]
        fn reanalysis_fixed_point(idx in proptest::collection::vec(0..WORDS.len(), 0..20)) {
            let cfg = AnalyzerConfig::default();
            let text: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
            let once = analyze(&text.join(" "), &cfg);
            let twice = analyze(&once.tokens.join(" "), &cfg);
            prop_assert_eq!(once.tokens, twice.tokens);
        }
    }
}
