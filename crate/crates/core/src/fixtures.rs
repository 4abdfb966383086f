//! Bundled toy data and a seeded synthetic dataset generator.
//!
//! The toy set is 12 documents, 6 queries, qrels and a 10-term, 8-dimension
//! embedding table. Documents `d10` and `d11` hold the same tokens; `d11`
//! puts the three terms of query `q6` next to each other while `d10` spreads
//! them more than a span apart.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Record;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::Judgments;

pub const CORPUS_TSV: &str = include_str!("../fixtures/corpus.tsv");
pub const QUERIES_TSV: &str = include_str!("../fixtures/queries.tsv");
pub const QRELS: &str = include_str!("../fixtures/qrels.txt");
pub const EMBEDDINGS_TXT: &str = include_str!("../fixtures/embeddings.txt");

pub const PROXIMITY_QUERY: &str = "q6";
pub const CLUSTERED_DOC: &str = "d11";
pub const SCATTERED_DOC: &str = "d10";

fn tsv(text: &str) -> Vec<Record> {
    text.lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(id, t)| Record {
            id: id.to_string(),
            text: t.to_string(),
        })
        .collect()
}

pub fn corpus() -> Vec<Record> {
    tsv(CORPUS_TSV)
}

pub fn queries() -> Vec<Record> {
    tsv(QUERIES_TSV)
}

pub fn judgments() -> Judgments {
    let mut j = Judgments::default();
    for l in QRELS.lines() {
        let f: Vec<&str> = l.split_whitespace().collect();
        if let [q, _, d, r] = f[..] {
            j.insert(q, d, r.parse().expect("bundled qrels"));
        }
    }
    j
}

pub fn embeddings() -> EmbeddingTable {
    let rows = EMBEDDINGS_TXT.lines().skip(1).map(|l| {
        let mut parts = l.split_whitespace();
        let word = parts.next().expect("bundled embeddings").to_string();
        let v: Vec<f64> = parts
            .map(|x| x.parse().expect("bundled embeddings"))
            .collect();
        (word, v)
    });
    EmbeddingTable::from_rows(8, rows).expect("bundled embeddings")
}

/// File names written by [`write_bundled`].
pub const FILES: [(&str, &str); 4] = [
    ("corpus.tsv", CORPUS_TSV),
    ("queries.tsv", QUERIES_TSV),
    ("qrels.txt", QRELS),
    ("embeddings.txt", EMBEDDINGS_TXT),
];

pub fn write_bundled(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in FILES {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// A generated dataset where word overlap and meaning disagree.
pub struct Planted {
    pub corpus: Vec<Record>,
    pub queries: Vec<Record>,
    pub judgments: Judgments,
    pub table: EmbeddingTable,
}

pub const PLANTED_DIM: usize = 16;
const SYNONYMS: usize = 4;
const CONCEPTS_PER_QUERY: usize = 3;
const RELEVANT_PER_QUERY: usize = 2;
const DISTRACTORS_PER_QUERY: usize = 6;
const NOISE_WORDS: usize = 300;

/// Letters-only pseudo-word for `n`. Syllables are consonant + vowel with
/// vowels `a`, `o`, `u`, which no stemmer rule touches.
fn pseudo_word(n: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aou";
    let base = C.len() * V.len();
    let mut n = n;
    let mut s = String::new();
    for _ in 0..3 {
        let k = n % base;
        s.push(C[k / V.len()] as char);
        s.push(V[k % V.len()] as char);
        n /= base;
    }
    s
}

/// Each query names three concepts by their first synonym. Relevant answers
/// mention every concept, mostly through other synonyms and with at least
/// one exact query word. Distractors repeat query words more often but leave
/// at least one concept out. Everything else is random noise vocabulary.
pub fn planted_semantics(n_queries: usize, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroid = Normal::new(0.0, 1.0).expect("unit normal");
    let jitter = Normal::new(0.0, 0.15).expect("jitter");
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut next = 0usize;
    let mut fresh = || {
        next += 1;
        pseudo_word(next)
    };

    let noise: Vec<String> = (0..NOISE_WORDS).map(|_| fresh()).collect();
    for w in &noise {
        rows.push((
            w.clone(),
            (0..PLANTED_DIM)
                .map(|_| centroid.sample(&mut rng))
                .collect(),
        ));
    }

    let mut corpus = Vec::new();
    let mut queries = Vec::new();
    let mut judgments = Judgments::default();
    let mut doc_no = 0usize;
    for q in 0..n_queries {
        let concepts: Vec<Vec<String>> = (0..CONCEPTS_PER_QUERY)
            .map(|_| {
                let c: Vec<f64> = (0..PLANTED_DIM)
                    .map(|_| centroid.sample(&mut rng))
                    .collect();
                (0..SYNONYMS)
                    .map(|_| {
                        let w = fresh();
                        let v = c.iter().map(|x| x + jitter.sample(&mut rng)).collect();
                        rows.push((w.clone(), v));
                        w
                    })
                    .collect()
            })
            .collect();
        let qid = format!("p{q:03}");
        queries.push(Record {
            id: qid.clone(),
            text: concepts
                .iter()
                .map(|s| s[0].as_str())
                .collect::<Vec<_>>()
                .join(" "),
        });

        let mut make_doc = |content: Vec<String>, rng: &mut ChaCha8Rng| {
            let n_noise = rng.gen_range(6..14);
            let mut words = content;
            words.extend((0..n_noise).map(|_| noise.choose(rng).unwrap().clone()));
            words.shuffle(rng);
            doc_no += 1;
            Record {
                id: format!("x{doc_no:05}"),
                text: words.join(" "),
            }
        };

        for _ in 0..RELEVANT_PER_QUERY {
            let exact_at = rng.gen_range(0..CONCEPTS_PER_QUERY);
            let content = concepts
                .iter()
                .enumerate()
                .map(|(i, syn)| {
                    if i == exact_at || rng.gen_bool(0.2) {
                        syn[0].clone()
                    } else {
                        syn[rng.gen_range(1..SYNONYMS)].clone()
                    }
                })
                .collect();
            let doc = make_doc(content, &mut rng);
            judgments.insert(&qid, &doc.id, 1);
            corpus.push(doc);
        }
        for _ in 0..DISTRACTORS_PER_QUERY {
            let left_out = rng.gen_range(0..CONCEPTS_PER_QUERY);
            let mut content = Vec::new();
            for (i, syn) in concepts.iter().enumerate() {
                if i == left_out {
                    continue;
                }
                content.push(syn[0].clone());
                if rng.gen_bool(0.5) {
                    content.push(syn[0].clone());
                }
            }
            let doc = make_doc(content, &mut rng);
            judgments.insert(&qid, &doc.id, 0);
            corpus.push(doc);
        }
    }
    Planted {
        corpus,
        queries,
        judgments,
        table: EmbeddingTable::from_rows(PLANTED_DIM, rows).expect("generated rows"),
    }
}
