//! First-pass retrieval: inverted index plus Dirichlet LM scoring.

mod index;
mod lm;
mod persist;

pub use index::{InvertedIndex, Posting, StoredDoc};
pub use lm::{lm_dirichlet_score, retrieve, term_score, DEFAULT_K, DEFAULT_MU, LM_CHANNEL};
pub use persist::{index_exists, DOCS_FILE, FORMAT_VERSION, POSTINGS_FILE, STATS_FILE};
