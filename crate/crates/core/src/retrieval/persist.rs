//! On-disk index layout: three binary tables in one directory.
//!
//! Each file opens with the 7-byte magic `EMBRIDX`, a one-byte table tag
//! (`S`, `P` or `D`) and a little-endian `u32` format version. Strings are a
//! `u32` byte length followed by UTF-8 bytes. See `docs/index-format.md`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::analysis::{AnalyzerConfig, TokenSequence};
use crate::error::{Error, Result};

use super::{InvertedIndex, Posting, StoredDoc};

const MAGIC: &[u8; 7] = b"EMBRIDX";
pub const FORMAT_VERSION: u32 = 1;

pub const STATS_FILE: &str = "stats.bin";
pub const POSTINGS_FILE: &str = "postings.bin";
pub const DOCS_FILE: &str = "docs.bin";

struct Writer {
    path: PathBuf,
    w: BufWriter<File>,
}

impl Writer {
    fn create(dir: &Path, name: &str, tag: u8) -> Result<Self> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            path,
            w: BufWriter::new(file),
        };
        w.bytes(MAGIC)?;
        w.bytes(&[tag])?;
        w.u32(FORMAT_VERSION)?;
        Ok(w)
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: u32) -> Result<()> {
        self.w
            .write_u32::<LittleEndian>(v)
            .map_err(|e| Error::io(&self.path, e))
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.w
            .write_u64::<LittleEndian>(v)
            .map_err(|e| Error::io(&self.path, e))
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

struct Reader {
    path: PathBuf,
    r: BufReader<File>,
    offset: u64,
}

impl Reader {
    fn open(dir: &Path, name: &str, tag: u8) -> Result<Self> {
        let path = dir.join(name);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut r = Self {
            path,
            r: BufReader::new(file),
            offset: 0,
        };
        let mut magic = [0u8; 8];
        r.fill(&mut magic)?;
        if &magic[..7] != MAGIC || magic[7] != tag {
            return Err(r.corrupt("bad magic or table tag"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.corrupt(&format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        Ok(r)
    }

    fn corrupt(&self, msg: &str) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: 0,
            message: format!("{msg} at byte offset {}", self.offset),
        }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.r
            .read_exact(buf)
            .map_err(|_| self.corrupt("unexpected end of table"))?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let v = self
            .r
            .read_u32::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end of table"))?;
        self.offset += 4;
        Ok(v)
    }

    fn u64(&mut self) -> Result<u64> {
        let v = self
            .r
            .read_u64::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end of table"))?;
        self.offset += 8;
        Ok(v)
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = vec![0u8; len];
        self.fill(&mut buf)?;
        String::from_utf8(buf).map_err(|_| self.corrupt("string is not UTF-8"))
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.r.read(&mut b) {
            Ok(0) => Ok(()),
            _ => Err(self.corrupt("trailing bytes")),
        }
    }
}

/// True if `dir` already holds any index table.
pub fn index_exists(dir: &Path) -> bool {
    [STATS_FILE, POSTINGS_FILE, DOCS_FILE]
        .iter()
        .any(|f| dir.join(f).exists())
}

impl InvertedIndex {
    /// Persist into `dir`, creating it if needed. Refuses to overwrite an
    /// existing index unless `force` is set.
    pub fn save(&self, dir: &Path, force: bool) -> Result<()> {
        if index_exists(dir) && !force {
            return Err(Error::Config(format!(
                "index already exists in {} (use --force to overwrite)",
                dir.display()
            )));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut w = Writer::create(dir, STATS_FILE, b'S')?;
        w.u8(self.analyzer.lowercase as u8)?;
        w.u8(self.analyzer.strip_possessive as u8)?;
        w.u8(self.analyzer.stem as u8)?;
        w.u32(self.analyzer.stopwords.len() as u32)?;
        for s in &self.analyzer.stopwords {
            w.str(s)?;
        }
        w.u32(self.doc_ids.len() as u32)?;
        for (id, &len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            w.str(id)?;
            w.u32(len)?;
        }
        w.u64(self.collection_length)?;
        w.finish()?;

        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        let mut w = Writer::create(dir, POSTINGS_FILE, b'P')?;
        w.u32(terms.len() as u32)?;
        for term in terms {
            w.str(term)?;
            w.u64(self.collection_tf(term))?;
            let list = &self.postings[term];
            w.u32(list.len() as u32)?;
            for p in list {
                w.u32(p.doc)?;
                w.u32(p.tf)?;
            }
        }
        w.finish()?;

        let mut w = Writer::create(dir, DOCS_FILE, b'D')?;
        w.u32(self.docs.len() as u32)?;
        for doc in &self.docs {
            w.str(&doc.raw)?;
            w.u32(doc.tokens.source_length as u32)?;
            w.u32(doc.tokens.len() as u32)?;
            for t in doc.tokens.iter() {
                w.str(t)?;
            }
        }
        w.finish()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut r = Reader::open(dir, STATS_FILE, b'S')?;
        let lowercase = r.u8()? != 0;
        let strip_possessive = r.u8()? != 0;
        let stem = r.u8()? != 0;
        let n_stop = r.u32()?;
        let mut stopwords = std::collections::BTreeSet::new();
        for _ in 0..n_stop {
            stopwords.insert(r.str()?);
        }
        let analyzer = AnalyzerConfig {
            lowercase,
            stopwords,
            strip_possessive,
            stem,
        };
        let n_docs = r.u32()? as usize;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        let mut doc_lookup = HashMap::with_capacity(n_docs);
        for i in 0..n_docs {
            let id = r.str()?;
            doc_lengths.push(r.u32()?);
            if doc_lookup.insert(id.clone(), i as u32).is_some() {
                return Err(Error::Invariant(format!(
                    "duplicate doc id `{id}` in stored index"
                )));
            }
            doc_ids.push(id);
        }
        let collection_length = r.u64()?;
        r.expect_eof()?;

        let mut r = Reader::open(dir, POSTINGS_FILE, b'P')?;
        let n_terms = r.u32()? as usize;
        let mut postings = HashMap::with_capacity(n_terms);
        let mut collection_tf = HashMap::with_capacity(n_terms);
        for _ in 0..n_terms {
            let term = r.str()?;
            let cf = r.u64()?;
            let n = r.u32()? as usize;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let doc = r.u32()?;
                let tf = r.u32()?;
                if doc as usize >= n_docs {
                    return Err(r.corrupt("posting refers to unknown document"));
                }
                list.push(Posting { doc, tf });
            }
            collection_tf.insert(term.clone(), cf);
            postings.insert(term, list);
        }
        r.expect_eof()?;

        let mut r = Reader::open(dir, DOCS_FILE, b'D')?;
        let n = r.u32()? as usize;
        if n != n_docs {
            return Err(Error::Invariant(format!(
                "doc store has {n} documents, statistics table has {n_docs}"
            )));
        }
        let mut docs = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = r.str()?;
            let source_length = r.u32()? as usize;
            let nt = r.u32()? as usize;
            let mut tokens = Vec::with_capacity(nt);
            for _ in 0..nt {
                tokens.push(r.str()?);
            }
            docs.push(StoredDoc {
                raw,
                tokens: TokenSequence {
                    tokens,
                    source_length,
                },
            });
        }
        r.expect_eof()?;

        let terms_by_cf = super::index::sort_by_cf(&collection_tf);
        let index = InvertedIndex {
            analyzer,
            doc_ids,
            doc_lookup,
            docs,
            doc_lengths,
            postings,
            collection_tf,
            collection_length,
            terms_by_cf,
        };
        index.check_invariants()?;
        for (i, doc) in index.docs.iter().enumerate() {
            if doc.tokens.len() as u32 != index.doc_lengths[i] {
                return Err(Error::Invariant(format!(
                    "stored length of `{}` disagrees with its tokens",
                    index.doc_ids[i]
                )));
            }
        }
        Ok(index)
    }
}
