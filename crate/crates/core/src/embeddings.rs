//! Pre-trained word vectors and the cosine primitives every semantic scorer uses.
//!
//! Vectors are L2-normalized at load, so cosine between stored vectors is a
//! plain dot product. OOV tokens are skipped rather than mapped to a
//! fabricated vector.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::analysis::{porter, TokenSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingFormat {
    Word2VecText,
    Word2VecBinary,
    GloveText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec_text" => Ok(Self::Word2VecText),
            "word2vec_binary" => Ok(Self::Word2VecBinary),
            "glove_text" => Ok(Self::GloveText),
            other => Err(Error::Config(format!(
                "unknown embedding format `{other}` (expected word2vec_text, word2vec_binary or glove_text)"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Word2VecText => "word2vec_text",
            Self::Word2VecBinary => "word2vec_binary",
            Self::GloveText => "glove_text",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OovHandling {
    #[default]
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupPolicy {
    pub try_surface_then_stem: bool,
    pub oov: OovHandling,
}

impl Default for LookupPolicy {
    fn default() -> Self {
        Self {
            try_surface_then_stem: true,
            oov: OovHandling::Skip,
        }
    }
}

impl fmt::Display for LookupPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.try_surface_then_stem {
            "surface_then_stem"
        } else {
            "surface_only"
        };
        write!(f, "{mode},oov=skip")
    }
}

/// Vocabulary-to-vector map, read-only after load.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    unit_normalized: bool,
    /// Rows discarded at load because their norm was zero.
    pub dropped_zero: usize,
    /// Rows discarded at load because the token had already been seen.
    pub dropped_duplicate: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            unit_normalized: true,
            dropped_zero: 0,
            dropped_duplicate: 0,
        }
    }

    /// Build a normalized table from `(token, vector)` rows. Duplicate tokens
    /// keep the first occurrence; zero vectors are dropped.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::new(dim);
        for (i, (word, vec)) in rows.into_iter().enumerate() {
            table.insert(word.into(), &vec, || format!("row {}", i + 1))?;
        }
        Ok(table)
    }

    fn insert(
        &mut self,
        word: String,
        vec: &[f64],
        location: impl FnOnce() -> String,
    ) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::DimensionMismatch {
                location: location(),
                expected: self.dim,
                found: vec.len(),
            });
        }
        if self.index.contains_key(&word) {
            self.dropped_duplicate += 1;
            return Ok(());
        }
        let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            self.dropped_zero += 1;
            return Ok(());
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend(vec.iter().map(|x| x / norm));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unit_normalized(&self) -> bool {
        self.unit_normalized
    }

    /// Tokens in load order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Surface form first; optionally the Porter stem of it as a fallback.
    pub fn lookup(&self, token: &str, policy: LookupPolicy) -> Option<&[f64]> {
        self.get(token).or_else(|| {
            if policy.try_surface_then_stem && token.bytes().all(|b| b.is_ascii_lowercase()) {
                let stemmed = porter::stem(token);
                if stemmed != token {
                    return self.get(&stemmed);
                }
            }
            None
        })
    }

    /// Resolve every token position; OOV positions hold `None`.
    pub fn embed<'t>(
        &'t self,
        seq: &TokenSequence,
        policy: LookupPolicy,
    ) -> Vec<Option<&'t [f64]>> {
        seq.iter().map(|t| self.lookup(t, policy)).collect()
    }

    pub fn load(path: &Path, format: EmbeddingFormat) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let table = match format {
            EmbeddingFormat::Word2VecText => read_text(reader, path, true)?,
            EmbeddingFormat::GloveText => read_text(reader, path, false)?,
            EmbeddingFormat::Word2VecBinary => read_binary(reader, path)?,
        };
        if table.dropped_zero > 0 {
            log::warn!(
                "{}: dropped {} zero-norm vectors",
                path.display(),
                table.dropped_zero
            );
        }
        Ok(table)
    }

    pub fn write_word2vec_text(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for word in &self.words {
            write!(w, "{word}").map_err(io)?;
            for x in self.get(word).unwrap() {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn write_word2vec_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for word in &self.words {
            w.write_all(word.as_bytes()).map_err(io)?;
            w.write_all(b" ").map_err(io)?;
            for &x in self.get(word).unwrap() {
                w.write_f32::<LittleEndian>(x as f32).map_err(io)?;
            }
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn parse_header(line: &str, path: &Path) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let count = parts.next().and_then(|s| s.parse::<usize>().ok());
    let dim = parts.next().and_then(|s| s.parse::<usize>().ok());
    match (count, dim, parts.next()) {
        (Some(c), Some(d), None) if d > 0 => Ok((c, d)),
        _ => Err(Error::parse(
            path,
            1,
            format!(
                "malformed header `{}` (expected `<count> <dim>`)",
                line.trim()
            ),
        )),
    }
}

fn read_text<R: BufRead>(reader: R, path: &Path, has_header: bool) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut expected_rows = None;
    let mut rows = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if has_header && line_no == 1 {
            let (count, dim) = parse_header(&line, path)?;
            expected_rows = Some(count);
            table = Some(EmbeddingTable::new(dim));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap().to_string();
        let vec = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, line_no, format!("bad float `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        // row numbers are counted among vector rows, excluding the header
        let row = rows + 1;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vec.len()));
        if table.dim == 0 {
            return Err(Error::parse(path, line_no, "row has no vector components"));
        }
        table.insert(word, &vec, || {
            format!("{}:{line_no} (row {row})", path.display())
        })?;
        rows += 1;
    }
    let table = table.ok_or_else(|| Error::parse(path, 1, "empty embedding file"))?;
    if let Some(count) = expected_rows {
        if count != rows {
            log::warn!(
                "{}: header declares {count} rows, found {rows}",
                path.display()
            );
        }
    }
    Ok(table)
}

fn read_binary<R: BufRead>(mut reader: R, path: &Path) -> Result<EmbeddingTable> {
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let mut offset = header.len() as u64;
    let (count, dim) = parse_header(&header, path)?;
    let mut table = EmbeddingTable::new(dim);
    let mut vec = vec![0.0f64; dim];
    for row in 1..=count {
        let mut word = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            match reader.read(&mut byte) {
                Ok(0) => {
                    return Err(Error::parse(
                        path,
                        row,
                        format!("unexpected end of file at byte offset {offset} (row {row})"),
                    ))
                }
                Ok(_) => {}
                Err(e) => return Err(Error::io(path, e)),
            }
            offset += 1;
            match byte[0] {
                b' ' => break,
                b'\n' if word.is_empty() => continue,
                b => word.push(b),
            }
        }
        let word = String::from_utf8(word).map_err(|_| {
            Error::parse(
                path,
                row,
                format!("token is not UTF-8 at byte offset {offset}"),
            )
        })?;
        for x in vec.iter_mut() {
            *x = reader.read_f32::<LittleEndian>().map_err(|_| {
                Error::parse(
                    path,
                    row,
                    format!("truncated vector for `{word}` at byte offset {offset}"),
                )
            })? as f64;
            offset += 4;
        }
        table.insert(word, &vec, || format!("row {row}"))?;
    }
    Ok(table)
}

/// Dot product accumulated in f64.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            location: "cosine".into(),
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine between two vectors already of unit length.
#[inline]
pub fn unit_cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}
