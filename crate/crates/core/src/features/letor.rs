//! SVMrank/LETOR text format.
//!
//! Each row is `<label> qid:<qid> 1:<v1> ... k:<vk> # <doc>`; columns flagged
//! missing are listed after the doc id as `missing=<i>,<j>`. The column names
//! live in a `<file>.schema` sidecar, one `index<TAB>name` per line under a
//! `# schema <sha256>` header.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{schema_hash, FeatureMatrix, FeatureRow};

pub fn schema_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema");
    PathBuf::from(s)
}

/// Write rows sorted by (query id, doc id) plus the schema sidecar.
pub fn export_letor(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut sorted = matrix.clone();
    sorted.sort_rows();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in &sorted.rows {
        write!(w, "{} qid:{}", r.label, r.query_id).map_err(io)?;
        for (i, v) in r.values.iter().enumerate() {
            write!(w, " {}:{}", i + 1, v).map_err(io)?;
        }
        write!(w, " # {}", r.doc_id).map_err(io)?;
        let missing: Vec<String> = r
            .missing
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        if !missing.is_empty() {
            write!(w, " missing={}", missing.join(",")).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let sp = schema_path(path);
    let io = |e| Error::io(&sp, e);
    let mut w = BufWriter::new(std::fs::File::create(&sp).map_err(io)?);
    writeln!(w, "# schema {}", schema_hash(&matrix.schema)).map_err(io)?;
    for (i, name) in matrix.schema.iter().enumerate() {
        writeln!(w, "{}\t{}", i + 1, name).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_schema(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut schema = Vec::new();
    let mut declared = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix("# schema ") {
            declared = Some(h.trim().to_string());
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (idx, name) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `index<TAB>name`"))?;
        if idx.trim().parse::<usize>().ok() != Some(schema.len() + 1) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected index {}", schema.len() + 1),
            ));
        }
        schema.push(name.to_string());
    }
    if let Some(h) = declared {
        if h != schema_hash(&schema) {
            return Err(Error::SchemaMismatch(format!(
                "{}: header hash does not match the listed columns",
                path.display()
            )));
        }
    }
    Ok(schema)
}

/// Read a LETOR file and its schema sidecar.
pub fn parse_letor(path: &Path) -> Result<FeatureMatrix> {
    let schema = read_schema(&schema_path(path))?;
    let width = schema.len();
    let mut matrix = FeatureMatrix::new(schema);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::parse(path, i + 1, m);
        let (body, comment) = line
            .split_once('#')
            .ok_or_else(|| bad("missing `# <doc id>` comment".into()))?;
        let mut comment = comment.split_whitespace();
        let doc_id = comment
            .next()
            .ok_or_else(|| bad("missing doc id".into()))?
            .to_string();
        let mut missing = vec![false; width];
        for extra in comment {
            let list = extra
                .strip_prefix("missing=")
                .ok_or_else(|| bad(format!("unexpected comment field `{extra}`")))?;
            for j in list.split(',') {
                let j: usize = j
                    .parse()
                    .map_err(|_| bad(format!("bad missing index `{j}`")))?;
                if j == 0 || j > width {
                    return Err(bad(format!("missing index {j} out of range")));
                }
                missing[j - 1] = true;
            }
        }
        let mut fields = body.split_whitespace();
        let label: u32 = fields
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| bad("bad label".into()))?;
        let query_id = fields
            .next()
            .and_then(|q| q.strip_prefix("qid:"))
            .ok_or_else(|| bad("expected `qid:<id>`".into()))?
            .to_string();
        let mut values = vec![0.0; width];
        for f in fields {
            let (k, v) = f
                .split_once(':')
                .ok_or_else(|| bad(format!("bad feature `{f}`")))?;
            let k: usize = k
                .parse()
                .map_err(|_| bad(format!("bad feature index `{k}`")))?;
            if k == 0 || k > width {
                return Err(bad(format!("feature index {k} outside schema of {width}")));
            }
            values[k - 1] = v
                .parse()
                .map_err(|_| bad(format!("bad feature value `{v}`")))?;
        }
        matrix.push(FeatureRow {
            query_id,
            doc_id,
            label,
            values,
            missing,
        })?;
    }
    Ok(matrix)
}
