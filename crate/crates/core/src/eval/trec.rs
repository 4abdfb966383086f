use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::candidates::CandidateList;
use crate::error::{Error, Result};

use super::Judgments;

/// Rankings read from a TREC run file, per query in rank order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub tag: String,
    pub rankings: BTreeMap<String, Vec<String>>,
}

/// Qrels lines: `qid iter docid rel`.
pub fn read_qrels(path: &Path) -> Result<Judgments> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut j = Judgments::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(path, i + 1, "expected `qid 0 docid rel`"));
        }
        let rel: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad relevance `{}`", fields[3])))?;
        // negative grades (some collections use -1 for "junk") count as non-relevant
        j.insert(fields[0], fields[2], rel.max(0) as u32);
    }
    Ok(j)
}

/// Run lines: `qid Q0 docid rank score tag`. Documents are ordered by the
/// rank column.
pub fn read_run(path: &Path) -> Result<Run> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: BTreeMap<String, Vec<(u64, String)>> = BTreeMap::new();
    let mut tag = String::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                i + 1,
                "expected `qid Q0 docid rank score tag`",
            ));
        }
        let rank: u64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad rank `{}`", fields[3])))?;
        fields[4]
            .parse::<f64>()
            .map_err(|_| Error::parse(path, i + 1, format!("bad score `{}`", fields[4])))?;
        if tag.is_empty() {
            tag = fields[5].to_string();
        }
        rows.entry(fields[0].to_string())
            .or_default()
            .push((rank, fields[2].to_string()));
    }
    let rankings = rows
        .into_iter()
        .map(|(q, mut docs)| {
            docs.sort();
            (q, docs.into_iter().map(|(_, d)| d).collect())
        })
        .collect();
    Ok(Run { tag, rankings })
}

/// Write candidate lists in their current order. Scores come from each
/// list's active channel.
pub fn write_run(path: &Path, lists: &[CandidateList], tag: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for list in lists {
        for (rank, c) in list.entries.iter().enumerate() {
            let score = c.channel(&list.active)?;
            writeln!(
                w,
                "{} Q0 {} {} {:.6} {}",
                list.query_id,
                c.doc_id,
                rank + 1,
                score,
                tag
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
