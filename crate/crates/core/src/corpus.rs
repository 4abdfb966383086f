//! Corpus and query file readers.
//!
//! Two layouts are accepted: JSON lines (`{"id": .., "text": ..}` or named
//! fields joined according to a field list) and two-column TSV (`id<TAB>text`).
//! The layout is picked from the extension: `.jsonl`/`.json` vs anything else.

use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// A raw record: id plus the text to analyze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub text: String,
}

/// How multi-field JSON records become a single text field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldRule {
    pub fields: Vec<String>,
    pub separator: String,
}

impl Default for FieldRule {
    fn default() -> Self {
        Self {
            fields: vec!["text".to_string()],
            separator: " ".to_string(),
        }
    }
}

impl FieldRule {
    pub fn parse(spec: &str) -> Self {
        Self {
            fields: spec
                .split(',')
                .map(|f| f.trim().to_string())
                .filter(|f| !f.is_empty())
                .collect(),
            separator: " ".to_string(),
        }
    }
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("json") | Some("ndjson")
    )
}

pub fn read_records(path: &Path, rule: &FieldRule) -> Result<Vec<Record>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let json = is_jsonl(path);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = if json {
            parse_json_record(&line, rule).map_err(|m| Error::parse(path, line_no, m))?
        } else {
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, line_no, "expected `id<TAB>text`"))?;
            Record {
                id: id.trim().to_string(),
                text: text.to_string(),
            }
        };
        if record.id.is_empty() || record.id.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                path,
                line_no,
                format!("id `{}` is empty or contains whitespace", record.id),
            ));
        }
        out.push(record);
    }
    Ok(out)
}

fn parse_json_record(line: &str, rule: &FieldRule) -> std::result::Result<Record, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("expected a JSON object")?;
    let id = match obj.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err("missing string or number field `id`".to_string()),
    };
    let mut parts = Vec::new();
    for field in &rule.fields {
        match obj.get(field) {
            Some(serde_json::Value::String(s)) => parts.push(s.as_str()),
            Some(serde_json::Value::Null) | None => {}
            Some(_) => return Err(format!("field `{field}` is not a string")),
        }
    }
    if parts.is_empty() {
        return Err(format!("none of the fields {:?} present", rule.fields));
    }
    Ok(Record {
        id,
        text: parts.join(&rule.separator),
    })
}
