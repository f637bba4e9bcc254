use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use super::markers::parse_marked_text;
use super::{CorpusError, RelationDocument, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One JSON object per line with explicit character offsets.
    Jsonl,
    /// `id \t text-with-inline-markers \t label`.
    Tsv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => DatasetFormat::Tsv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "tsv" => Ok(DatasetFormat::Tsv),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

pub fn parse_re_dataset(
    path: &Path,
    format: DatasetFormat,
) -> Result<Vec<RelationDocument>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_re_str(&content, format)
}

pub fn parse_re_str(
    content: &str,
    format: DatasetFormat,
) -> Result<Vec<RelationDocument>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let doc = match format {
            DatasetFormat::Jsonl => parse_jsonl_record(raw, line)?,
            DatasetFormat::Tsv => {
                if idx == 0 && is_tsv_header(raw) {
                    continue;
                }
                parse_tsv_record(raw, line)?
            }
        };
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn parse_jsonl_record(raw: &str, line: usize) -> Result<RelationDocument, CorpusError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
        line,
        message: e.to_string(),
    })?;
    let str_field = |field: &'static str| {
        value
            .get(field)
            .and_then(Value::as_str)
            .ok_or(CorpusError::MissingField { line, field })
    };
    let int_field = |field: &'static str| {
        value
            .get(field)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or(CorpusError::MissingField { line, field })
    };
    let id = str_field("id")?;
    let text = str_field("text")?;
    let e1 = Span::new(int_field("e1_start")?, int_field("e1_end")?);
    let e2 = Span::new(int_field("e2_start")?, int_field("e2_end")?);
    let label = str_field("label")?;
    RelationDocument::new(id, text, e1, e2, label)
        .map_err(|source| CorpusError::Validation { line, source })
}

fn is_tsv_header(raw: &str) -> bool {
    matches!(raw.split('\t').next(), Some("id") | Some("index"))
}

fn parse_tsv_record(raw: &str, line: usize) -> Result<RelationDocument, CorpusError> {
    let mut cols = raw.split('\t');
    let id = cols.next().filter(|s| !s.is_empty());
    let id = id.ok_or(CorpusError::MissingField { line, field: "id" })?;
    let marked = cols.next().ok_or(CorpusError::MissingField {
        line,
        field: "text",
    })?;
    let label = cols.next().ok_or(CorpusError::MissingField {
        line,
        field: "label",
    })?;
    if cols.next().is_some() {
        return Err(CorpusError::Malformed {
            line,
            message: "expected exactly three tab-separated columns".into(),
        });
    }
    let (text, e1, e2) =
        parse_marked_text(marked).map_err(|message| CorpusError::Malformed { line, message })?;
    RelationDocument::new(id, text, e1, e2, label.trim())
        .map_err(|source| CorpusError::Validation { line, source })
}

/// Canonical JSONL serialization, one record per line.
pub fn to_jsonl(docs: &[RelationDocument]) -> String {
    let mut out = String::new();
    for doc in docs {
        let record = json!({
            "id": doc.id,
            "text": doc.text,
            "e1_start": doc.e1_span.start,
            "e1_end": doc.e1_span.end,
            "e2_start": doc.e2_span.start,
            "e2_end": doc.e2_span.end,
            "label": doc.label,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, docs: &[RelationDocument]) -> std::io::Result<()> {
    fs::write(path, to_jsonl(docs))
}
