//! Relation-extraction documents: loading, entity markers, triple
//! extraction and evaluation splits.

mod loader;
mod markers;
mod split;
mod tokenize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loader::{parse_re_dataset, parse_re_str, to_jsonl, write_jsonl, DatasetFormat};
pub use markers::{
    insert_entity_markers, strip_markers, MarkedDocument, E1_CLOSE, E1_OPEN, E2_CLOSE, E2_OPEN,
    MARKERS,
};
pub use split::{make_heldout_relation_split, split_documents, HeldoutSplit, SplitSpec};
pub use tokenize::{tokenize, tokenize_chars};

/// Half-open character range `[start, end)` into a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("{which} span {span} is empty")]
    Empty { which: &'static str, span: Span },
    #[error("{which} span {span} exceeds text length {len}")]
    OutOfBounds {
        which: &'static str,
        span: Span,
        len: usize,
    },
    #[error("entity spans {e1} and {e2} overlap")]
    Overlap { e1: Span, e2: Span },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: missing or invalid field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Validation {
        line: usize,
        #[source]
        source: SpanError,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("invalid split configuration: {0}")]
    Config(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labeled relation-extraction example.
///
/// Constructed through [`RelationDocument::new`], which checks the span
/// invariants and fills `e1_text` / `e2_text` from the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDocument {
    pub id: String,
    pub text: String,
    pub e1_span: Span,
    pub e2_span: Span,
    pub e1_text: String,
    pub e2_text: String,
    pub label: String,
}

impl RelationDocument {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        e1_span: Span,
        e2_span: Span,
        label: impl Into<String>,
    ) -> Result<Self, SpanError> {
        let text = text.into();
        let len = text.chars().count();
        validate_spans(e1_span, e2_span, len)?;
        let e1_text = char_slice(&text, e1_span);
        let e2_text = char_slice(&text, e2_span);
        Ok(RelationDocument {
            id: id.into(),
            text,
            e1_span,
            e2_span,
            e1_text,
            e2_text,
            label: label.into(),
        })
    }

    /// Re-checks the span invariants (fields are public and may have been
    /// edited after construction).
    pub fn validate(&self) -> Result<(), SpanError> {
        validate_spans(self.e1_span, self.e2_span, self.text.chars().count())
    }

    /// Normalized head entity, the KG node key.
    pub fn head_key(&self) -> String {
        entity_key(&self.e1_text)
    }

    /// Normalized tail entity, the KG node key.
    pub fn tail_key(&self) -> String {
        entity_key(&self.e2_text)
    }

    pub fn pair_key(&self) -> (String, String) {
        (self.head_key(), self.tail_key())
    }
}

pub(crate) fn validate_spans(e1: Span, e2: Span, len: usize) -> Result<(), SpanError> {
    for (which, span) in [("e1", e1), ("e2", e2)] {
        if span.is_empty() {
            return Err(SpanError::Empty { which, span });
        }
        if span.end > len {
            return Err(SpanError::OutOfBounds { which, span, len });
        }
    }
    if e1.overlaps(&e2) {
        return Err(SpanError::Overlap { e1, e2 });
    }
    Ok(())
}

fn char_slice(text: &str, span: Span) -> String {
    text.chars().skip(span.start).take(span.len()).collect()
}

/// Entity identity: lowercased surface string with whitespace collapsed.
/// No entity typing is applied.
pub fn entity_key(surface: &str) -> String {
    surface
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A KG edge before vocabulary encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SurfaceTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl SurfaceTriple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        SurfaceTriple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleExtraction {
    pub triples: Vec<SurfaceTriple>,
    /// Documents skipped because their label was empty.
    pub skipped_unlabeled: usize,
}

/// Projects each training document onto `(e1, label, e2)`.
///
/// Duplicates are kept; the knowledge graph deduplicates on build.
pub fn extract_triples(docs: &[RelationDocument]) -> TripleExtraction {
    let mut out = TripleExtraction::default();
    for doc in docs {
        if doc.label.trim().is_empty() {
            out.skipped_unlabeled += 1;
            continue;
        }
        out.triples.push(SurfaceTriple::new(
            doc.head_key(),
            doc.label.clone(),
            doc.tail_key(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, e1: &str, label: &str, e2: &str) -> RelationDocument {
        let text = format!("{e1} acts on {e2}");
        let e1_len = e1.chars().count();
        let e2_start = e1_len + " acts on ".len();
        RelationDocument::new(
            id,
            text,
            Span::new(0, e1_len),
            Span::new(e2_start, e2_start + e2.chars().count()),
            label,
        )
        .unwrap()
    }

    #[test]
    fn constructor_fills_entity_text() {
        let d = doc("d1", "estramustine", "inhibitor", "androgen receptor");
        assert_eq!(d.e1_text, "estramustine");
        assert_eq!(d.e2_text, "androgen receptor");
    }

    #[test]
    fn span_errors() {
        let text = "abc def";
        assert!(matches!(
            RelationDocument::new("x", text, Span::new(0, 3), Span::new(4, 8), "r"),
            Err(SpanError::OutOfBounds { which: "e2", .. })
        ));
        assert!(matches!(
            RelationDocument::new("x", text, Span::new(0, 3), Span::new(2, 5), "r"),
            Err(SpanError::Overlap { .. })
        ));
        assert!(matches!(
            RelationDocument::new("x", text, Span::new(1, 1), Span::new(4, 7), "r"),
            Err(SpanError::Empty { .. })
        ));
    }

    #[test]
    fn extract_is_direct_projection() {
        let d = doc("d1", "estramustine", "inhibitor", "androgen receptor");
        let ex = extract_triples(&[d]);
        assert_eq!(
            ex.triples,
            vec![SurfaceTriple::new(
                "estramustine",
                "inhibitor",
                "androgen receptor"
            )]
        );
    }

    #[test]
    fn extract_keeps_multiplicity_and_skips_unlabeled() {
        let docs = vec![
            doc("a", "X", "r", "Y"),
            doc("b", "x", "r", "y"),
            doc("c", "X", "r", "Y"),
            doc("d", "X", "", "Y"),
        ];
        let ex = extract_triples(&docs);
        assert_eq!(ex.triples.len(), 3);
        assert_eq!(ex.skipped_unlabeled, 1);
        assert!(ex.triples.iter().all(|t| t == &ex.triples[0]));
    }

    #[test]
    fn entity_key_normalizes() {
        assert_eq!(entity_key("  Androgen   Receptor "), "androgen receptor");
    }
}
