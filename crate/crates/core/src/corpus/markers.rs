use serde::{Deserialize, Serialize};

use super::tokenize::tokenize_chars;
use super::{validate_spans, RelationDocument, Span, SpanError};

/// Marker pair wrapping the first entity (`e1`), whatever its position.
pub const E1_OPEN: &str = "<<";
pub const E1_CLOSE: &str = ">>";
/// Marker pair wrapping the second entity (`e2`).
pub const E2_OPEN: &str = "[[";
pub const E2_CLOSE: &str = "]]";

pub const MARKERS: [&str; 4] = [E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: String,
    pub head_entity: String,
    pub tail_entity: String,
}

/// Tokenizes the document and wraps e1 in `<< >>` and e2 in `[[ ]]`.
///
/// Text is tokenized segment by segment around the entity spans, so a span
/// boundary falling inside a word splits that word.
pub fn insert_entity_markers(doc: &RelationDocument) -> Result<MarkedDocument, SpanError> {
    let chars: Vec<char> = doc.text.chars().collect();
    validate_spans(doc.e1_span, doc.e2_span, chars.len())?;

    let e1 = (doc.e1_span, E1_OPEN, E1_CLOSE);
    let e2 = (doc.e2_span, E2_OPEN, E2_CLOSE);
    let (first, second) = if doc.e1_span.start <= doc.e2_span.start {
        (e1, e2)
    } else {
        (e2, e1)
    };

    let mut tokens = Vec::new();
    let mut cursor = 0;
    for (span, open, close) in [first, second] {
        tokens.extend(tokenize_chars(&chars[cursor..span.start]));
        tokens.push(open.to_string());
        tokens.extend(tokenize_chars(&chars[span.start..span.end]));
        tokens.push(close.to_string());
        cursor = span.end;
    }
    tokens.extend(tokenize_chars(&chars[cursor..]));

    Ok(MarkedDocument {
        id: doc.id.clone(),
        tokens,
        label: doc.label.clone(),
        head_entity: doc.head_key(),
        tail_entity: doc.tail_key(),
    })
}

pub fn strip_markers(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !MARKERS.contains(&t.as_str()))
        .cloned()
        .collect()
}

/// Recovers raw text and entity spans from text with inline markers, as
/// found in the three-column TSV exports.
///
/// A single whitespace character after an opening marker and before a
/// closing marker belongs to the marker.
pub(crate) fn parse_marked_text(marked: &str) -> Result<(String, Span, Span), String> {
    let chars: Vec<char> = marked.chars().collect();
    let mut out: Vec<char> = Vec::with_capacity(chars.len());
    let mut e1: (Option<usize>, Option<usize>) = (None, None);
    let mut e2: (Option<usize>, Option<usize>) = (None, None);

    let mut i = 0;
    while i < chars.len() {
        let marker = MARKERS
            .iter()
            .find(|m| chars[i..].starts_with(&m.chars().collect::<Vec<_>>()));
        let Some(&marker) = marker else {
            out.push(chars[i]);
            i += 1;
            continue;
        };
        i += 2;
        let slot = if marker == E1_OPEN || marker == E1_CLOSE {
            &mut e1
        } else {
            &mut e2
        };
        if marker == E1_OPEN || marker == E2_OPEN {
            if slot.0.is_some() {
                return Err(format!("marker `{marker}` appears more than once"));
            }
            if i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            slot.0 = Some(out.len());
        } else {
            if slot.1.is_some() {
                return Err(format!("marker `{marker}` appears more than once"));
            }
            if slot.0.is_none() {
                return Err(format!(
                    "closing marker `{marker}` before its opening marker"
                ));
            }
            if out.last().is_some_and(|c| c.is_whitespace()) {
                out.pop();
            }
            slot.1 = Some(out.len());
        }
    }

    let span = |slot: (Option<usize>, Option<usize>), name: &str| match slot {
        (Some(s), Some(e)) => Ok(Span::new(s, e)),
        _ => Err(format!("missing markers for {name}")),
    };
    let e1 = span(e1, "e1")?;
    let e2 = span(e2, "e2")?;
    Ok((out.into_iter().collect(), e1, e2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    const FIG_TEXT: &str = "Androgen antagonistic effect of estramustine phosphate (EMP) metabolites on wild-type and mutated androgen receptor.";

    fn fig_doc() -> RelationDocument {
        let start = FIG_TEXT.find("androgen receptor").unwrap();
        RelationDocument::new(
            "fig",
            FIG_TEXT,
            Span::new(0, 8),
            Span::new(start, start + "androgen receptor".len()),
            "CPR:3",
        )
        .unwrap()
    }

    #[test]
    fn figure_example() {
        let marked = insert_entity_markers(&fig_doc()).unwrap();
        let joined = marked.tokens.join(" ");
        assert!(joined.starts_with("<< Androgen >> antagonistic effect"));
        assert!(joined.ends_with("mutated [[ androgen receptor ]] ."));
        assert_eq!(marked.head_entity, "androgen");
        assert_eq!(marked.tail_entity, "androgen receptor");
        for m in MARKERS {
            assert_eq!(marked.tokens.iter().filter(|t| *t == m).count(), 1);
        }
    }

    #[test]
    fn adjacent_entities_keep_order() {
        // e2 precedes e1 and the two are adjacent tokens.
        let d = RelationDocument::new("adj", "foo bar baz", Span::new(4, 7), Span::new(0, 3), "r")
            .unwrap();
        let marked = insert_entity_markers(&d).unwrap();
        assert_eq!(
            marked.tokens,
            vec!["[[", "foo", "]]", "<<", "bar", ">>", "baz"]
        );
        assert_eq!(strip_markers(&marked.tokens), tokenize("foo bar baz"));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let mut d = fig_doc();
        d.e2_span = Span::new(2, 10);
        assert!(matches!(
            insert_entity_markers(&d),
            Err(SpanError::Overlap { .. })
        ));
    }

    #[test]
    fn mid_token_span_splits_the_token() {
        let d = RelationDocument::new(
            "m",
            "androgens bind",
            Span::new(0, 8),
            Span::new(10, 14),
            "r",
        )
        .unwrap();
        let marked = insert_entity_markers(&d).unwrap();
        assert_eq!(
            marked.tokens,
            vec!["<<", "androgen", ">>", "s", "[[", "bind", "]]"]
        );
    }

    #[test]
    fn parses_inline_markers() {
        let marked = "<< Androgen >> effect on [[ androgen receptor ]].";
        let (text, e1, e2) = parse_marked_text(marked).unwrap();
        assert_eq!(text, "Androgen effect on androgen receptor.");
        let d = RelationDocument::new("t", text, e1, e2, "r").unwrap();
        assert_eq!(d.e1_text, "Androgen");
        assert_eq!(d.e2_text, "androgen receptor");
    }

    #[test]
    fn inline_marker_errors() {
        assert!(parse_marked_text("<< a >> b").is_err());
        assert!(parse_marked_text("<< a >> << b >> [[ c ]]").is_err());
        assert!(parse_marked_text(">> a << [[ c ]]").is_err());
    }
}
