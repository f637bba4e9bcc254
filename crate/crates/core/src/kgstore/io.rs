use std::fs;
use std::io::Write;
use std::path::Path;

use super::{KgError, KnowledgeGraph, Triple};

/// Writes `#entities N`, `#relations M`, then one `h\tr\tt` line per triple.
pub fn write_kg(path: &Path, kg: &KnowledgeGraph) -> Result<(), KgError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(KgError::io(path))?);
    let io = KgError::io(path);
    writeln!(out, "#entities {}", kg.num_entities()).map_err(&io)?;
    writeln!(out, "#relations {}", kg.num_relations()).map_err(&io)?;
    for t in kg.triples() {
        writeln!(out, "{}\t{}\t{}", t.head, t.relation, t.tail).map_err(&io)?;
    }
    out.flush().map_err(io)
}

pub fn read_kg(path: &Path) -> Result<KnowledgeGraph, KgError> {
    let content = fs::read_to_string(path).map_err(KgError::io(path))?;
    parse_kg(&content)
}

pub(crate) fn parse_kg(content: &str) -> Result<KnowledgeGraph, KgError> {
    let mut entities = None;
    let mut relations = None;
    let mut triples = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let parse_err = |message: String| KgError::Parse {
            line: line_no,
            message,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once(' ')
                .ok_or_else(|| parse_err(format!("malformed header `{line}`")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad count `{value}`")))?;
            match key {
                "entities" => entities = Some(value),
                "relations" => relations = Some(value),
                other => return Err(parse_err(format!("unknown header `{other}`"))),
            }
            continue;
        }
        let ids: Vec<u32> = line
            .split('\t')
            .map(|f| f.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(format!("bad id: {e}")))?;
        let [h, r, t] = ids[..] else {
            return Err(parse_err(format!("expected 3 ids, found {}", ids.len())));
        };
        triples.push(Triple::new(h, r, t));
    }
    let entities = entities.ok_or(KgError::Parse {
        line: 0,
        message: "missing `#entities` header".into(),
    })?;
    let relations = relations.ok_or(KgError::Parse {
        line: 0,
        message: "missing `#relations` header".into(),
    })?;
    KnowledgeGraph::from_triples(entities, relations, triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let kg = KnowledgeGraph::from_triples(
            4,
            2,
            [
                Triple::new(0, 1, 2),
                Triple::new(3, 0, 1),
                Triple::new(0, 1, 2),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.tsv");
        write_kg(&path, &kg).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "#entities 4\n#relations 2\n0\t1\t2\n3\t0\t1\n");
        assert_eq!(read_kg(&path).unwrap(), kg);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            parse_kg("#entities 2\n#relations 1\n0\t0\n"),
            Err(KgError::Parse { line: 3, .. })
        ));
        assert!(parse_kg("0\t0\t1\n").is_err());
        assert!(matches!(
            parse_kg("#entities 2\n#relations 1\n0\t0\t5\n"),
            Err(KgError::IdOutOfRange { .. })
        ));
    }
}
