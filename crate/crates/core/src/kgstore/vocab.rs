use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::KgError;
use crate::corpus::SurfaceTriple;

/// Bijection between strings and contiguous ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

pub type EntityVocab = Vocab;
pub type RelationVocab = Vocab;

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, KgError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab::new();
        for name in names {
            let name = name.into();
            if vocab.ids.contains_key(&name) {
                return Err(KgError::DuplicateVocabEntry(name));
            }
            vocab.insert(&name);
        }
        Ok(vocab)
    }

    /// Entity and relation vocabularies in first-seen order.
    pub fn from_triples(triples: &[SurfaceTriple]) -> (EntityVocab, RelationVocab) {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        for t in triples {
            entities.insert(&t.head);
            relations.insert(&t.relation);
            entities.insert(&t.tail);
        }
        (entities, relations)
    }

    /// Returns the id of `name`, assigning the next free id if new.
    pub fn insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// One name per line; the line index is the id.
    pub fn write(&self, path: &Path) -> Result<(), KgError> {
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(KgError::io(path))?);
        for name in &self.names {
            writeln!(out, "{name}").map_err(KgError::io(path))?;
        }
        out.flush().map_err(KgError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self, KgError> {
        let content = fs::read_to_string(path).map_err(KgError::io(path))?;
        Vocab::from_names(content.lines())
    }
}
