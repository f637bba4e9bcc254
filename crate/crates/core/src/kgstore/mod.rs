//! Integer-encoded triple store with pair index and negative sampling.

mod io;
mod sampling;
mod vocab;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_kg, write_kg};
pub use sampling::{
    sample_negative, NegativeSample, NegativeStrategy, Slot, SlotWeights, MAX_RESAMPLE,
};
pub use vocab::{EntityVocab, RelationVocab, Vocab};

use crate::corpus::SurfaceTriple;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("duplicate vocabulary entry `{0}`")]
    DuplicateVocabEntry(String),
    #[error("triple {triple:?} out of range for |E|={entities}, |R|={relations}")]
    IdOutOfRange {
        triple: Triple,
        entities: usize,
        relations: usize,
    },
    #[error("no slot can be corrupted with |E|={entities}, |R|={relations}")]
    NoCorruptibleSlot { entities: usize, relations: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl KgError {
    pub(crate) fn io(path: &Path) -> impl Fn(std::io::Error) -> KgError + '_ {
        move |source| KgError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Deduplicated, immutable set of triples.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_relations: usize,
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    pair_index: HashMap<(u32, u32), BTreeSet<u32>>,
}

impl KnowledgeGraph {
    pub fn from_triples<I>(
        num_entities: usize,
        num_relations: usize,
        triples: I,
    ) -> Result<Self, KgError>
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut unique = BTreeSet::new();
        for t in triples {
            if t.head as usize >= num_entities
                || t.tail as usize >= num_entities
                || t.relation as usize >= num_relations
            {
                return Err(KgError::IdOutOfRange {
                    triple: t,
                    entities: num_entities,
                    relations: num_relations,
                });
            }
            unique.insert(t);
        }
        let triples: Vec<Triple> = unique.into_iter().collect();
        let members = triples.iter().copied().collect();
        let mut pair_index: HashMap<(u32, u32), BTreeSet<u32>> = HashMap::new();
        for t in &triples {
            pair_index
                .entry((t.head, t.tail))
                .or_default()
                .insert(t.relation);
        }
        Ok(KnowledgeGraph {
            num_entities,
            num_relations,
            triples,
            members,
            pair_index,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in ascending `(head, relation, tail)` order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    /// Relations observed between `head` and `tail`, ascending.
    pub fn relations_between(&self, head: u32, tail: u32) -> impl Iterator<Item = u32> + '_ {
        self.pair_index
            .get(&(head, tail))
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_index.len()
    }
}

/// Encodes surface triples through the given vocabularies and deduplicates.
pub fn build_kg(
    surface: &[SurfaceTriple],
    entities: &EntityVocab,
    relations: &RelationVocab,
) -> Result<KnowledgeGraph, KgError> {
    let encoded = surface
        .iter()
        .map(|s| {
            let head = entities
                .id(&s.head)
                .ok_or_else(|| KgError::UnknownEntity(s.head.clone()))?;
            let relation = relations
                .id(&s.relation)
                .ok_or_else(|| KgError::UnknownRelation(s.relation.clone()))?;
            let tail = entities
                .id(&s.tail)
                .ok_or_else(|| KgError::UnknownEntity(s.tail.clone()))?;
            Ok(Triple::new(head, relation, tail))
        })
        .collect::<Result<Vec<_>, KgError>>()?;
    KnowledgeGraph::from_triples(entities.len(), relations.len(), encoded)
}
