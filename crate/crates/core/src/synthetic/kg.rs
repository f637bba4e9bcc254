use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kgstore::{KgError, KnowledgeGraph, Triple};

/// A generated graph with its held-out evaluation triples.
#[derive(Debug, Clone)]
pub struct SyntheticKg {
    /// Training triples only.
    pub kg: KnowledgeGraph,
    pub test: Vec<Triple>,
    /// Training and test triples together, for filtered ranking.
    pub all: KnowledgeGraph,
}

/// Entities partitioned into types; the relation of every pair is a fixed
/// function of the (head type, tail type) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockKgSpec {
    pub types: usize,
    pub entities_per_type: usize,
    pub relations: usize,
    pub train_triples: usize,
    pub test_triples: usize,
    pub seed: u64,
}

impl Default for BlockKgSpec {
    fn default() -> Self {
        BlockKgSpec {
            types: 4,
            entities_per_type: 10,
            relations: 4,
            train_triples: 300,
            test_triples: 100,
            seed: 0,
        }
    }
}

impl BlockKgSpec {
    pub fn entity_type(&self, entity: u32) -> usize {
        entity as usize / self.entities_per_type
    }

    /// Relation assigned to a type pair; every relation is used when
    /// `types >= relations`, and the table is asymmetric.
    pub fn relation_for(&self, head_type: usize, tail_type: usize) -> u32 {
        ((head_type + 2 * tail_type) % self.relations) as u32
    }

    pub fn generate(&self) -> Result<SyntheticKg, KgError> {
        let n = self.types * self.entities_per_type;
        let mut pairs: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|h| (0..n as u32).filter(move |&t| t != h).map(move |t| (h, t)))
            .collect();
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let need = self.train_triples + self.test_triples;
        if need > pairs.len() {
            return Err(KgError::Parse {
                line: 0,
                message: format!(
                    "{need} triples requested but only {} pairs exist",
                    pairs.len()
                ),
            });
        }
        let triple = |&(h, t): &(u32, u32)| {
            Triple::new(
                h,
                self.relation_for(self.entity_type(h), self.entity_type(t)),
                t,
            )
        };
        let train: Vec<Triple> = pairs[..self.train_triples].iter().map(triple).collect();
        let test: Vec<Triple> = pairs[self.train_triples..need].iter().map(triple).collect();
        finish(n, self.relations, train, test)
    }
}

/// Graph mixing symmetric and antisymmetric relations.
///
/// * `same_group` / `cross_group`: symmetric relations among the entities
///   of type A, split into `groups` groups of `group_size` (same group vs
///   different group).
/// * `forward` / `backward`: every (B, C) pair carries `forward`, every
///   (C, B) pair carries `backward`.
///
/// A bilinear diagonal score cannot tell `forward` from `backward`; a
/// translation cannot separate two symmetric relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingKgSpec {
    pub groups: usize,
    pub group_size: usize,
    pub side_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for OrderingKgSpec {
    fn default() -> Self {
        OrderingKgSpec {
            groups: 2,
            group_size: 6,
            side_size: 4,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

pub const SAME_GROUP: u32 = 0;
pub const CROSS_GROUP: u32 = 1;
pub const FORWARD: u32 = 2;
pub const BACKWARD: u32 = 3;

impl OrderingKgSpec {
    pub fn num_entities(&self) -> usize {
        self.groups * self.group_size + 2 * self.side_size
    }

    pub fn all_triples(&self) -> Vec<Triple> {
        let a = (self.groups * self.group_size) as u32;
        let b0 = a;
        let c0 = a + self.side_size as u32;
        let group = |e: u32| e as usize / self.group_size;
        let mut out = Vec::new();
        for h in 0..a {
            for t in 0..a {
                if h != t {
                    let r = if group(h) == group(t) {
                        SAME_GROUP
                    } else {
                        CROSS_GROUP
                    };
                    out.push(Triple::new(h, r, t));
                }
            }
        }
        for i in 0..self.side_size as u32 {
            for j in 0..self.side_size as u32 {
                out.push(Triple::new(b0 + i, FORWARD, c0 + j));
                out.push(Triple::new(c0 + j, BACKWARD, b0 + i));
            }
        }
        out
    }

    pub fn generate(&self) -> Result<SyntheticKg, KgError> {
        let mut triples = self.all_triples();
        triples.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let n_test = (triples.len() as f64 * self.test_fraction).round() as usize;
        let test = triples.split_off(triples.len() - n_test);
        finish(self.num_entities(), 4, triples, test)
    }
}

fn finish(
    n: usize,
    r: usize,
    train: Vec<Triple>,
    test: Vec<Triple>,
) -> Result<SyntheticKg, KgError> {
    let kg = KnowledgeGraph::from_triples(n, r, train.iter().copied())?;
    let all = KnowledgeGraph::from_triples(n, r, train.into_iter().chain(test.iter().copied()))?;
    Ok(SyntheticKg { kg, test, all })
}
