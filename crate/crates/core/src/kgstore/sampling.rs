use std::str::FromStr;

use rand::Rng;

use super::{KgError, KnowledgeGraph, Triple};

/// Resampling budget for finding a corruption outside the graph.
pub const MAX_RESAMPLE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Head,
    Relation,
    Tail,
}

/// Per-slot corruption probabilities (normalized at draw time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotWeights {
    pub relation: f64,
    pub head: f64,
    pub tail: f64,
}

impl Default for SlotWeights {
    fn default() -> Self {
        SlotWeights {
            relation: 0.5,
            head: 0.25,
            tail: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegativeStrategy {
    CorruptRelation,
    /// Head or tail with equal probability.
    CorruptEntity,
    Mixed(SlotWeights),
}

impl Default for NegativeStrategy {
    fn default() -> Self {
        NegativeStrategy::Mixed(SlotWeights::default())
    }
}

impl NegativeStrategy {
    pub fn weights(&self) -> SlotWeights {
        match *self {
            NegativeStrategy::CorruptRelation => SlotWeights {
                relation: 1.0,
                head: 0.0,
                tail: 0.0,
            },
            NegativeStrategy::CorruptEntity => SlotWeights {
                relation: 0.0,
                head: 0.5,
                tail: 0.5,
            },
            NegativeStrategy::Mixed(w) => w,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NegativeStrategy::CorruptRelation => "corrupt_relation",
            NegativeStrategy::CorruptEntity => "corrupt_entity",
            NegativeStrategy::Mixed(_) => "mixed",
        }
    }
}

impl FromStr for NegativeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrupt_relation" => Ok(NegativeStrategy::CorruptRelation),
            "corrupt_entity" => Ok(NegativeStrategy::CorruptEntity),
            "mixed" => Ok(NegativeStrategy::default()),
            other => Err(format!("unknown negative sampling strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeSample {
    pub triple: Triple,
    pub slot: Slot,
    /// Set when every retry produced a true triple; `triple` is then the
    /// last candidate and belongs to the graph.
    pub flagged: bool,
}

/// Draws a corruption of `triple` that differs in exactly one slot.
///
/// The slot is chosen once from the strategy's weights, restricted to
/// slots with at least two candidate values; only the replacement value is
/// redrawn on collision with a true triple.
pub fn sample_negative<R: Rng + ?Sized>(
    triple: &Triple,
    kg: &KnowledgeGraph,
    rng: &mut R,
    strategy: &NegativeStrategy,
) -> Result<NegativeSample, KgError> {
    let w = strategy.weights();
    let entity_ok = kg.num_entities() >= 2;
    let relation_ok = kg.num_relations() >= 2;
    let candidates = [
        (Slot::Relation, if relation_ok { w.relation } else { 0.0 }),
        (Slot::Head, if entity_ok { w.head } else { 0.0 }),
        (Slot::Tail, if entity_ok { w.tail } else { 0.0 }),
    ];
    let total: f64 = candidates.iter().map(|(_, p)| p.max(0.0)).sum();
    if total <= 0.0 {
        return Err(KgError::NoCorruptibleSlot {
            entities: kg.num_entities(),
            relations: kg.num_relations(),
        });
    }

    let mut u = rng.gen::<f64>() * total;
    let mut slot = Slot::Relation;
    for (s, p) in candidates {
        let p = p.max(0.0);
        if p > 0.0 {
            slot = s;
            if u < p {
                break;
            }
            u -= p;
        }
    }

    let mut candidate = *triple;
    for _ in 0..MAX_RESAMPLE {
        candidate = *triple;
        match slot {
            Slot::Head => candidate.head = draw_other(rng, triple.head, kg.num_entities()),
            Slot::Relation => {
                candidate.relation = draw_other(rng, triple.relation, kg.num_relations())
            }
            Slot::Tail => candidate.tail = draw_other(rng, triple.tail, kg.num_entities()),
        }
        if !kg.contains(&candidate) {
            return Ok(NegativeSample {
                triple: candidate,
                slot,
                flagged: false,
            });
        }
    }
    Ok(NegativeSample {
        triple: candidate,
        slot,
        flagged: true,
    })
}

/// Uniform over `0..n` excluding `current`.
fn draw_other<R: Rng + ?Sized>(rng: &mut R, current: u32, n: usize) -> u32 {
    let v = rng.gen_range(0..(n as u32 - 1));
    if v >= current {
        v + 1
    } else {
        v
    }
}
