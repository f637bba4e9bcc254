use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{KgeError, KgeModel};
use crate::kgstore::{KnowledgeGraph, Triple};

/// Cutoffs reported for Hits@N.
pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    Raw,
    /// Other relations known to hold between the pair are removed from the
    /// candidate list before ranking.
    Filtered,
}

impl FromStr for RankMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(RankMode::Raw),
            "filtered" => Ok(RankMode::Filtered),
            other => Err(format!("unknown rank mode `{other}`")),
        }
    }
}

/// Rank of `gold` among all relations for the query `(head, ?, tail)`.
///
/// Ties count as the mean of the optimistic and pessimistic rank, so a
/// model that scores every relation equally ranks gold at `(1 + |R|) / 2`.
pub fn rank_relations(
    model: &KgeModel,
    head: u32,
    tail: u32,
    gold: u32,
    kg: &KnowledgeGraph,
    mode: RankMode,
) -> Result<f64, KgeError> {
    model.check_entity(head)?;
    model.check_entity(tail)?;
    model.check_relation(gold)?;
    let gold_score = model.score_unchecked(head, gold, tail);
    let mut higher = 0usize;
    let mut tied = 0usize;
    for r in 0..model.num_relations() as u32 {
        if r == gold {
            continue;
        }
        if mode == RankMode::Filtered && kg.contains(&Triple::new(head, r, tail)) {
            continue;
        }
        let s = model.score_unchecked(head, r, tail);
        if s > gold_score {
            higher += 1;
        } else if s == gold_score {
            tied += 1;
        }
    }
    let optimistic = 1 + higher;
    let pessimistic = 1 + higher + tied;
    Ok((optimistic + pessimistic) as f64 / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpMetrics {
    pub mode: RankMode,
    pub mrr: f64,
    /// Cutoff → fraction of queries ranked at or above it.
    pub hits_at: BTreeMap<usize, f64>,
    pub queries: usize,
}

impl LpMetrics {
    pub fn hits(&self, n: usize) -> Option<f64> {
        self.hits_at.get(&n).copied()
    }
}

pub fn metrics_from_ranks(ranks: &[f64], mode: RankMode) -> Result<LpMetrics, KgeError> {
    if ranks.is_empty() {
        return Err(KgeError::EmptyTestSet);
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
    let hits_at = HITS_AT
        .iter()
        .map(|&k| {
            (
                k,
                ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n,
            )
        })
        .collect();
    Ok(LpMetrics {
        mode,
        mrr,
        hits_at,
        queries: ranks.len(),
    })
}

/// Relation-slot link prediction over `test` triples.
pub fn evaluate_link_prediction(
    model: &KgeModel,
    test: &[Triple],
    kg: &KnowledgeGraph,
    mode: RankMode,
) -> Result<LpMetrics, KgeError> {
    let ranks = test
        .iter()
        .map(|t| rank_relations(model, t.head, t.tail, t.relation, kg, mode))
        .collect::<Result<Vec<_>, _>>()?;
    metrics_from_ranks(&ranks, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kge::ModelKind;

    fn three_relation_model() -> KgeModel {
        // d = 1 DistMult with h = t = 1, so score(r) = r's single weight.
        let mut m = KgeModel::zeros(ModelKind::DistMult, 2, 3, 1);
        m.entity_re_mut(0).copy_from_slice(&[1.0]);
        m.entity_re_mut(1).copy_from_slice(&[1.0]);
        for (r, s) in [5.0, 3.0, 1.0].into_iter().enumerate() {
            m.relation_re_mut(r as u32).copy_from_slice(&[s]);
        }
        m
    }

    #[test]
    fn sorted_scores_rank() {
        let m = three_relation_model();
        let kg = KnowledgeGraph::from_triples(2, 3, [Triple::new(0, 1, 1)]).unwrap();
        assert_eq!(
            rank_relations(&m, 0, 1, 1, &kg, RankMode::Raw).unwrap(),
            2.0
        );
        assert_eq!(
            rank_relations(&m, 0, 1, 0, &kg, RankMode::Raw).unwrap(),
            1.0
        );
        assert_eq!(
            rank_relations(&m, 0, 1, 2, &kg, RankMode::Raw).unwrap(),
            3.0
        );
    }

    #[test]
    fn filtering_removes_known_relations() {
        let m = three_relation_model();
        let kg = KnowledgeGraph::from_triples(2, 3, [Triple::new(0, 0, 1), Triple::new(0, 1, 1)])
            .unwrap();
        assert_eq!(
            rank_relations(&m, 0, 1, 1, &kg, RankMode::Raw).unwrap(),
            2.0
        );
        assert_eq!(
            rank_relations(&m, 0, 1, 1, &kg, RankMode::Filtered).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_relation_ranks_first() {
        let m = KgeModel::zeros(ModelKind::ComplEx, 2, 1, 3);
        let kg = KnowledgeGraph::from_triples(2, 1, []).unwrap();
        assert_eq!(
            rank_relations(&m, 0, 1, 0, &kg, RankMode::Raw).unwrap(),
            1.0
        );
    }

    #[test]
    fn constant_model_tie_rank() {
        let m = KgeModel::zeros(ModelKind::DistMult, 2, 11, 4);
        let kg = KnowledgeGraph::from_triples(2, 11, []).unwrap();
        assert_eq!(
            rank_relations(&m, 0, 1, 4, &kg, RankMode::Raw).unwrap(),
            6.0
        );
    }

    #[test]
    fn hand_enumerated_metrics() {
        let m = metrics_from_ranks(&[1.0, 2.0, 4.0], RankMode::Raw).unwrap();
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-15);
        assert!((m.hits(1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.hits(3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.hits(10), Some(1.0));
        let perfect = metrics_from_ranks(&[1.0; 5], RankMode::Filtered).unwrap();
        assert_eq!((perfect.mrr, perfect.hits(1).unwrap()), (1.0, 1.0));
        assert!(matches!(
            metrics_from_ranks(&[], RankMode::Raw),
            Err(KgeError::EmptyTestSet)
        ));
    }

    #[test]
    fn metrics_serialize() {
        let m = metrics_from_ranks(&[1.0, 2.0], RankMode::Filtered).unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["mode"], "filtered");
        assert_eq!(json["hits_at"]["1"], 0.5);
    }
}
