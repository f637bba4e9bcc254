use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grad::{accumulate_pair, LossConfig, PairGradients};
use super::{KgeError, KgeModel, ModelKind};
use crate::kgstore::{sample_negative, KnowledgeGraph, NegativeStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adagrad => "adagrad",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgeTrainConfig {
    pub kind: ModelKind,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub margin: f64,
    pub l2_lambda: f64,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub strategy: NegativeStrategy,
    pub seed: u64,
}

impl Default for KgeTrainConfig {
    fn default() -> Self {
        KgeTrainConfig {
            kind: ModelKind::ComplEx,
            dim: 200,
            epochs: 100,
            learning_rate: 0.1,
            optimizer: OptimizerKind::Adagrad,
            margin: 1.0,
            l2_lambda: 1e-3,
            negatives_per_positive: 10,
            batch_size: 512,
            strategy: NegativeStrategy::default(),
            seed: 0,
        }
    }
}

impl KgeTrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            margin: self.margin,
            l2_lambda: self.l2_lambda,
        }
    }

    fn validate(&self) -> Result<(), KgeError> {
        let bad = |msg: &str| Err(KgeError::Config(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.negatives_per_positive == 0 {
            return bad("epochs, batch_size and negatives_per_positive must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.kind == ModelKind::TransE && !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedKge {
    pub model: KgeModel,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Negatives dropped because no corruption outside the graph was found.
    pub flagged_negatives: usize,
}

/// Mini-batch training with sampled negatives. Deterministic given
/// `cfg.seed`.
pub fn train_kge(kg: &KnowledgeGraph, cfg: &KgeTrainConfig) -> Result<TrainedKge, KgeError> {
    cfg.validate()?;
    if kg.is_empty() {
        return Err(KgeError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = KgeModel::random(
        cfg.kind,
        kg.num_entities(),
        kg.num_relations(),
        cfg.dim,
        &mut rng,
    );
    let mut optimizer = Optimizer::new(cfg, &model);
    let loss_cfg = cfg.loss();

    let mut order = kg.triples().to_vec();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut flagged = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut pairs = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = PairGradients::default();
            let mut n = 0usize;
            for pos in batch {
                for _ in 0..cfg.negatives_per_positive {
                    let sample = sample_negative(pos, kg, &mut rng, &cfg.strategy)?;
                    if sample.flagged {
                        flagged += 1;
                        continue;
                    }
                    total += accumulate_pair(&model, pos, &sample.triple, &loss_cfg, &mut grads);
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            optimizer.step(&mut model, &grads, 1.0 / n as f64);
            if cfg.kind == ModelKind::TransE {
                for &e in grads.entities.keys() {
                    model.normalize_entity(e);
                }
            }
            pairs += n;
        }
        let mean = if pairs > 0 { total / pairs as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(KgeError::Divergence {
                epoch,
                detail: format!("mean loss is {mean}"),
            });
        }
        if !model.is_finite() {
            return Err(KgeError::Divergence {
                epoch,
                detail: "non-finite parameter".into(),
            });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainedKge {
        model,
        epoch_losses,
        flagged_negatives: flagged,
    })
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    entity_re: Vec<f64>,
    entity_im: Vec<f64>,
    relation_re: Vec<f64>,
    relation_im: Vec<f64>,
}

const ADAGRAD_EPS: f64 = 1e-10;

impl Optimizer {
    fn new(cfg: &KgeTrainConfig, model: &KgeModel) -> Self {
        let state = |n: usize| match cfg.optimizer {
            OptimizerKind::Adagrad => vec![0.0; n],
            OptimizerKind::Sgd => Vec::new(),
        };
        Optimizer {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            entity_re: state(model.entity_re.len()),
            entity_im: state(model.entity_im.len()),
            relation_re: state(model.relation_re.len()),
            relation_im: state(model.relation_im.len()),
        }
    }

    fn step(&mut self, model: &mut KgeModel, grads: &PairGradients, scale: f64) {
        let dim = model.dim();
        for (&id, g) in &grads.entities {
            let off = id as usize * dim;
            update(
                self.kind,
                self.lr,
                &mut model.entity_re[off..off + dim],
                &mut self.entity_re,
                off,
                &g.re,
                scale,
            );
            if !g.im.is_empty() {
                update(
                    self.kind,
                    self.lr,
                    &mut model.entity_im[off..off + dim],
                    &mut self.entity_im,
                    off,
                    &g.im,
                    scale,
                );
            }
        }
        for (&id, g) in &grads.relations {
            let off = id as usize * dim;
            update(
                self.kind,
                self.lr,
                &mut model.relation_re[off..off + dim],
                &mut self.relation_re,
                off,
                &g.re,
                scale,
            );
            if !g.im.is_empty() {
                update(
                    self.kind,
                    self.lr,
                    &mut model.relation_im[off..off + dim],
                    &mut self.relation_im,
                    off,
                    &g.im,
                    scale,
                );
            }
        }
    }
}

fn update(
    kind: OptimizerKind,
    lr: f64,
    params: &mut [f32],
    acc: &mut [f64],
    off: usize,
    grad: &[f64],
    scale: f64,
) {
    match kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p = (*p as f64 - lr * g * scale) as f32;
            }
        }
        OptimizerKind::Adagrad => {
            for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                let g = g * scale;
                let a = &mut acc[off + i];
                *a += g * g;
                *p = (*p as f64 - lr * g / (a.sqrt() + ADAGRAD_EPS)) as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgstore::Triple;

    fn one_triple_kg() -> KnowledgeGraph {
        KnowledgeGraph::from_triples(2, 1, [Triple::new(0, 0, 1)]).unwrap()
    }

    #[test]
    fn rejects_empty_graph_and_bad_config() {
        let empty = KnowledgeGraph::from_triples(2, 1, []).unwrap();
        assert!(matches!(
            train_kge(&empty, &KgeTrainConfig::default()),
            Err(KgeError::EmptyGraph)
        ));
        let cfg = KgeTrainConfig {
            learning_rate: -1.0,
            ..KgeTrainConfig::default()
        };
        assert!(matches!(
            train_kge(&one_triple_kg(), &cfg),
            Err(KgeError::Config(_))
        ));
    }

    #[test]
    fn single_triple_transe_learns() {
        let kg = one_triple_kg();
        let cfg = KgeTrainConfig {
            kind: ModelKind::TransE,
            dim: 8,
            epochs: 50,
            batch_size: 1,
            ..KgeTrainConfig::default()
        };
        let trained = train_kge(&kg, &cfg).unwrap();
        let losses = &trained.epoch_losses;
        assert_eq!(losses.len(), 50);
        let first: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let last: f64 = losses[40..].iter().sum::<f64>() / 10.0;
        assert!(last < first, "loss did not decrease: {first} -> {last}");

        let m = &trained.model;
        let pos = m.score(0, 0, 1).unwrap();
        for (h, t) in [(0, 0), (1, 0), (1, 1)] {
            assert!(pos > m.score(h, 0, t).unwrap());
        }
        for e in 0..2 {
            let n: f64 = m.entity(e).re.iter().map(|v| (*v as f64).powi(2)).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let kg = KnowledgeGraph::from_triples(
            6,
            2,
            [
                Triple::new(0, 0, 1),
                Triple::new(2, 1, 3),
                Triple::new(4, 0, 5),
                Triple::new(1, 1, 2),
            ],
        )
        .unwrap();
        for kind in ModelKind::ALL {
            let cfg = KgeTrainConfig {
                kind,
                dim: 6,
                epochs: 5,
                batch_size: 2,
                seed: 9,
                ..KgeTrainConfig::default()
            };
            let a = train_kge(&kg, &cfg).unwrap();
            let b = train_kge(&kg, &cfg).unwrap();
            assert_eq!(a.model.to_bytes(), b.model.to_bytes());
            assert_eq!(a.epoch_losses, b.epoch_losses);
        }
    }

    #[test]
    fn divergence_names_epoch() {
        let kg = KnowledgeGraph::from_triples(3, 2, [Triple::new(0, 0, 1), Triple::new(1, 1, 2)])
            .unwrap();
        let cfg = KgeTrainConfig {
            kind: ModelKind::DistMult,
            dim: 4,
            epochs: 50,
            learning_rate: 1e30,
            optimizer: OptimizerKind::Sgd,
            batch_size: 1,
            ..KgeTrainConfig::default()
        };
        match train_kge(&kg, &cfg) {
            Err(KgeError::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
