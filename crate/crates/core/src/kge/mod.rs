//! TransE, DistMult and ComplEx embeddings trained on a [`KnowledgeGraph`].
//!
//! Scores follow one convention, higher means more plausible:
//!
//! * TransE: `-‖h + r - t‖₂`
//! * DistMult: `Σ hᵢ rᵢ tᵢ`, the bilinear form with diagonal `M_r = diag(r)`
//! * ComplEx: `Re(Σ hᵢ rᵢ conj(tᵢ))`
//!
//! Parameters are stored as `f32` (the checkpoint precision); scores and
//! gradients are computed in `f64`.
//!
//! [`KnowledgeGraph`]: crate::kgstore::KnowledgeGraph

mod checkpoint;
mod grad;
mod rank;
mod represent;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{read_header, KgeHeader, KGE_MAGIC};
pub use grad::{kge_gradients, LossConfig, PairGradients, RowGrad};
pub use rank::{
    evaluate_link_prediction, metrics_from_ranks, rank_relations, LpMetrics, RankMode, HITS_AT,
};
pub use represent::{
    relation_factors, relation_representation, relation_representation_with_threshold,
    representation_dim,
};
pub use train::{train_kge, KgeTrainConfig, OptimizerKind, TrainedKge};

#[derive(Debug, Error)]
pub enum KgeError {
    #[error("{what} id {id} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        id: u32,
        size: usize,
    },
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },
    #[error("cannot train on an empty knowledge graph")]
    EmptyGraph,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: bad magic {found:?} at byte 0")]
    BadMagic { found: [u8; 4] },
    #[error("checkpoint: unknown model kind byte {0}")]
    UnknownKind(u8),
    #[error("checkpoint: truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("checkpoint: non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("checkpoint: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Sampling(#[from] crate::kgstore::KgError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx];

    pub fn is_complex(self) -> bool {
        self == ModelKind::ComplEx
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::DistMult => 1,
            ModelKind::ComplEx => 2,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(ModelKind::TransE),
            1 => Some(ModelKind::DistMult),
            2 => Some(ModelKind::ComplEx),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            other => Err(format!("unknown KGE model `{other}`")),
        }
    }
}

/// Entity and relation embedding tables.
///
/// Row `r` of the relation table is the diagonal of `M_r`. Imaginary
/// tables are empty unless the model is ComplEx.
#[derive(Debug, Clone, PartialEq)]
pub struct KgeModel {
    kind: ModelKind,
    dim: usize,
    num_entities: usize,
    num_relations: usize,
    pub(crate) entity_re: Vec<f32>,
    pub(crate) entity_im: Vec<f32>,
    pub(crate) relation_re: Vec<f32>,
    pub(crate) relation_im: Vec<f32>,
}

/// Borrowed view of one embedding row; `im` is empty for real models.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub re: &'a [f32],
    pub im: &'a [f32],
}

impl KgeModel {
    pub fn zeros(kind: ModelKind, num_entities: usize, num_relations: usize, dim: usize) -> Self {
        let im = |n: usize| {
            if kind.is_complex() {
                vec![0.0; n * dim]
            } else {
                Vec::new()
            }
        };
        KgeModel {
            kind,
            dim,
            num_entities,
            num_relations,
            entity_re: vec![0.0; num_entities * dim],
            entity_im: im(num_entities),
            relation_re: vec![0.0; num_relations * dim],
            relation_im: im(num_relations),
        }
    }

    /// Uniform initialization on `(-6/√d, 6/√d)`. TransE entity rows are
    /// then projected onto the unit sphere.
    pub fn random<R: Rng + ?Sized>(
        kind: ModelKind,
        num_entities: usize,
        num_relations: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut model = KgeModel::zeros(kind, num_entities, num_relations, dim);
        let bound = 6.0 / (dim as f32).sqrt();
        for table in [
            &mut model.entity_re,
            &mut model.entity_im,
            &mut model.relation_re,
            &mut model.relation_im,
        ] {
            for v in table.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        if kind == ModelKind::TransE {
            for e in 0..num_entities {
                model.normalize_entity(e as u32);
            }
        }
        model
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn entity(&self, id: u32) -> RowView<'_> {
        row(&self.entity_re, &self.entity_im, id, self.dim)
    }

    pub fn relation(&self, id: u32) -> RowView<'_> {
        row(&self.relation_re, &self.relation_im, id, self.dim)
    }

    pub fn entity_re_mut(&mut self, id: u32) -> &mut [f32] {
        row_mut(&mut self.entity_re, id, self.dim)
    }

    pub fn entity_im_mut(&mut self, id: u32) -> &mut [f32] {
        row_mut(&mut self.entity_im, id, self.dim)
    }

    pub fn relation_re_mut(&mut self, id: u32) -> &mut [f32] {
        row_mut(&mut self.relation_re, id, self.dim)
    }

    pub fn relation_im_mut(&mut self, id: u32) -> &mut [f32] {
        row_mut(&mut self.relation_im, id, self.dim)
    }

    pub fn check_entity(&self, id: u32) -> Result<(), KgeError> {
        if (id as usize) < self.num_entities {
            Ok(())
        } else {
            Err(KgeError::IndexOutOfRange {
                what: "entity",
                id,
                size: self.num_entities,
            })
        }
    }

    pub fn check_relation(&self, id: u32) -> Result<(), KgeError> {
        if (id as usize) < self.num_relations {
            Ok(())
        } else {
            Err(KgeError::IndexOutOfRange {
                what: "relation",
                id,
                size: self.num_relations,
            })
        }
    }

    pub fn score(&self, head: u32, relation: u32, tail: u32) -> Result<f64, KgeError> {
        self.check_entity(head)?;
        self.check_relation(relation)?;
        self.check_entity(tail)?;
        Ok(self.score_unchecked(head, relation, tail))
    }

    pub(crate) fn score_unchecked(&self, head: u32, relation: u32, tail: u32) -> f64 {
        let h = self.entity(head);
        let r = self.relation(relation);
        let t = self.entity(tail);
        match self.kind {
            ModelKind::TransE => {
                let sq: f64 = (0..self.dim)
                    .map(|i| {
                        let d = h.re[i] as f64 + r.re[i] as f64 - t.re[i] as f64;
                        d * d
                    })
                    .sum();
                -sq.sqrt()
            }
            ModelKind::DistMult => (0..self.dim)
                .map(|i| h.re[i] as f64 * r.re[i] as f64 * t.re[i] as f64)
                .sum(),
            ModelKind::ComplEx => (0..self.dim)
                .map(|i| {
                    let (hr, hi) = (h.re[i] as f64, h.im[i] as f64);
                    let (rr, ri) = (r.re[i] as f64, r.im[i] as f64);
                    let (tr, ti) = (t.re[i] as f64, t.im[i] as f64);
                    hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr
                })
                .sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.entity_re,
            &self.entity_im,
            &self.relation_re,
            &self.relation_im,
        ]
        .iter()
        .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn normalize_entity(&mut self, id: u32) {
        let row = self.entity_re_mut(id);
        let norm = row.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), KgeError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| KgeError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, KgeError> {
        let bytes = std::fs::read(path).map_err(|source| KgeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        KgeModel::from_bytes(&bytes)
    }
}

fn row<'a>(re: &'a [f32], im: &'a [f32], id: u32, dim: usize) -> RowView<'a> {
    let span = id as usize * dim..(id as usize + 1) * dim;
    RowView {
        re: &re[span.clone()],
        im: if im.is_empty() { &[] } else { &im[span] },
    }
}

fn row_mut(table: &mut [f32], id: u32, dim: usize) -> &mut [f32] {
    &mut table[id as usize * dim..(id as usize + 1) * dim]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(model: &mut KgeModel, ent: &[(&[f32], &[f32])], rel: &[(&[f32], &[f32])]) {
        for (i, (re, im)) in ent.iter().enumerate() {
            model.entity_re_mut(i as u32).copy_from_slice(re);
            if model.kind().is_complex() {
                model.entity_im_mut(i as u32).copy_from_slice(im);
            }
        }
        for (i, (re, im)) in rel.iter().enumerate() {
            model.relation_re_mut(i as u32).copy_from_slice(re);
            if model.kind().is_complex() {
                model.relation_im_mut(i as u32).copy_from_slice(im);
            }
        }
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let mut m = KgeModel::zeros(ModelKind::TransE, 2, 1, 2);
        set(
            &mut m,
            &[(&[0.0, 0.0], &[]), (&[1.0, 1.0], &[])],
            &[(&[1.0, 1.0], &[])],
        );
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.0);
        assert!(m.score(1, 0, 0).unwrap() < 0.0);
    }

    #[test]
    fn distmult_hand_example() {
        let mut m = KgeModel::zeros(ModelKind::DistMult, 2, 1, 2);
        set(
            &mut m,
            &[(&[1.0, 0.0], &[]), (&[0.0, 1.0], &[])],
            &[(&[2.0, 3.0], &[])],
        );
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn complex_hand_example() {
        // h = 1, r = i, t = i: Re(1 * i * conj(i)) = Re(i * -i) = 1
        let mut m = KgeModel::zeros(ModelKind::ComplEx, 2, 1, 1);
        set(
            &mut m,
            &[(&[1.0], &[0.0]), (&[0.0], &[1.0])],
            &[(&[0.0], &[1.0])],
        );
        assert_eq!(m.score(0, 0, 1).unwrap(), 1.0);
        // conj(t) makes the score direction-sensitive
        assert_eq!(m.score(1, 0, 0).unwrap(), -1.0);
    }

    #[test]
    fn out_of_range_ids() {
        let m = KgeModel::zeros(ModelKind::DistMult, 2, 1, 2);
        assert!(matches!(
            m.score(2, 0, 0),
            Err(KgeError::IndexOutOfRange {
                what: "entity",
                id: 2,
                size: 2
            })
        ));
        assert!(matches!(
            m.score(0, 1, 0),
            Err(KgeError::IndexOutOfRange {
                what: "relation",
                ..
            })
        ));
    }

    #[test]
    fn transe_init_is_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = KgeModel::random(ModelKind::TransE, 10, 3, 16, &mut rng);
        for e in 0..10 {
            let n: f64 = m.entity(e).re.iter().map(|v| (*v as f64).powi(2)).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn kind_parsing() {
        for k in ModelKind::ALL {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
            assert_eq!(ModelKind::from_byte(k.to_byte()), Some(k));
        }
        assert!("rotate".parse::<ModelKind>().is_err());
    }

    fn random_model(kind: ModelKind, seed: u64) -> KgeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KgeModel::random(kind, 6, 3, 5, &mut rng)
    }

    proptest! {
        #[test]
        fn distmult_is_symmetric(seed in any::<u64>(), h in 0u32..6, r in 0u32..3, t in 0u32..6) {
            let m = random_model(ModelKind::DistMult, seed);
            prop_assert_eq!(m.score(h, r, t).unwrap(), m.score(t, r, h).unwrap());
        }

        #[test]
        fn complex_reduces_to_distmult(seed in any::<u64>(), h in 0u32..6, r in 0u32..3, t in 0u32..6) {
            let mut c = random_model(ModelKind::ComplEx, seed);
            for rel in 0..3 {
                c.relation_im_mut(rel).fill(0.0);
            }
            let (hv, rv, tv) = (c.entity(h), c.relation(r), c.entity(t));
            let real_part: f64 = (0..5).map(|i| hv.re[i] as f64 * rv.re[i] as f64 * tv.re[i] as f64).sum();
            let cross: f64 = (0..5).map(|i| hv.im[i] as f64 * rv.re[i] as f64 * tv.im[i] as f64).sum();
            let s = c.score(h, r, t).unwrap();
            prop_assert!((s - (real_part + cross)).abs() <= 1e-12 * (1.0 + s.abs()));

            // with entity imaginary parts zeroed as well, it is DistMult exactly
            let mut d = KgeModel::zeros(ModelKind::DistMult, 6, 3, 5);
            d.entity_re.copy_from_slice(&c.entity_re);
            d.relation_re.copy_from_slice(&c.relation_re);
            c.entity_im.fill(0.0);
            prop_assert_eq!(c.score(h, r, t).unwrap(), d.score(h, r, t).unwrap());
        }
    }
}
