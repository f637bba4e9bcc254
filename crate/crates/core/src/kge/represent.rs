use super::{KgeModel, ModelKind};

/// Width of the relation vector produced for `model`.
pub fn representation_dim(model: &KgeModel) -> usize {
    match model.kind() {
        ModelKind::ComplEx => 2 * model.dim(),
        ModelKind::TransE | ModelKind::DistMult => model.dim(),
    }
}

/// Elementwise factors of the score for one triple, in `f64`.
///
/// DistMult: `h ⊙ r ⊙ t`, whose sum is the score. ComplEx: real parts of
/// `h ⊙ r ⊙ conj(t)` followed by the imaginary parts; the real half sums
/// to the score. TransE: the relation row itself.
pub fn relation_factors(model: &KgeModel, head: u32, relation: u32, tail: u32) -> Vec<f64> {
    let (h, r, t) = (
        model.entity(head),
        model.relation(relation),
        model.entity(tail),
    );
    let d = model.dim();
    match model.kind() {
        ModelKind::TransE => r.re.iter().map(|&v| v as f64).collect(),
        ModelKind::DistMult => (0..d)
            .map(|i| h.re[i] as f64 * r.re[i] as f64 * t.re[i] as f64)
            .collect(),
        ModelKind::ComplEx => {
            let mut out = vec![0.0; 2 * d];
            for i in 0..d {
                let (hr, hi) = (h.re[i] as f64, h.im[i] as f64);
                let (rr, ri) = (r.re[i] as f64, r.im[i] as f64);
                let (tr, ti) = (t.re[i] as f64, t.im[i] as f64);
                // (h * r) * conj(t)
                let (pr, pi) = (hr * rr - hi * ri, hr * ri + hi * rr);
                out[i] = pr * tr + pi * ti;
                out[d + i] = pi * tr - pr * ti;
            }
            out
        }
    }
}

/// Relation vector for the query `(e1, ?, e2)` using the top-scoring
/// relation. `None` when either entity is unknown to the model.
pub fn relation_representation(
    model: &KgeModel,
    e1: Option<u32>,
    e2: Option<u32>,
) -> Option<Vec<f32>> {
    relation_representation_with_threshold(model, e1, e2, None)
}

/// As [`relation_representation`], additionally returning `None` when the
/// best score falls below `min_score`.
pub fn relation_representation_with_threshold(
    model: &KgeModel,
    e1: Option<u32>,
    e2: Option<u32>,
    min_score: Option<f64>,
) -> Option<Vec<f32>> {
    let (h, t) = (e1?, e2?);
    if model.check_entity(h).is_err()
        || model.check_entity(t).is_err()
        || model.num_relations() == 0
    {
        return None;
    }
    let (best, best_score) = (0..model.num_relations() as u32)
        .map(|r| (r, model.score_unchecked(h, r, t)))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (r, s)| if s > acc.1 { (r, s) } else { acc },
        );
    if min_score.is_some_and(|tau| best_score < tau) {
        return None;
    }
    Some(
        relation_factors(model, h, best, t)
            .into_iter()
            .map(|v| v as f32)
            .collect(),
    )
}
