use std::collections::BTreeMap;

use super::{KgeError, KgeModel, ModelKind, RowView};
use crate::kgstore::Triple;

/// Per-pair loss settings.
///
/// TransE uses the margin ranking loss `max(0, margin + s(neg) - s(pos))`.
/// DistMult and ComplEx use the logistic loss
/// `softplus(-s(pos)) + softplus(s(neg))` plus `l2_lambda · ‖row‖²` over
/// each distinct row the pair touches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub l2_lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 1.0,
            l2_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowGrad {
    pub re: Vec<f64>,
    /// Empty for real-valued models.
    pub im: Vec<f64>,
}

/// Loss value and gradient of every touched row, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairGradients {
    pub loss: f64,
    pub entities: BTreeMap<u32, RowGrad>,
    pub relations: BTreeMap<u32, RowGrad>,
}

impl PairGradients {
    pub fn is_zero(&self) -> bool {
        self.entities
            .values()
            .chain(self.relations.values())
            .all(|g| g.re.iter().chain(&g.im).all(|v| *v == 0.0))
    }
}

/// Closed-form gradient of the per-pair loss.
pub fn kge_gradients(
    model: &KgeModel,
    positive: &Triple,
    negative: &Triple,
    loss: &LossConfig,
) -> Result<PairGradients, KgeError> {
    for t in [positive, negative] {
        model.check_entity(t.head)?;
        model.check_relation(t.relation)?;
        model.check_entity(t.tail)?;
    }
    let mut out = PairGradients::default();
    out.loss = accumulate_pair(model, positive, negative, loss, &mut out);
    Ok(out)
}

/// Adds the pair's gradient into `out` and returns the pair's loss.
pub(crate) fn accumulate_pair(
    model: &KgeModel,
    positive: &Triple,
    negative: &Triple,
    cfg: &LossConfig,
    out: &mut PairGradients,
) -> f64 {
    let complex = model.kind().is_complex();
    let dim = model.dim();
    let pos = score_and_grad(model, positive);
    let neg = score_and_grad(model, negative);

    match model.kind() {
        ModelKind::TransE => {
            let violation = cfg.margin + neg.score - pos.score;
            // touched rows are always present, zero when the hinge is inactive
            let (cp, cn) = if violation > 0.0 {
                (-1.0, 1.0)
            } else {
                (0.0, 0.0)
            };
            add_triple(out, positive, &pos, cp, dim, complex);
            add_triple(out, negative, &neg, cn, dim, complex);
            violation.max(0.0)
        }
        ModelKind::DistMult | ModelKind::ComplEx => {
            let mut loss = softplus(-pos.score) + softplus(neg.score);
            add_triple(out, positive, &pos, -sigmoid(-pos.score), dim, complex);
            add_triple(out, negative, &neg, sigmoid(neg.score), dim, complex);
            if cfg.l2_lambda > 0.0 {
                let mut ents = vec![positive.head, positive.tail, negative.head, negative.tail];
                ents.sort_unstable();
                ents.dedup();
                let mut rels = vec![positive.relation, negative.relation];
                rels.sort_unstable();
                rels.dedup();
                for e in ents {
                    loss += l2_term(
                        out.entities.entry(e).or_default(),
                        model.entity(e),
                        cfg.l2_lambda,
                        dim,
                        complex,
                    );
                }
                for r in rels {
                    loss += l2_term(
                        out.relations.entry(r).or_default(),
                        model.relation(r),
                        cfg.l2_lambda,
                        dim,
                        complex,
                    );
                }
            }
            loss
        }
    }
}

struct ScoreGrad {
    score: f64,
    head: RowGrad,
    relation: RowGrad,
    tail: RowGrad,
}

fn f(x: &[f32], i: usize) -> f64 {
    x[i] as f64
}

/// Score of a triple and its partial derivatives w.r.t. the three rows.
fn score_and_grad(model: &KgeModel, t: &Triple) -> ScoreGrad {
    let dim = model.dim();
    let h = model.entity(t.head);
    let r = model.relation(t.relation);
    let tl = model.entity(t.tail);
    match model.kind() {
        ModelKind::TransE => {
            let diff: Vec<f64> = (0..dim)
                .map(|i| f(h.re, i) + f(r.re, i) - f(tl.re, i))
                .collect();
            let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            // subgradient 0 at the kink
            let unit: Vec<f64> = if norm > 0.0 {
                diff.iter().map(|d| d / norm).collect()
            } else {
                vec![0.0; dim]
            };
            ScoreGrad {
                score: -norm,
                head: real(unit.iter().map(|u| -u).collect()),
                relation: real(unit.iter().map(|u| -u).collect()),
                tail: real(unit),
            }
        }
        ModelKind::DistMult => {
            let score = (0..dim)
                .map(|i| f(h.re, i) * f(r.re, i) * f(tl.re, i))
                .sum();
            ScoreGrad {
                score,
                head: real((0..dim).map(|i| f(r.re, i) * f(tl.re, i)).collect()),
                relation: real((0..dim).map(|i| f(h.re, i) * f(tl.re, i)).collect()),
                tail: real((0..dim).map(|i| f(h.re, i) * f(r.re, i)).collect()),
            }
        }
        ModelKind::ComplEx => complex_score_grad(h, r, tl, dim),
    }
}

fn complex_score_grad(h: RowView<'_>, r: RowView<'_>, t: RowView<'_>, dim: usize) -> ScoreGrad {
    let mut score = 0.0;
    let mut g = [
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    ];
    for i in 0..dim {
        let (hr, hi) = (f(h.re, i), f(h.im, i));
        let (rr, ri) = (f(r.re, i), f(r.im, i));
        let (tr, ti) = (f(t.re, i), f(t.im, i));
        score += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
        g[0][i] = rr * tr + ri * ti;
        g[1][i] = rr * ti - ri * tr;
        g[2][i] = hr * tr + hi * ti;
        g[3][i] = hr * ti - hi * tr;
        g[4][i] = hr * rr - hi * ri;
        g[5][i] = hi * rr + hr * ri;
    }
    let [h_re, h_im, r_re, r_im, t_re, t_im] = g;
    ScoreGrad {
        score,
        head: RowGrad { re: h_re, im: h_im },
        relation: RowGrad { re: r_re, im: r_im },
        tail: RowGrad { re: t_re, im: t_im },
    }
}

fn real(re: Vec<f64>) -> RowGrad {
    RowGrad { re, im: Vec::new() }
}

fn add_triple(
    out: &mut PairGradients,
    t: &Triple,
    sg: &ScoreGrad,
    coef: f64,
    dim: usize,
    complex: bool,
) {
    add_row(
        out.entities.entry(t.head).or_default(),
        &sg.head,
        coef,
        dim,
        complex,
    );
    add_row(
        out.relations.entry(t.relation).or_default(),
        &sg.relation,
        coef,
        dim,
        complex,
    );
    add_row(
        out.entities.entry(t.tail).or_default(),
        &sg.tail,
        coef,
        dim,
        complex,
    );
}

fn ensure(g: &mut RowGrad, dim: usize, complex: bool) {
    if g.re.is_empty() {
        g.re = vec![0.0; dim];
        if complex {
            g.im = vec![0.0; dim];
        }
    }
}

fn add_row(target: &mut RowGrad, src: &RowGrad, coef: f64, dim: usize, complex: bool) {
    ensure(target, dim, complex);
    for (a, b) in target.re.iter_mut().zip(&src.re) {
        *a += coef * b;
    }
    for (a, b) in target.im.iter_mut().zip(&src.im) {
        *a += coef * b;
    }
}

fn l2_term(target: &mut RowGrad, row: RowView<'_>, lambda: f64, dim: usize, complex: bool) -> f64 {
    ensure(target, dim, complex);
    let mut sq = 0.0;
    for (a, v) in target.re.iter_mut().zip(row.re) {
        let v = *v as f64;
        sq += v * v;
        *a += 2.0 * lambda * v;
    }
    for (a, v) in target.im.iter_mut().zip(row.im) {
        let v = *v as f64;
        sq += v * v;
        *a += 2.0 * lambda * v;
    }
    lambda * sq
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_distmult_has_zero_gradient() {
        let m = KgeModel::zeros(ModelKind::DistMult, 3, 2, 4);
        let g = kge_gradients(
            &m,
            &Triple::new(0, 0, 1),
            &Triple::new(0, 1, 2),
            &LossConfig::default(),
        )
        .unwrap();
        assert!(g.is_zero());
        assert!((g.loss - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn transe_identical_pair_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = KgeModel::random(ModelKind::TransE, 3, 2, 4, &mut rng);
        let t = Triple::new(0, 1, 2);
        let g = kge_gradients(&m, &t, &t, &LossConfig::default()).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn transe_satisfied_margin_is_inactive() {
        let mut m = KgeModel::zeros(ModelKind::TransE, 3, 1, 1);
        m.entity_re_mut(1).copy_from_slice(&[1.0]);
        m.entity_re_mut(2).copy_from_slice(&[10.0]);
        m.relation_re_mut(0).copy_from_slice(&[1.0]);
        // s(pos) = 0, s(neg) = -9
        let g = kge_gradients(
            &m,
            &Triple::new(0, 0, 1),
            &Triple::new(0, 0, 2),
            &LossConfig::default(),
        )
        .unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn stable_logistic_helpers() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) <= 1.0);
    }

    #[test]
    fn rejects_bad_ids() {
        let m = KgeModel::zeros(ModelKind::ComplEx, 2, 1, 2);
        assert!(kge_gradients(
            &m,
            &Triple::new(0, 0, 1),
            &Triple::new(0, 3, 1),
            &LossConfig::default()
        )
        .is_err());
    }
}
