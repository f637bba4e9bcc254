//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use kgrel_core::kge::{KgeModel, ModelKind};
use kgrel_core::kgstore::{KnowledgeGraph, Triple};
use num_complex::Complex64;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Prints one result line and fails the test when `pass` is false.
pub fn report(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

/// f64 copy of every parameter, so finite differences do not go through f32.
#[derive(Debug, Clone)]
pub struct Params {
    pub kind: ModelKind,
    pub dim: usize,
    pub ent_re: Vec<Vec<f64>>,
    pub ent_im: Vec<Vec<f64>>,
    pub rel_re: Vec<Vec<f64>>,
    pub rel_im: Vec<Vec<f64>>,
}

impl Params {
    pub fn from_model(m: &KgeModel) -> Self {
        let widen = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let ents = 0..m.num_entities() as u32;
        let rels = 0..m.num_relations() as u32;
        Params {
            kind: m.kind(),
            dim: m.dim(),
            ent_re: ents.clone().map(|e| widen(m.entity(e).re)).collect(),
            ent_im: ents.map(|e| widen(m.entity(e).im)).collect(),
            rel_re: rels.clone().map(|r| widen(m.relation(r).re)).collect(),
            rel_im: rels.map(|r| widen(m.relation(r).im)).collect(),
        }
    }

    pub fn score(&self, t: &Triple) -> f64 {
        let (h, r, tl) = (t.head as usize, t.relation as usize, t.tail as usize);
        match self.kind {
            ModelKind::TransE => -(0..self.dim)
                .map(|i| (self.ent_re[h][i] + self.rel_re[r][i] - self.ent_re[tl][i]).powi(2))
                .sum::<f64>()
                .sqrt(),
            ModelKind::DistMult => (0..self.dim)
                .map(|i| self.ent_re[h][i] * self.rel_re[r][i] * self.ent_re[tl][i])
                .sum(),
            ModelKind::ComplEx => (0..self.dim)
                .map(|i| {
                    let hc = Complex64::new(self.ent_re[h][i], self.ent_im[h][i]);
                    let rc = Complex64::new(self.rel_re[r][i], self.rel_im[r][i]);
                    let tc = Complex64::new(self.ent_re[tl][i], self.ent_im[tl][i]);
                    (hc * rc * tc.conj()).re
                })
                .sum(),
        }
    }

    fn sq_norm(re: &[f64], im: &[f64]) -> f64 {
        re.iter().chain(im).map(|v| v * v).sum()
    }

    /// Pair loss: margin hinge for TransE, logistic plus L2 over the
    /// distinct touched rows otherwise.
    pub fn pair_loss(&self, pos: &Triple, neg: &Triple, margin: f64, l2: f64) -> f64 {
        let softplus = |x: f64| (1.0 + x.exp()).ln();
        match self.kind {
            ModelKind::TransE => (margin + self.score(neg) - self.score(pos)).max(0.0),
            _ => {
                let mut loss = softplus(-self.score(pos)) + softplus(self.score(neg));
                let mut ents = vec![pos.head, pos.tail, neg.head, neg.tail];
                ents.sort();
                ents.dedup();
                let mut rels = vec![pos.relation, neg.relation];
                rels.sort();
                rels.dedup();
                for e in ents {
                    loss += l2 * Self::sq_norm(&self.ent_re[e as usize], &self.ent_im[e as usize]);
                }
                for r in rels {
                    loss += l2 * Self::sq_norm(&self.rel_re[r as usize], &self.rel_im[r as usize]);
                }
                loss
            }
        }
    }
}

/// Which parameter block a finite-difference coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Block {
    EntRe,
    EntIm,
    RelRe,
    RelIm,
}

pub fn param_mut(p: &mut Params, block: Block, row: usize, i: usize) -> &mut f64 {
    match block {
        Block::EntRe => &mut p.ent_re[row][i],
        Block::EntIm => &mut p.ent_im[row][i],
        Block::RelRe => &mut p.rel_re[row][i],
        Block::RelIm => &mut p.rel_im[row][i],
    }
}

/// Central differences w.r.t. every coordinate of every row the pair touches.
pub fn numeric_gradient(
    p: &Params,
    pos: &Triple,
    neg: &Triple,
    margin: f64,
    l2: f64,
    eps: f64,
) -> BTreeMap<(Block, usize, usize), f64> {
    let mut ents = vec![pos.head, pos.tail, neg.head, neg.tail];
    ents.sort();
    ents.dedup();
    let mut rels = vec![pos.relation, neg.relation];
    rels.sort();
    rels.dedup();
    let complex = p.kind == ModelKind::ComplEx;
    let mut blocks: Vec<(Block, usize)> = Vec::new();
    for &e in &ents {
        blocks.push((Block::EntRe, e as usize));
        if complex {
            blocks.push((Block::EntIm, e as usize));
        }
    }
    for &r in &rels {
        blocks.push((Block::RelRe, r as usize));
        if complex {
            blocks.push((Block::RelIm, r as usize));
        }
    }
    let mut out = BTreeMap::new();
    let mut work = p.clone();
    for (block, row) in blocks {
        for i in 0..p.dim {
            let orig = *param_mut(&mut work, block, row, i);
            *param_mut(&mut work, block, row, i) = orig + eps;
            let up = work.pair_loss(pos, neg, margin, l2);
            *param_mut(&mut work, block, row, i) = orig - eps;
            let down = work.pair_loss(pos, neg, margin, l2);
            *param_mut(&mut work, block, row, i) = orig;
            out.insert((block, row, i), (up - down) / (2.0 * eps));
        }
    }
    out
}

/// Rank of `gold` by sorting candidate scores, with ties averaged over the
/// tied positions.
pub fn oracle_rank(
    p: &Params,
    head: u32,
    tail: u32,
    gold: u32,
    kg: &KnowledgeGraph,
    filtered: bool,
) -> f64 {
    let num_rel = p.rel_re.len() as u32;
    let mut scored: Vec<(f64, u32)> = (0..num_rel)
        .filter(|&r| r == gold || !filtered || !kg.contains(&Triple::new(head, r, tail)))
        .map(|r| (p.score(&Triple::new(head, r, tail)), r))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let gold_score = p.score(&Triple::new(head, gold, tail));
    let positions: Vec<usize> = scored
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| *s == gold_score)
        .map(|(i, _)| i + 1)
        .collect();
    let first = *positions.first().unwrap();
    let last = *positions.last().unwrap();
    (first + last) as f64 / 2.0
}

/// Confusion matrix based scores: (accuracy, macro-F1, micro-F1, per-label F1).
pub fn oracle_scores(
    gold: &[String],
    predicted: &[String],
) -> (f64, f64, f64, BTreeMap<String, f64>) {
    let mut labels: Vec<&String> = gold.iter().chain(predicted).collect();
    labels.sort();
    labels.dedup();
    let idx: BTreeMap<&String, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let k = labels.len();
    let mut cm = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(predicted) {
        cm[idx[g]][idx[p]] += 1;
    }
    let n = gold.len();
    let diag: usize = (0..k).map(|i| cm[i][i]).sum();
    let mut per_label = BTreeMap::new();
    let (mut stp, mut sfp, mut sfn) = (0usize, 0usize, 0usize);
    for i in 0..k {
        let tp = cm[i][i];
        let row: usize = cm[i].iter().sum();
        let col: usize = (0..k).map(|j| cm[j][i]).sum();
        let (fp, fneg) = (col - tp, row - tp);
        stp += tp;
        sfp += fp;
        sfn += fneg;
        let denom = 2 * tp + fp + fneg;
        let f1 = if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        };
        per_label.insert(labels[i].clone(), f1);
    }
    let macro_f1 = per_label.values().sum::<f64>() / k as f64;
    let micro_denom = 2 * stp + sfp + sfn;
    let micro = if micro_denom == 0 {
        0.0
    } else {
        (2 * stp) as f64 / micro_denom as f64
    };
    (diag as f64 / n as f64, macro_f1, micro, per_label)
}
