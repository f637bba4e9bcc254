//! `FUSE` checkpoint layout (little-endian):
//!
//! ```text
//! "FUSE" | d_c u32 | d_r u32 | |L| u32 | mode u8 | dropout f32
//! |L| × ( len u16 | label bytes )
//! W* (d_c×d_r f32) | b* (d_c) | head (|L|×w f32) | head bias (|L|)
//! ```
//!
//! `w` is the head input width: `d_c` for `add`, `2·d_c` for `concat`.

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::binio::{put_f32s, put_str16, put_u32, Reader};
use crate::kgstore::Vocab;

pub const FUSE_MAGIC: &[u8; 4] = b"FUSE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// ν = H_c + dropout(W*·H_r + b)
    #[default]
    Add,
    /// ν = [H_c ; dropout(W*·H_r + b)], zeros in the second half when H_r is absent.
    Concat,
}

impl FusionMode {
    fn to_byte(self) -> u8 {
        match self {
            FusionMode::Add => 0,
            FusionMode::Concat => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(FusionMode::Add),
            1 => Some(FusionMode::Concat),
            _ => None,
        }
    }
}

impl FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(FusionMode::Add),
            "concat" => Ok(FusionMode::Concat),
            other => Err(format!("unknown fusion mode `{other}`")),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Add => "add",
            FusionMode::Concat => "concat",
        })
    }
}

/// Projection W* of the relation vector into context space, followed by a
/// softmax head over the label vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionClassifier {
    pub(crate) mode: FusionMode,
    pub(crate) context_dim: usize,
    pub(crate) relation_dim: usize,
    pub(crate) dropout: f32,
    pub(crate) labels: Vocab,
    /// Row-major `d_c × d_r`.
    pub(crate) w_star: Vec<f32>,
    pub(crate) b_star: Vec<f32>,
    /// Row-major `|L| × width`.
    pub(crate) head_w: Vec<f32>,
    pub(crate) head_b: Vec<f32>,
}

/// Forward activations kept for the backward pass.
pub(crate) struct Forward {
    pub nu: Vec<f64>,
    /// Per-component dropout scale (0 or 1/(1−p)) applied to the projection.
    pub mask: Option<Vec<f64>>,
}

impl FusionClassifier {
    /// All parameters zero: the head predicts the uniform distribution.
    pub fn zeros(
        mode: FusionMode,
        context_dim: usize,
        relation_dim: usize,
        labels: Vocab,
        dropout: f32,
    ) -> Self {
        let width = match mode {
            FusionMode::Add => context_dim,
            FusionMode::Concat => 2 * context_dim,
        };
        FusionClassifier {
            mode,
            context_dim,
            relation_dim,
            dropout,
            w_star: vec![0.0; context_dim * relation_dim],
            b_star: vec![0.0; context_dim],
            head_w: vec![0.0; labels.len() * width],
            head_b: vec![0.0; labels.len()],
            labels,
        }
    }

    /// Draws W* from uniform(±1/√d_r) with `proj_rng` and the head from
    /// uniform(±1/√width) with `head_rng`; biases start at zero.
    pub fn random<R: Rng + ?Sized>(
        mode: FusionMode,
        context_dim: usize,
        relation_dim: usize,
        labels: Vocab,
        dropout: f32,
        proj_rng: &mut R,
        head_rng: &mut R,
    ) -> Self {
        let mut clf = Self::zeros(mode, context_dim, relation_dim, labels, dropout);
        if relation_dim > 0 {
            let a = 1.0 / (relation_dim as f32).sqrt();
            clf.w_star
                .iter_mut()
                .for_each(|w| *w = proj_rng.gen_range(-a..a));
        }
        let a = 1.0 / (clf.width() as f32).sqrt();
        clf.head_w
            .iter_mut()
            .for_each(|w| *w = head_rng.gen_range(-a..a));
        clf
    }

    pub fn mode(&self) -> FusionMode {
        self.mode
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn relation_dim(&self) -> usize {
        self.relation_dim
    }

    pub fn dropout(&self) -> f32 {
        self.dropout
    }

    pub fn labels(&self) -> &Vocab {
        &self.labels
    }

    /// Input width of the softmax head.
    pub fn width(&self) -> usize {
        match self.mode {
            FusionMode::Add => self.context_dim,
            FusionMode::Concat => 2 * self.context_dim,
        }
    }

    pub fn w_star_mut(&mut self) -> &mut [f32] {
        &mut self.w_star
    }

    pub fn b_star_mut(&mut self) -> &mut [f32] {
        &mut self.b_star
    }

    pub fn head_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.head_w, &mut self.head_b)
    }

    fn check_dims(&self, h_c: &[f64], h_r: Option<&[f64]>) -> Result<(), FusionError> {
        if h_c.len() != self.context_dim {
            return Err(FusionError::Shape {
                what: "H_c",
                expected: self.context_dim,
                found: h_c.len(),
            });
        }
        if let Some(h_r) = h_r {
            if h_r.len() != self.relation_dim {
                return Err(FusionError::Shape {
                    what: "H_r",
                    expected: self.relation_dim,
                    found: h_r.len(),
                });
            }
        }
        Ok(())
    }

    /// Fused document vector ν. Passing an rng selects training mode, in
    /// which dropout is applied to the projected relation term.
    pub fn fuse<R: Rng + ?Sized>(
        &self,
        h_c: &[f64],
        h_r: Option<&[f64]>,
        training: Option<&mut R>,
    ) -> Result<Vec<f64>, FusionError> {
        self.check_dims(h_c, h_r)?;
        Ok(self.forward(h_c, h_r, training).nu)
    }

    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        h_c: &[f64],
        h_r: Option<&[f64]>,
        training: Option<&mut R>,
    ) -> Forward {
        let d_c = self.context_dim;
        let mut nu = h_c.to_vec();
        if self.mode == FusionMode::Concat {
            nu.resize(2 * d_c, 0.0);
        }
        let Some(h_r) = h_r else {
            return Forward { nu, mask: None };
        };
        let mask = training.filter(|_| self.dropout > 0.0).map(|rng| {
            let p = self.dropout as f64;
            let keep = 1.0 / (1.0 - p);
            (0..d_c)
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                .collect::<Vec<_>>()
        });
        let offset = if self.mode == FusionMode::Concat {
            d_c
        } else {
            0
        };
        for i in 0..d_c {
            let row = &self.w_star[i * self.relation_dim..(i + 1) * self.relation_dim];
            let mut z = self.b_star[i] as f64;
            for (&w, &x) in row.iter().zip(h_r) {
                z += w as f64 * x;
            }
            if let Some(m) = &mask {
                z *= m[i];
            }
            nu[offset + i] += z;
        }
        Forward { nu, mask }
    }

    pub fn logits(&self, nu: &[f64]) -> Vec<f64> {
        let w = self.width();
        (0..self.labels.len())
            .map(|l| {
                let row = &self.head_w[l * w..(l + 1) * w];
                row.iter()
                    .zip(nu)
                    .fold(self.head_b[l] as f64, |acc, (&a, &x)| acc + a as f64 * x)
            })
            .collect()
    }

    /// Softmax distribution over labels in eval mode.
    pub fn probabilities(&self, h_c: &[f64], h_r: Option<&[f64]>) -> Result<Vec<f64>, FusionError> {
        let nu = self.fuse::<rand_chacha::ChaCha8Rng>(h_c, h_r, None)?;
        Ok(softmax(&self.logits(&nu)))
    }

    pub fn is_finite(&self) -> bool {
        [&self.w_star, &self.b_star, &self.head_w, &self.head_b]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FusionError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(FUSE_MAGIC);
        put_u32(&mut buf, self.context_dim as u32);
        put_u32(&mut buf, self.relation_dim as u32);
        put_u32(&mut buf, self.labels.len() as u32);
        buf.push(self.mode.to_byte());
        put_f32s(&mut buf, &[self.dropout]);
        for label in self.labels.names() {
            put_str16(&mut buf, label)
                .map_err(|len| FusionError::Config(format!("label of {len} bytes is too long")))?;
        }
        for block in [&self.w_star, &self.b_star, &self.head_w, &self.head_b] {
            put_f32s(&mut buf, block);
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FusionError> {
        let mut r = Reader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if &magic != FUSE_MAGIC {
            return Err(FusionError::BadMagic { found: magic });
        }
        let context_dim = r.u32()? as usize;
        let relation_dim = r.u32()? as usize;
        let n_labels = r.u32()? as usize;
        let mode_offset = r.offset();
        let mode = FusionMode::from_byte(r.u8()?).ok_or_else(|| {
            FusionError::Inconsistent(format!("unknown fusion mode byte at {mode_offset}"))
        })?;
        let dropout_offset = r.offset();
        let dropout = r.f32()?;
        if !dropout.is_finite() {
            return Err(FusionError::NonFinite {
                offset: dropout_offset,
            });
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(FusionError::Inconsistent(format!(
                "dropout {dropout} outside [0, 1)"
            )));
        }
        let mut labels = Vocab::new();
        for _ in 0..n_labels {
            let offset = r.offset();
            let len = r.u16()? as usize;
            let label = std::str::from_utf8(r.take(len)?).map_err(|_| {
                FusionError::Inconsistent(format!("invalid UTF-8 label at byte {offset}"))
            })?;
            if labels.id(label).is_some() {
                return Err(FusionError::Inconsistent(format!(
                    "duplicate label `{label}`"
                )));
            }
            labels.insert(label);
        }
        let mut clf = FusionClassifier::zeros(mode, context_dim, relation_dim, labels, dropout);
        for block in [
            &mut clf.w_star,
            &mut clf.b_star,
            &mut clf.head_w,
            &mut clf.head_b,
        ] {
            let n = block.len();
            block.clear();
            if let Some(offset) = r.finite_f32s(n, block)? {
                return Err(FusionError::NonFinite { offset });
            }
        }
        if !r.is_at_end() {
            return Err(FusionError::Inconsistent(format!(
                "trailing bytes at byte {}",
                r.offset()
            )));
        }
        Ok(clf)
    }

    pub fn save(&self, path: &Path) -> Result<(), FusionError> {
        std::fs::write(path, self.to_bytes()?).map_err(FusionError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, FusionError> {
        Self::from_bytes(&std::fs::read(path).map_err(FusionError::io(path))?)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
