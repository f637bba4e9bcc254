//! Contextual document vectors: a trainable hashed bag-of-tokens encoder,
//! or vectors computed elsewhere and loaded from a `CTXE` file.

mod table;

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use rand::Rng;
use thiserror::Error;

use crate::binio::{put_f32s, put_u32, Reader, Truncated};
use crate::corpus::MarkedDocument;

pub use table::{load_external_embeddings, write_external_embeddings, EmbeddingTable, CTXE_MAGIC};

pub const DEFAULT_VOCAB_SIZE: usize = 1 << 16;
pub const DEFAULT_CONTEXT_DIM: usize = 128;
pub const CTXB_MAGIC: &[u8; 4] = b"CTXB";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("no embedding for document `{id}`")]
    MissingEmbedding { id: String },
    #[error("document `{id}` has no tokens")]
    EmptyDocument { id: String },
    #[error("vector has dimension {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("vector for `{id}` has a non-finite value at index {index}")]
    NonFiniteValue { id: String, index: usize },
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("id `{id}` is {len} bytes, longer than the u16 length prefix allows")]
    IdTooLong { id: String, len: usize },
    #[error("invalid UTF-8 id at byte {offset}")]
    BadId { offset: usize },
    #[error("bad magic {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("unexpected trailing bytes at byte {offset}")]
    TrailingBytes { offset: usize },
    #[error("invalid encoder configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EncoderError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EncoderError + '_ {
        move |source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<Truncated> for EncoderError {
    fn from(t: Truncated) -> Self {
        EncoderError::Truncated { offset: t.offset }
    }
}

/// FNV-1a (64-bit) of the lowercased token.
pub fn token_hash(token: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(token.to_lowercase().as_bytes());
    h.finish()
}

/// Mean of hashed-token embedding rows. Marker tokens are hashed like any
/// other token.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinEncoder {
    vocab_size: usize,
    dim: usize,
    pub(crate) weights: Vec<f32>,
}

impl BuiltinEncoder {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        BuiltinEncoder {
            vocab_size,
            dim,
            weights: vec![0.0; vocab_size * dim],
        }
    }

    /// Rows drawn from uniform(−1/√d, 1/√d).
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let a = 1.0 / (dim as f32).sqrt();
        BuiltinEncoder {
            vocab_size,
            dim,
            weights: (0..vocab_size * dim)
                .map(|_| rng.gen_range(-a..a))
                .collect(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket(&self, token: &str) -> usize {
        (token_hash(token) % self.vocab_size as u64) as usize
    }

    pub fn row(&self, bucket: usize) -> &[f32] {
        &self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn row_mut(&mut self, bucket: usize) -> &mut [f32] {
        &mut self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn buckets(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.bucket(t)).collect()
    }

    /// Mean of the given rows, accumulated in `f64`.
    pub fn pool(&self, buckets: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &b in buckets {
            for (o, &w) in out.iter_mut().zip(self.row(b)) {
                *o += w as f64;
            }
        }
        let n = buckets.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<f64> {
        self.pool(&self.buckets(tokens))
    }

    /// `"CTXB" | V u32 | d u32 | V×d f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(12 + 4 * self.weights.len());
        buf.extend_from_slice(CTXB_MAGIC);
        put_u32(&mut buf, self.vocab_size as u32);
        put_u32(&mut buf, self.dim as u32);
        put_f32s(&mut buf, &self.weights);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        let mut r = Reader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if &magic != CTXB_MAGIC {
            return Err(EncoderError::BadMagic { found: magic });
        }
        let vocab_size = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let mut weights = Vec::new();
        let n = vocab_size
            .checked_mul(dim)
            .ok_or(EncoderError::Truncated { offset: 12 })?;
        if let Some(offset) = r.finite_f32s(n, &mut weights)? {
            return Err(EncoderError::NonFinite { offset });
        }
        if !r.is_at_end() {
            return Err(EncoderError::TrailingBytes { offset: r.offset() });
        }
        Ok(BuiltinEncoder {
            vocab_size,
            dim,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        std::fs::write(path, self.to_bytes()).map_err(EncoderError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        Self::from_bytes(&std::fs::read(path).map_err(EncoderError::io(path))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContextEncoder {
    Builtin(BuiltinEncoder),
    /// Frozen vectors looked up by document id.
    External(EmbeddingTable),
}

impl ContextEncoder {
    pub fn dim(&self) -> usize {
        match self {
            ContextEncoder::Builtin(b) => b.dim(),
            ContextEncoder::External(t) => t.dim(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            ContextEncoder::Builtin(_) => "builtin",
            ContextEncoder::External(_) => "external",
        }
    }

    /// H_c for one document.
    pub fn encode_document(&self, doc: &MarkedDocument) -> Result<Vec<f64>, EncoderError> {
        match self {
            ContextEncoder::Builtin(b) => {
                if doc.tokens.is_empty() {
                    return Err(EncoderError::EmptyDocument { id: doc.id.clone() });
                }
                Ok(b.encode_tokens(&doc.tokens))
            }
            ContextEncoder::External(t) => t
                .get(&doc.id)
                .map(|v| v.iter().map(|&x| x as f64).collect())
                .ok_or_else(|| EncoderError::MissingEmbedding { id: doc.id.clone() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, tokens: &[&str]) -> MarkedDocument {
        MarkedDocument {
            id: id.to_string(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label: "x".into(),
            head_entity: "a".into(),
            tail_entity: "b".into(),
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(token_hash(""), 0xcbf29ce484222325);
        assert_eq!(token_hash("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(token_hash("A"), token_hash("a"));
        assert_eq!(token_hash("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn zero_table_gives_zero_vector() {
        let enc = ContextEncoder::Builtin(BuiltinEncoder::zeros(64, 4));
        assert_eq!(
            enc.encode_document(&doc("d", &["<<", "x", ">>"])).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn single_token_is_its_row() {
        let b = BuiltinEncoder::random(128, 5, &mut ChaCha8Rng::seed_from_u64(3));
        let row: Vec<f64> = b.row(b.bucket("Gene")).iter().map(|&v| v as f64).collect();
        assert_eq!(
            ContextEncoder::Builtin(b)
                .encode_document(&doc("d", &["Gene"]))
                .unwrap(),
            row
        );
    }

    #[test]
    fn empty_and_missing() {
        let b = ContextEncoder::Builtin(BuiltinEncoder::zeros(8, 2));
        assert!(matches!(
            b.encode_document(&doc("d", &[])),
            Err(EncoderError::EmptyDocument { .. })
        ));
        let mut t = EmbeddingTable::new(2);
        t.insert("d42", &[0.1, 0.2]).unwrap();
        let e = ContextEncoder::External(t);
        assert_eq!(
            e.encode_document(&doc("d42", &[])).unwrap(),
            vec![0.1f32 as f64, 0.2f32 as f64]
        );
        match e.encode_document(&doc("d7", &["a"])) {
            Err(EncoderError::MissingEmbedding { id }) => assert_eq!(id, "d7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let b = BuiltinEncoder::random(16, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], b"CTXB");
        assert_eq!(BuiltinEncoder::from_bytes(&bytes).unwrap(), b);
        assert!(matches!(
            BuiltinEncoder::from_bytes(&bytes[..20]),
            Err(EncoderError::Truncated { .. })
        ));
    }

    proptest! {
        #[test]
        fn mean_pooling_is_order_free(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = BuiltinEncoder::random(32, 4, &mut rng);
            let tokens: Vec<String> = (0..n).map(|i| format!("t{}", (i * 7 + seed as usize) % 40)).collect();
            let mut shuffled = tokens.clone();
            shuffled.shuffle(&mut rng);
            let (x, y) = (b.encode_tokens(&tokens), b.encode_tokens(&shuffled));
            for (a, c) in x.iter().zip(&y) {
                prop_assert!((a - c).abs() <= 1e-12);
            }
        }
    }
}
