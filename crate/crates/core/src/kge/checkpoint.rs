//! `KGE1` checkpoint layout (little-endian):
//!
//! ```text
//! "KGE1" | kind u8 | |E| u32 | |R| u32 | d u32 | complex u8
//! entity Re (|E|×d f32) | relation Re (|R|×d f32)
//! entity Im | relation Im            (only when complex = 1)
//! ```
//!
//! Kind bytes: 0 = TransE, 1 = DistMult, 2 = ComplEx.

use std::path::Path;

use serde::Serialize;

use super::{KgeError, KgeModel, ModelKind};
use crate::binio::{put_f32s, put_u32, Reader, Truncated};

pub const KGE_MAGIC: &[u8; 4] = b"KGE1";
const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KgeHeader {
    pub kind: ModelKind,
    pub num_entities: u32,
    pub num_relations: u32,
    pub dim: u32,
    pub complex: bool,
}

impl From<Truncated> for KgeError {
    fn from(t: Truncated) -> Self {
        KgeError::Truncated { offset: t.offset }
    }
}

impl KgeModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(
            HEADER_LEN
                + 4 * (self.entity_re.len()
                    + self.entity_im.len()
                    + self.relation_re.len()
                    + self.relation_im.len()),
        );
        buf.extend_from_slice(KGE_MAGIC);
        buf.push(self.kind().to_byte());
        put_u32(&mut buf, self.num_entities() as u32);
        put_u32(&mut buf, self.num_relations() as u32);
        put_u32(&mut buf, self.dim() as u32);
        buf.push(self.kind().is_complex() as u8);
        put_f32s(&mut buf, &self.entity_re);
        put_f32s(&mut buf, &self.relation_re);
        if self.kind().is_complex() {
            put_f32s(&mut buf, &self.entity_im);
            put_f32s(&mut buf, &self.relation_im);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KgeError> {
        let mut r = Reader::new(bytes);
        let header = parse_header(&mut r)?;
        let (ne, nr, d) = (
            header.num_entities as usize,
            header.num_relations as usize,
            header.dim as usize,
        );
        let mut model = KgeModel::zeros(header.kind, ne, nr, d);
        let read_block = |r: &mut Reader<'_>, n: usize| -> Result<Vec<f32>, KgeError> {
            let mut out = Vec::with_capacity(n);
            if let Some(offset) = r.finite_f32s(n, &mut out)? {
                return Err(KgeError::NonFinite { offset });
            }
            Ok(out)
        };
        model.entity_re = read_block(&mut r, ne * d)?;
        model.relation_re = read_block(&mut r, nr * d)?;
        if header.complex {
            model.entity_im = read_block(&mut r, ne * d)?;
            model.relation_im = read_block(&mut r, nr * d)?;
        }
        if !r.is_at_end() {
            return Err(KgeError::Inconsistent(format!(
                "{} trailing bytes after byte {}",
                bytes.len() - r.offset(),
                r.offset()
            )));
        }
        Ok(model)
    }
}

fn parse_header(r: &mut Reader<'_>) -> Result<KgeHeader, KgeError> {
    let magic: [u8; 4] = r.array()?;
    if &magic != KGE_MAGIC {
        return Err(KgeError::BadMagic { found: magic });
    }
    let kind_byte = r.u8()?;
    let kind = ModelKind::from_byte(kind_byte).ok_or(KgeError::UnknownKind(kind_byte))?;
    let num_entities = r.u32()?;
    let num_relations = r.u32()?;
    let dim = r.u32()?;
    let complex = r.u8()? != 0;
    if complex != kind.is_complex() {
        return Err(KgeError::Inconsistent(format!(
            "complex flag {complex} does not match model kind {kind}"
        )));
    }
    Ok(KgeHeader {
        kind,
        num_entities,
        num_relations,
        dim,
        complex,
    })
}

/// Reads only the fixed-size header of a checkpoint.
pub fn read_header(path: &Path) -> Result<KgeHeader, KgeError> {
    use std::io::Read;
    let io_err = |source| KgeError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::with_capacity(HEADER_LEN);
    std::fs::File::open(path)
        .map_err(io_err)?
        .take(HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(io_err)?;
    parse_header(&mut Reader::new(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let m = KgeModel::zeros(ModelKind::ComplEx, 3, 2, 4);
        let b = m.to_bytes();
        assert_eq!(&b[..4], b"KGE1");
        assert_eq!(b[4], 2);
        assert_eq!(u32::from_le_bytes(b[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[13..17].try_into().unwrap()), 4);
        assert_eq!(b[17], 1);
        assert_eq!(b.len(), HEADER_LEN + 4 * 2 * (3 + 2) * 4);
    }

    #[test]
    fn corrupt_inputs() {
        let m = KgeModel::zeros(ModelKind::DistMult, 2, 1, 2);
        let mut b = m.to_bytes();
        assert!(matches!(
            KgeModel::from_bytes(&b[..b.len() - 1]),
            Err(KgeError::Truncated { .. })
        ));
        b[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            KgeModel::from_bytes(&b),
            Err(KgeError::NonFinite { offset: HEADER_LEN })
        ));
        b[0] = b'X';
        assert!(matches!(
            KgeModel::from_bytes(&b),
            Err(KgeError::BadMagic { .. })
        ));
    }

    #[test]
    fn read_header_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kge");
        KgeModel::zeros(ModelKind::TransE, 5, 3, 7)
            .save(&path)
            .unwrap();
        let h = read_header(&path).unwrap();
        assert_eq!(
            (h.kind, h.num_entities, h.num_relations, h.dim, h.complex),
            (ModelKind::TransE, 5, 3, 7, false)
        );
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), kind_idx in 0usize..3, ne in 1usize..6, nr in 1usize..4, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = KgeModel::random(ModelKind::ALL[kind_idx], ne, nr, d, &mut rng);
            let back = KgeModel::from_bytes(&m.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), m.to_bytes());
            prop_assert_eq!(back, m);
        }
    }
}
