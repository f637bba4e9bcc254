//! `CTXE` embedding file (little-endian):
//!
//! ```text
//! "CTXE" | count u32 | d_c u32
//! count × ( id_len u16 | id bytes (UTF-8) | d_c × f32 )
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::EncoderError;
use crate::binio::{put_f32s, put_str16, put_u32, Reader};

pub const CTXE_MAGIC: &[u8; 4] = b"CTXE";

/// Document id → fixed-width vector, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        let row = *self.index.get(id)?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<(), EncoderError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(EncoderError::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(EncoderError::NonFiniteValue { id, index: i });
        }
        if self.index.contains_key(&id) {
            return Err(EncoderError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EncoderError> {
        let mut buf = Vec::with_capacity(
            12 + self.data.len() * 4 + self.ids.iter().map(|s| s.len() + 2).sum::<usize>(),
        );
        buf.extend_from_slice(CTXE_MAGIC);
        put_u32(&mut buf, self.len() as u32);
        put_u32(&mut buf, self.dim as u32);
        for (row, id) in self.ids.iter().enumerate() {
            put_str16(&mut buf, id).map_err(|len| EncoderError::IdTooLong {
                id: id.clone(),
                len,
            })?;
            put_f32s(&mut buf, &self.data[row * self.dim..(row + 1) * self.dim]);
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        let mut r = Reader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if &magic != CTXE_MAGIC {
            return Err(EncoderError::BadMagic { found: magic });
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let mut table = EmbeddingTable::new(dim);
        let mut row = Vec::with_capacity(dim);
        for _ in 0..count {
            let id_offset = r.offset();
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?)
                .map_err(|_| EncoderError::BadId { offset: id_offset })?
                .to_string();
            row.clear();
            if let Some(offset) = r.finite_f32s(dim, &mut row)? {
                return Err(EncoderError::NonFinite { offset });
            }
            if table.index.contains_key(&id) {
                return Err(EncoderError::DuplicateId(id));
            }
            table.index.insert(id.clone(), table.ids.len());
            table.ids.push(id);
            table.data.extend_from_slice(&row);
        }
        if !r.is_at_end() {
            return Err(EncoderError::TrailingBytes { offset: r.offset() });
        }
        Ok(table)
    }
}

pub fn load_external_embeddings(path: &Path) -> Result<EmbeddingTable, EncoderError> {
    let bytes = std::fs::read(path).map_err(EncoderError::io(path))?;
    EmbeddingTable::from_bytes(&bytes)
}

pub fn write_external_embeddings(path: &Path, table: &EmbeddingTable) -> Result<(), EncoderError> {
    std::fs::write(path, table.to_bytes()?).map_err(EncoderError::io(path))
}
