//! Dense vector store: 16-byte header {magic "EVPX", dim u32, count u64}
//! followed by `count * dim` little-endian f32 values.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVPX";

pub fn encode_vectors(dim: usize, rows: &[&[f32]]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + rows.len() * dim * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for row in rows {
        if row.len() != dim {
            return Err(Error::VectorStore(format!(
                "row of length {} in a store of dimension {dim}",
                row.len()
            )));
        }
        for x in *row {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns (dim, rows).
pub fn decode_vectors(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>)> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::VectorStore("missing EVPX header".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if dim == 0 && count > 0 {
        return Err(Error::VectorStore("zero dimension".into()));
    }
    if Some(body.len()) != count.checked_mul(dim).and_then(|n| n.checked_mul(4)) {
        return Err(Error::VectorStore(format!(
            "body of {} bytes does not hold {count} x {dim} floats",
            body.len()
        )));
    }
    let rows = if dim == 0 {
        Vec::new()
    } else {
        body.chunks_exact(dim * 4)
            .map(|row| {
                row.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect()
            })
            .collect()
    };
    Ok((dim, rows))
}

pub fn read_vectors(path: &Path) -> Result<(usize, Vec<Vec<f32>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_vectors(&bytes).map_err(|e| Error::parse(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let b = encode_vectors(3, &[&[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(&b[..4], b"EVPX");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 1);
        assert_eq!(b.len(), 16 + 12);
        assert!(encode_vectors(2, &[&[1.0]]).is_err());
        assert!(decode_vectors(&b[..20]).is_err());
        assert!(decode_vectors(b"EVP").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 7), 0..20)) {
            let refs: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
            let bytes = encode_vectors(7, &refs).unwrap();
            let (dim, back) = decode_vectors(&bytes).unwrap();
            prop_assert_eq!(dim, 7);
            prop_assert_eq!(back, rows);
        }
    }
}
