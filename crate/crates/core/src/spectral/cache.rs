//! Binary basis cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "SMBASIS1"
//! n          u64
//! k          u64
//! modality   u8       0 = mesh, 1 = point cloud
//! shape hash u64      see [`shape_hash`]
//! phi        n*k f64  row-major
//! evals      k   f64
//! mass       n   f64
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::{Modality, SpectralBasis};
use crate::error::{Error, Result};
use crate::geometry::Shape;

const MAGIC: &[u8; 8] = b"SMBASIS1";

/// First eight bytes of the SHA-256 of the shape's coordinates (bit
/// patterns) and face indices.
pub fn shape_hash(shape: &Shape) -> u64 {
    let mut h = Sha256::new();
    for p in shape.positions() {
        for c in p.iter() {
            h.update(c.to_bits().to_le_bytes());
        }
    }
    if let Shape::Mesh(m) = shape {
        for f in m.faces() {
            for i in f {
                h.update((*i as u64).to_le_bytes());
            }
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

pub fn encode(basis: &SpectralBasis, modality: Modality, hash: u64) -> Vec<u8> {
    let (n, k) = (basis.n(), basis.k());
    let mut out = Vec::with_capacity(33 + 8 * (n * k + k + n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.push(modality.code());
    out.extend_from_slice(&hash.to_le_bytes());
    for i in 0..n {
        for j in 0..k {
            out.extend_from_slice(&basis.phi[(i, j)].to_le_bytes());
        }
    }
    for v in basis.evals.iter().chain(basis.mass.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub struct CachedBasis {
    pub basis: SpectralBasis,
    pub modality: Modality,
    pub hash: u64,
}

pub fn decode(bytes: &[u8]) -> Result<CachedBasis> {
    let bad = |msg: &str| Error::InvalidArgument(format!("basis cache: {msg}"));
    if bytes.len() < 33 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let n = u64_at(8) as usize;
    let k = u64_at(16) as usize;
    let modality = Modality::from_code(bytes[24]).ok_or_else(|| bad("unknown modality"))?;
    let hash = u64_at(25);
    let expected = n
        .checked_mul(k)
        .and_then(|nk| nk.checked_add(n + k))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(33))
        .ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut vals = bytes[33..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let phi = DMatrix::from_row_iterator(n, k, vals.by_ref().take(n * k));
    let evals: Vec<f64> = vals.by_ref().take(k).collect();
    let mass = DVector::from_iterator(n, vals);
    Ok(CachedBasis {
        basis: SpectralBasis { phi, evals, mass },
        modality,
        hash,
    })
}

pub fn save(path: &Path, basis: &SpectralBasis, modality: Modality, hash: u64) -> Result<()> {
    std::fs::write(path, encode(basis, modality, hash)).map_err(|e| Error::io(path, e))
}

/// Loads a cached basis, returning `None` when the file is missing or was
/// built for a different shape, modality or a smaller basis.
pub fn load_matching(path: &Path, modality: Modality, hash: u64, k: usize) -> Result<Option<SpectralBasis>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let cached = decode(&bytes)?;
    if cached.hash != hash || cached.modality != modality || cached.basis.k() < k {
        return Ok(None);
    }
    Ok(Some(cached.basis.truncated(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::spectral::{cotan_laplacian, eigenbasis};

    #[test]
    fn round_trip_is_bit_exact() {
        let mesh = primitives::icosphere(1);
        let basis = eigenbasis(&cotan_laplacian(&mesh).unwrap(), 6).unwrap();
        let hash = shape_hash(&Shape::Mesh(mesh));
        let bytes = encode(&basis, Modality::Mesh, hash);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.basis, basis);
        assert_eq!(back.hash, hash);
        assert_eq!(back.modality, Modality::Mesh);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn hash_sees_coordinates() {
        let a = primitives::icosphere(1);
        let b = a.transformed(&nalgebra::Matrix3::identity(), &crate::geometry::Vec3::new(0.0, 0.0, 1e-9));
        assert_ne!(shape_hash(&Shape::Mesh(a)), shape_hash(&Shape::Mesh(b)));
    }
}
