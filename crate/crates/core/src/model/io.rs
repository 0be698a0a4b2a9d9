//! Binary model file.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! offset  size        field
//! 0       8           magic "ASDAEMDL"
//! 8       4   u32     format version (1)
//! 12      4   u32     number of layer widths L+1
//! 16      4*(L+1) u32 layer widths
//! ..      8   u64     initialization seed
//! ..                  per layer i: in_i*out_i f32 weights (row-major, in x out)
//!                     followed by out_i f32 biases
//! ```
//!
//! The file must end exactly after the last bias.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::ae::{validate_dims, AeModel};
use crate::error::{Error, Result};
use crate::fsutil::{read_bytes, write_atomic, ByteReader};

pub const MODEL_MAGIC: &[u8; 8] = b"ASDAEMDL";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &AeModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * model.num_parameters());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dims().len() as u32).to_le_bytes());
    for &d in model.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.seed().to_le_bytes());
    for (w, b) in model.weights().iter().zip(model.biases()) {
        for &v in w.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<AeModel<f32>> {
    let mut r = ByteReader::new(bytes, "model file");
    let magic = r
        .take(8)
        .map_err(|_| Error::ArtifactFormat("file too short for a model header".into()))?;
    if magic != MODEL_MAGIC {
        return Err(Error::ArtifactFormat("missing model magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let n = r.u32()? as usize;
    if n > 4096 {
        return Err(Error::Corrupt(format!("implausible layer count {n}")));
    }
    let dims = (0..n)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    validate_dims(&dims).map_err(|e| Error::Corrupt(e.to_string()))?;
    let seed = r.u64()?;
    let mut weights = Vec::with_capacity(n - 1);
    let mut biases = Vec::with_capacity(n - 1);
    for pair in dims.windows(2) {
        let (i, o) = (pair[0], pair[1]);
        let w = (0..i * o).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let b = (0..o).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        weights.push(Array2::from_shape_vec((i, o), w).expect("shape matches length"));
        biases.push(Array1::from(b));
    }
    r.finish()?;
    AeModel::from_parameters(weights, biases, seed)
}

pub fn save_model(model: &AeModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_model(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AeModel<f32>> {
    decode_model(&read_bytes(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_forward_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = AeModel::<f32>::init(&[12, 5, 2, 5, 12], 77).unwrap();
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        let x = Array2::from_shape_fn((3, 12), |(i, j)| (i as f32 - j as f32) * 0.1);
        let a = m.forward(x.view()).unwrap();
        let b = back.forward(x.view()).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let m = AeModel::<f32>::init(&[8, 3, 8], 1).unwrap();
        let bytes = encode_model(&m);
        for cut in [bytes.len() - 1, bytes.len() / 2, 20] {
            assert!(matches!(decode_model(&bytes[..cut]), Err(Error::Corrupt(_))));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_model(&long), Err(Error::Corrupt(_))));
    }

    #[test]
    fn wrong_magic_and_version() {
        let m = AeModel::<f32>::init(&[8, 3, 8], 1).unwrap();
        let mut bytes = encode_model(&m);
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::ArtifactFormat(_))));
        assert!(matches!(decode_model(b"RIFF"), Err(Error::ArtifactFormat(_))));
        let mut bytes = encode_model(&m);
        bytes[8] = 9;
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::VersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn header_layout() {
        let m = AeModel::<f32>::init(&[4, 2, 4], 0x0102).unwrap();
        let bytes = encode_model(&m);
        assert_eq!(&bytes[..8], b"ASDAEMDL");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..28], &[4, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(&bytes[28..36], &0x0102u64.to_le_bytes());
        assert_eq!(bytes.len(), 36 + 4 * m.num_parameters());
    }
}
