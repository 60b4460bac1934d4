//! `RGCK` named-tensor files.
//!
//! Layout (little-endian): magic `RGCK`, version `u32`, tensor count `u32`,
//! then per tensor: name length `u32`, UTF-8 name, rows `u32`, cols `u32`,
//! `rows * cols` `f64` values row-major.

use std::path::Path;

use super::matrix::Matrix;
use crate::binio::{put_f64, put_u32, read_file, to_u32, write_atomic, Reader};
use crate::error::Result;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_tensors(tensors: &[(String, Matrix)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, to_u32(tensors.len(), "tensor count")?);
    for (name, m) in tensors {
        put_u32(&mut out, to_u32(name.len(), "name length")?);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, to_u32(m.rows(), "rows")?);
        put_u32(&mut out, to_u32(m.cols(), "cols")?);
        for v in m.as_slice() {
            put_f64(&mut out, *v);
        }
    }
    Ok(out)
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Matrix)>> {
    let mut r = Reader::new(bytes);
    let magic = r.bytes(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(crate::error::Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"RGCK\"", String::from_utf8_lossy(magic)),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return r.fail(format!("unsupported checkpoint version {version}"));
    }
    let count = r.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name_bytes = r.bytes(len, "tensor name")?;
        let name = match std::str::from_utf8(name_bytes) {
            Ok(s) => s.to_string(),
            Err(_) => return r.fail("tensor name is not UTF-8"),
        };
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let data = r.f64s(rows * cols, "tensor data")?;
        out.push((name, Matrix::from_vec(rows, cols, data)));
    }
    r.expect_end()?;
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[(String, Matrix)]) -> Result<()> {
    write_atomic(path, &encode_tensors(tensors)?)
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, Matrix)>> {
    decode_tensors(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::error::Error;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            tensors in proptest::collection::vec(
                ("[a-z.#_0-9]{0,12}", 0usize..4, 0usize..4, any::<u64>()),
                0..5,
            )
        ) {
            let tensors: Vec<(String, Matrix)> = tensors
                .into_iter()
                .map(|(name, r, c, seed)| {
                    let data = (0..r * c)
                        .map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) ^ 0x3ff0_0000_0000_0000))
                        .collect();
                    (name, Matrix::from_vec(r, c, data))
                })
                .collect();
            let bytes = encode_tensors(&tensors).unwrap();
            let back = decode_tensors(&bytes).unwrap();
            prop_assert_eq!(back.len(), tensors.len());
            for ((n1, m1), (n2, m2)) in tensors.iter().zip(&back) {
                prop_assert_eq!(n1, n2);
                prop_assert_eq!(m1.shape(), m2.shape());
                let b1: Vec<u64> = m1.as_slice().iter().map(|v| v.to_bits()).collect();
                let b2: Vec<u64> = m2.as_slice().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(b1, b2);
            }
            prop_assert_eq!(encode_tensors(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn truncated_file_reports_offset() {
        let bytes = encode_tensors(&[("w".into(), Matrix::filled(2, 2, 1.5))]).unwrap();
        let err = decode_tensors(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 4 + 4 + 4 + 4 + 1 + 4 + 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_magic_rejected() {
        let mut bytes = encode_tensors(&[]).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_tensors(&bytes), Err(Error::Format { offset: 0, .. })));
    }
}
