//! Graph sequences and the `RGSQ` sample file.
//!
//! Layout (little-endian):
//!
//! | field                | type              |
//! |----------------------|-------------------|
//! | magic `RGSQ`         | 4 bytes           |
//! | version (= 1)        | u32               |
//! | N, M, T              | u32 each          |
//! | morph control point  | u32               |
//! | morph amplitude (mm) | f64               |
//! | fixed mask           | N bytes (0 / 1)   |
//! | edge index           | 2 x M u32, senders row then receivers row |
//! | positions            | T x N x 3 f64     |

use std::path::Path;

use super::graph::EdgeIndex;
use super::mesh::Point;
use crate::binio::{put_f64, put_u32, read_file, to_u32, write_atomic, Reader};
use crate::error::{Error, Result};

pub const SAMPLE_MAGIC: &[u8; 4] = b"RGSQ";
pub const SAMPLE_VERSION: u32 = 1;
pub const SAMPLE_HEADER_BYTES: usize = 4 + 4 * 5 + 8;

/// Control-point morph applied to the benchmark geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorphParams {
    pub control_point: u32,
    /// z offset at the control point, mm.
    pub amplitude: f64,
}

/// Node positions over `T` snapshots on a fixed connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSequence {
    /// `positions[t][n]`, mm; snapshot 0 is the undeformed state.
    pub positions: Vec<Vec<Point>>,
    pub edges: EdgeIndex,
    pub fixed: Vec<bool>,
}

impl GraphSequence {
    pub fn num_nodes(&self) -> usize {
        self.fixed.len()
    }

    pub fn num_steps(&self) -> usize {
        self.positions.len()
    }

    pub fn initial(&self) -> &[Point] {
        &self.positions[0]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.positions.is_empty() {
            return Err(Error::InvalidInput("sequence has no snapshots".into()));
        }
        if let Some(t) = self.positions.iter().position(|p| p.len() != n) {
            return Err(Error::InvalidInput(format!(
                "snapshot {t} has {} nodes, expected {n}",
                self.positions[t].len()
            )));
        }
        if let Some(m) = self.edges.max_node() {
            if m >= n {
                return Err(Error::InvalidInput(format!("edge references node {m} of {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub sequence: GraphSequence,
    pub morph: MorphParams,
}

impl Sample {
    pub fn encoded_len(&self) -> usize {
        let n = self.sequence.num_nodes();
        let m = self.sequence.edges.len();
        let t = self.sequence.num_steps();
        SAMPLE_HEADER_BYTES + n + 2 * m * 4 + t * n * 3 * 8
    }
}

pub fn encode_sample(sample: &Sample) -> Result<Vec<u8>> {
    let seq = &sample.sequence;
    seq.validate()?;
    let mut out = Vec::with_capacity(sample.encoded_len());
    out.extend_from_slice(SAMPLE_MAGIC);
    put_u32(&mut out, SAMPLE_VERSION);
    put_u32(&mut out, to_u32(seq.num_nodes(), "node count")?);
    put_u32(&mut out, to_u32(seq.edges.len(), "edge count")?);
    put_u32(&mut out, to_u32(seq.num_steps(), "snapshot count")?);
    put_u32(&mut out, sample.morph.control_point);
    put_f64(&mut out, sample.morph.amplitude);
    out.extend(seq.fixed.iter().map(|&f| f as u8));
    for &s in seq.edges.senders.iter() {
        put_u32(&mut out, s);
    }
    for &r in seq.edges.receivers.iter() {
        put_u32(&mut out, r);
    }
    for snap in &seq.positions {
        for p in snap {
            for v in p {
                put_f64(&mut out, *v);
            }
        }
    }
    Ok(out)
}

pub fn decode_sample(bytes: &[u8]) -> Result<Sample> {
    let mut r = Reader::new(bytes);
    let magic = r.bytes(4, "magic")?;
    if magic != SAMPLE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"RGSQ\"", String::from_utf8_lossy(magic)),
        });
    }
    let version = r.u32("version")?;
    if version != SAMPLE_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported sample version {version}"),
        });
    }
    let n = r.u32("node count")? as usize;
    let m = r.u32("edge count")? as usize;
    let t = r.u32("snapshot count")? as usize;
    let control_point = r.u32("morph control point")?;
    let amplitude = r.f64("morph amplitude")?;
    let mask_at = r.offset();
    let mask = r.bytes(n, "fixed mask")?;
    if let Some(i) = mask.iter().position(|&b| b > 1) {
        return Err(Error::Format {
            offset: mask_at + i as u64,
            message: format!("fixed mask byte {} is not 0 or 1", mask[i]),
        });
    }
    let fixed = mask.iter().map(|&b| b == 1).collect();
    let mut rows = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for row in &mut rows {
        for _ in 0..m {
            let at = r.offset();
            let v = r.u32("edge index")?;
            if v as usize >= n {
                return Err(Error::Format {
                    offset: at,
                    message: format!("edge endpoint {v} out of range for {n} nodes"),
                });
            }
            row.push(v);
        }
    }
    let [senders, receivers] = rows;
    let flat = r.f64s(t * n * 3, "positions")?;
    r.expect_end()?;
    let positions = flat
        .chunks_exact(n * 3)
        .map(|snap| snap.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
        .collect::<Vec<Vec<Point>>>();
    let positions = if n == 0 { vec![Vec::new(); t] } else { positions };
    Ok(Sample {
        sequence: GraphSequence {
            positions,
            edges: EdgeIndex::new(senders, receivers)?,
            fixed,
        },
        morph: MorphParams {
            control_point,
            amplitude,
        },
    })
}

pub fn serialize_sample(sample: &Sample, path: &Path) -> Result<()> {
    write_atomic(path, &encode_sample(sample)?)
}

pub fn deserialize_sample(path: &Path) -> Result<Sample> {
    decode_sample(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::meshgraph::graph::build_graph_from_mesh;
    use crate::meshgraph::mesh::{grid_mesh, GridDims};

    fn toy(nx: usize, ny: usize, t: usize, seed: u64) -> Sample {
        let mesh = grid_mesh(
            GridDims { nx, ny },
            |i, j| [i as f64 * 1.5, j as f64, 0.0],
            |i, _| i == 0,
        );
        let g = build_graph_from_mesh(&mesh).unwrap();
        let positions = (0..t)
            .map(|s| {
                mesh.positions
                    .iter()
                    .enumerate()
                    .map(|(n, p)| {
                        let bits = seed.wrapping_mul(31 + n as u64 + 1000 * s as u64);
                        [p[0], p[1], f64::from_bits(bits >> 2)]
                    })
                    .collect()
            })
            .collect();
        Sample {
            sequence: GraphSequence {
                positions,
                edges: g.edges,
                fixed: mesh.fixed,
            },
            morph: MorphParams {
                control_point: 2,
                amplitude: -1.25,
            },
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_identical(nx in 2usize..6, ny in 2usize..5, t in 1usize..4, seed in any::<u64>()) {
            let s = toy(nx, ny, t, seed);
            let bytes = encode_sample(&s).unwrap();
            let back = decode_sample(&bytes).unwrap();
            prop_assert_eq!(encode_sample(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn desk_sample_file_size() {
        let s = toy(33, 9, 12, 5);
        let bytes = encode_sample(&s).unwrap();
        // header: magic + version + N + M + T + control point (6 x 4 bytes) + amplitude (8)
        assert_eq!(bytes.len(), 32 + 297 + 2 * 2128 * 4 + 12 * 297 * 3 * 8);
        assert_eq!(bytes.len(), s.encoded_len());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_sample(&toy(2, 2, 1, 1)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_sample(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_sample(&toy(2, 2, 1, 1)).unwrap();
        match decode_sample(&bytes[..20]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode_sample(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let s = toy(2, 2, 1, 1);
        let mut bytes = encode_sample(&s).unwrap();
        let at = SAMPLE_HEADER_BYTES + 4;
        bytes[at..at + 4].copy_from_slice(&99u32.to_le_bytes());
        match decode_sample(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, at as u64),
            other => panic!("unexpected {other:?}"),
        }
    }
}
