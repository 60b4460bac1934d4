//! Node and edge feature encodings.
//!
//! Node features are per-node incremental displacements; edge features carry
//! relative positions at the current and at the initial state. No absolute
//! coordinates enter either, so a rigid translation leaves them unchanged.
//! Current relative positions are formed as `Δ_init + (u_r - u_s)` from
//! displacements `u = curr - init`, which keeps the features bit-identical
//! under translation whenever `u` is (always the case for the quantized
//! positions produced by the data generator, and for autoregressive rollouts
//! that accumulate displacements).

use super::graph::EdgeIndex;
use super::mesh::Point;
use crate::diffcore::Matrix;
use crate::error::{Error, Result};

pub const NODE_FEATURES: usize = 3;
pub const EDGE_FEATURES: usize = 8;
pub const REST_FEATURES: usize = 4;

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("{what}: {a} vs {b} nodes")));
    }
    Ok(())
}

#[inline]
pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn norm(d: &Point) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// `curr - prev` per node as an `N x 3` matrix.
pub fn compute_node_features(prev: &[Point], curr: &[Point]) -> Result<Matrix> {
    check_len(prev.len(), curr.len(), "node features")?;
    let mut out = Matrix::zeros(curr.len(), NODE_FEATURES);
    for (n, (p, c)) in prev.iter().zip(curr).enumerate() {
        out.row_mut(n).copy_from_slice(&sub(c, p));
    }
    Ok(out)
}

/// 8-channel edge features from current and initial positions.
pub fn compute_edge_features(curr: &[Point], init: &[Point], edges: &EdgeIndex) -> Result<Matrix> {
    check_len(curr.len(), init.len(), "edge features")?;
    let disp: Vec<Point> = curr.iter().zip(init).map(|(c, i)| sub(c, i)).collect();
    edge_features_from_displacement(init, &disp, edges)
}

/// 8-channel edge features from initial positions and cumulative displacements.
pub fn edge_features_from_displacement(
    init: &[Point],
    disp: &[Point],
    edges: &EdgeIndex,
) -> Result<Matrix> {
    check_len(init.len(), disp.len(), "edge features")?;
    if let Some(m) = edges.max_node() {
        if m >= init.len() {
            return Err(Error::InvalidInput(format!(
                "edge references node {m} of {}",
                init.len()
            )));
        }
    }
    let mut out = Matrix::zeros(edges.len(), EDGE_FEATURES);
    for (e, (s, r)) in edges.iter().enumerate() {
        let d0 = sub(&init[r], &init[s]);
        let du = sub(&disp[r], &disp[s]);
        let d = [d0[0] + du[0], d0[1] + du[1], d0[2] + du[2]];
        let row = out.row_mut(e);
        row[..3].copy_from_slice(&d);
        row[3] = norm(&d);
        row[4..7].copy_from_slice(&d0);
        row[7] = norm(&d0);
    }
    Ok(out)
}

/// 4-channel rest-geometry features `(Δx, Δy, Δz, |Δ|)` with `Δ = p[r] - p[s]`,
/// where senders index `sender_pos` and receivers index `receiver_pos`.
pub fn rest_features(
    sender_pos: &[Point],
    receiver_pos: &[Point],
    edges: &EdgeIndex,
) -> Result<Matrix> {
    let mut out = Matrix::zeros(edges.len(), REST_FEATURES);
    for (e, (s, r)) in edges.iter().enumerate() {
        let (Some(ps), Some(pr)) = (sender_pos.get(s), receiver_pos.get(r)) else {
            return Err(Error::InvalidInput(format!("edge {e} ({s}, {r}) out of range")));
        };
        let d = sub(pr, ps);
        let row = out.row_mut(e);
        row[..3].copy_from_slice(&d);
        row[3] = norm(&d);
    }
    Ok(out)
}
