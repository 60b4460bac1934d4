//! Graph data a model consumes: the shared benchmark levels and the per-sample fine graph.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::meshgraph::{
    connect_cross_graph_edges, CrossGraphEdges, EdgeIndex, GraphHierarchy, GraphSequence, Point,
};

fn mean_norm(rest: &Matrix) -> f64 {
    if rest.rows() == 0 {
        return 1.0;
    }
    let s: f64 = (0..rest.rows()).map(|r| rest.get(r, 3)).sum();
    let m = s / rest.rows() as f64;
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn scaled(rest: &Matrix, s: f64) -> Matrix {
    let mut m = rest.clone();
    m.scale(1.0 / s);
    m
}

/// Shared coarse levels prepared for a multi-scale model.
#[derive(Clone, Debug)]
pub struct ModelGraphs {
    pub hierarchy: Arc<GraphHierarchy>,
    /// Length unit for fine-to-level-1 cross-edge rest features (mean benchmark cross-edge length).
    pub cross_scale: f64,
    /// In-graph rest features of the coarsest level, divided by their mean length.
    pub coarse_rest: Matrix,
    /// Cross edges between coarse levels `l -> l+1` for `l >= 1`.
    pub nw_down: Vec<CrossGraphEdges>,
    /// Their reversals, same order.
    pub nw_up: Vec<CrossGraphEdges>,
}

impl ModelGraphs {
    pub fn new(hierarchy: Arc<GraphHierarchy>) -> Result<Self> {
        if hierarchy.depth() == 0 || hierarchy.cross_edges.len() != hierarchy.depth() {
            return Err(Error::Config(
                "hierarchy needs at least one coarse level and connected cross edges".into(),
            ));
        }
        let coarsest = &hierarchy.levels[hierarchy.depth()].graph;
        let coarse_rest = scaled(&coarsest.edge_features, mean_norm(&coarsest.edge_features));
        let cross_scale = mean_norm(&hierarchy.cross_edges[0].rest_features);
        let nw_down: Vec<_> = hierarchy.cross_edges[1..].to_vec();
        let nw_up = nw_down.iter().map(|c| c.reversed()).collect();
        Ok(ModelGraphs {
            hierarchy,
            cross_scale,
            coarse_rest,
            nw_down,
            nw_up,
        })
    }

    pub fn depth(&self) -> usize {
        self.hierarchy.depth()
    }

    pub fn k(&self) -> usize {
        self.hierarchy.cross_edges[0].k
    }

    pub fn fine_nodes(&self) -> usize {
        self.hierarchy.levels[0].positions.len()
    }

    pub fn level_nodes(&self, l: usize) -> usize {
        self.hierarchy.levels[l].positions.len()
    }

    pub fn coarse_edges(&self) -> &EdgeIndex {
        &self.hierarchy.levels[self.depth()].graph.edges
    }

    /// Fingerprint of the hierarchy: `[depth, k, node counts.., cross counts.., 8 x u32 hash words]`.
    pub fn signature(&self) -> Vec<f64> {
        let h = &self.hierarchy;
        let mut v = vec![h.depth() as f64, self.k() as f64];
        v.extend(h.node_counts().iter().map(|&n| n as f64));
        v.extend(h.cross_edges.iter().map(|c| c.len() as f64));
        let mut sha = Sha256::new();
        for lvl in &h.levels {
            for p in &lvl.positions {
                for c in p {
                    sha.update(c.to_le_bytes());
                }
            }
        }
        for c in &h.cross_edges {
            for (s, r) in c.edges.iter() {
                sha.update((s as u32).to_le_bytes());
                sha.update((r as u32).to_le_bytes());
            }
        }
        for w in sha.finalize().chunks_exact(4) {
            v.push(u32::from_le_bytes(w.try_into().expect("4 bytes")) as f64);
        }
        v
    }
}

/// A sample's fine graph plus the cross edges linking it to the first coarse level.
#[derive(Clone, Debug)]
pub struct SampleContext {
    pub init: Vec<Point>,
    pub fixed: Arc<[bool]>,
    pub free: Arc<[bool]>,
    pub edges: EdgeIndex,
    /// Fine -> level 1, rest features in units of [`ModelGraphs::cross_scale`].
    pub down: Option<CrossGraphEdges>,
    /// Level 1 -> fine.
    pub up: Option<CrossGraphEdges>,
}

impl SampleContext {
    /// Builds the context of `seq`; with `graphs`, cross edges are connected
    /// after registering the sample onto the benchmark frame through its first
    /// clamped node (node 0 if none is clamped). The registration uses only
    /// differences of sample positions, so a rigid shift of the sample leaves
    /// the cross edges unchanged.
    pub fn new(seq: &GraphSequence, graphs: Option<&ModelGraphs>) -> Result<Self> {
        seq.validate()?;
        let init = seq.initial().to_vec();
        let fixed: Arc<[bool]> = seq.fixed.clone().into();
        let free: Arc<[bool]> = seq.fixed.iter().map(|f| !f).collect::<Vec<_>>().into();
        let (down, up) = match graphs {
            None => (None, None),
            Some(g) => {
                let bench = &g.hierarchy.levels[0].positions;
                if bench.len() != init.len() {
                    return Err(Error::Config(format!(
                        "sample has {} nodes but the benchmark grid has {}",
                        init.len(),
                        bench.len()
                    )));
                }
                let a = seq.fixed.iter().position(|f| *f).unwrap_or(0);
                let (pa, ba) = (init[a], bench[a]);
                let registered: Vec<Point> = init
                    .iter()
                    .map(|p| {
                        [
                            (p[0] - pa[0]) + ba[0],
                            (p[1] - pa[1]) + ba[1],
                            (p[2] - pa[2]) + ba[2],
                        ]
                    })
                    .collect();
                let mut down = connect_cross_graph_edges(
                    &registered,
                    &g.hierarchy.levels[1].positions,
                    g.k(),
                )?;
                down.rest_features.scale(1.0 / g.cross_scale);
                let up = down.reversed();
                (Some(down), Some(up))
            }
        };
        Ok(SampleContext {
            init,
            fixed,
            free,
            edges: seq.edges.clone(),
            down,
            up,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.init.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    /// Renames fine node `n` to `perm[n]` everywhere, keeping every edge list
    /// in its current order (so aggregation sums run in the same order).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        check_perm(perm, n)?;
        let mut init = vec![[0.0; 3]; n];
        let mut fixed = vec![false; n];
        for (old, &new) in perm.iter().enumerate() {
            init[new] = self.init[old];
            fixed[new] = self.fixed[old];
        }
        let map = |idx: &[u32]| -> Vec<u32> { idx.iter().map(|&i| perm[i as usize] as u32).collect() };
        let edges = EdgeIndex::new(map(&self.edges.senders), map(&self.edges.receivers))?;
        let relabel_cross = |c: &CrossGraphEdges, fine_senders: bool| -> Result<CrossGraphEdges> {
            let (s, r) = if fine_senders {
                (map(&c.edges.senders), c.edges.receivers.to_vec())
            } else {
                (c.edges.senders.to_vec(), map(&c.edges.receivers))
            };
            Ok(CrossGraphEdges {
                edges: EdgeIndex::new(s, r)?,
                rest_features: c.rest_features.clone(),
                k: c.k,
            })
        };
        Ok(SampleContext {
            init,
            free: fixed.iter().map(|f| !f).collect::<Vec<_>>().into(),
            fixed: fixed.into(),
            edges,
            down: self.down.as_ref().map(|c| relabel_cross(c, true)).transpose()?,
            up: self.up.as_ref().map(|c| relabel_cross(c, false)).transpose()?,
        })
    }
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidInput(format!("not a permutation of {n} nodes")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgraph::{build_coarse_hierarchy, build_graph_from_mesh, grid_mesh, GridDims};

    fn setup() -> (ModelGraphs, GraphSequence) {
        let dims = GridDims { nx: 5, ny: 3 };
        let mesh = grid_mesh(dims, |i, j| [i as f64 * 10.0, j as f64 * 8.0, (i % 2) as f64], |i, _| i == 0);
        let mut h = build_coarse_hierarchy(&mesh, dims, 1).unwrap();
        h.connect(3).unwrap();
        let g = build_graph_from_mesh(&mesh).unwrap();
        let seq = GraphSequence {
            positions: vec![mesh.positions.clone()],
            edges: g.edges,
            fixed: mesh.fixed,
        };
        (ModelGraphs::new(Arc::new(h)).unwrap(), seq)
    }

    #[test]
    fn translated_sample_gets_same_cross_edges() {
        let (g, seq) = setup();
        let a = SampleContext::new(&seq, Some(&g)).unwrap();
        let mut shifted = seq.clone();
        for p in &mut shifted.positions[0] {
            *p = [p[0] + 17.0, p[1] - 5.0, p[2] + 3.0];
        }
        let b = SampleContext::new(&shifted, Some(&g)).unwrap();
        assert_eq!(a.down, b.down);
        assert_eq!(a.up, b.up);
        assert_eq!(a.down.as_ref().unwrap().len(), 15 * 3);
    }

    #[test]
    fn relabel_round_trip() {
        let (g, seq) = setup();
        let ctx = SampleContext::new(&seq, Some(&g)).unwrap();
        let perm: Vec<usize> = (0..15).map(|i| (i * 7) % 15).collect();
        let mut inv = vec![0; 15];
        for (o, &n) in perm.iter().enumerate() {
            inv[n] = o;
        }
        let p = ctx.relabel(&perm).unwrap();
        assert_eq!(p.init[perm[3]], ctx.init[3]);
        let back = p.relabel(&inv).unwrap();
        assert_eq!(back.edges, ctx.edges);
        assert_eq!(back.down, ctx.down);
        assert_eq!(back.init, ctx.init);
        assert!(ctx.relabel(&[0; 15]).is_err());
    }

    #[test]
    fn wrong_sample_size_is_config_error() {
        let (g, mut seq) = setup();
        seq.positions[0].pop();
        seq.fixed.pop();
        seq.edges = EdgeIndex::new(vec![0], vec![1]).unwrap();
        assert!(matches!(SampleContext::new(&seq, Some(&g)), Err(Error::Config(_))));
    }
}
