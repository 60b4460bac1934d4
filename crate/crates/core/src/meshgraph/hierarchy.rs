use super::features::{rest_features, sub};
use super::graph::{build_graph_from_mesh, EdgeIndex, Graph};
use super::mesh::{grid_mesh, GridDims, Mesh, Point};
use crate::diffcore::Matrix;
use crate::error::{Error, Result};

/// Fine-to-coarse k-nearest-neighbour edges with 4-channel rest features.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossGraphEdges {
    /// Senders index the fine level, receivers the coarse level.
    pub edges: EdgeIndex,
    pub rest_features: Matrix,
    pub k: usize,
}

impl CrossGraphEdges {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Coarse-to-fine copy for upsampling: endpoints swapped, displacement
    /// channels negated, norm kept.
    pub fn reversed(&self) -> CrossGraphEdges {
        let mut feats = self.rest_features.clone();
        for r in 0..feats.rows() {
            let row = feats.row_mut(r);
            for v in &mut row[..3] {
                *v = -*v;
            }
        }
        CrossGraphEdges {
            edges: self.edges.reversed(),
            rest_features: feats,
            k: self.k,
        }
    }
}

/// For each fine node, connects the `k` coarse nodes closest in Euclidean
/// distance (ties go to the smaller coarse index). Edges are grouped by fine
/// node in ascending order, nearest first.
pub fn connect_cross_graph_edges(
    fine: &[Point],
    coarse: &[Point],
    k: usize,
) -> Result<CrossGraphEdges> {
    if k == 0 || k > coarse.len() {
        return Err(Error::Config(format!(
            "k = {k} cross-graph edges requested but the coarse level has {} nodes",
            coarse.len()
        )));
    }
    if fine.iter().chain(coarse).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite position in cross-graph search".into()));
    }
    let mut senders = Vec::with_capacity(fine.len() * k);
    let mut receivers = Vec::with_capacity(fine.len() * k);
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(coarse.len());
    for (f, pf) in fine.iter().enumerate() {
        cand.clear();
        cand.extend(coarse.iter().enumerate().map(|(c, pc)| {
            let d = sub(pc, pf);
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2], c as u32)
        }));
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, c) in &cand[..k] {
            senders.push(f as u32);
            receivers.push(c);
        }
    }
    let edges = EdgeIndex::new(senders, receivers)?;
    let rest = rest_features(fine, coarse, &edges)?;
    Ok(CrossGraphEdges {
        edges,
        rest_features: rest,
        k,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyLevel {
    pub grid: GridDims,
    pub positions: Vec<Point>,
    /// In-graph edges with 4-channel rest features.
    pub graph: Graph,
}

/// Benchmark grid levels (level 0 = fine) and the cross edges between them.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphHierarchy {
    pub levels: Vec<HierarchyLevel>,
    /// `cross_edges[l]` connects level `l` to level `l + 1`; empty until
    /// [`GraphHierarchy::connect`] is called.
    pub cross_edges: Vec<CrossGraphEdges>,
}

/// Subsamples a structured benchmark mesh into `levels` coarse grids, each
/// keeping every `2^l`-th node per direction.
pub fn build_coarse_hierarchy(
    benchmark: &Mesh,
    grid: GridDims,
    levels: usize,
) -> Result<GraphHierarchy> {
    if benchmark.num_nodes() != grid.num_nodes() {
        return Err(Error::Config(format!(
            "benchmark mesh has {} nodes but the grid is {}x{}",
            benchmark.num_nodes(),
            grid.nx,
            grid.ny
        )));
    }
    if levels == 0 {
        return Err(Error::Config("hierarchy needs at least one coarse level".into()));
    }
    grid.coarsened(levels)?;
    let mut out = Vec::with_capacity(levels + 1);
    for l in 0..=levels {
        let dims = grid.coarsened(l)?;
        let step = 1usize << l;
        let mesh = grid_mesh(
            dims,
            |i, j| benchmark.positions[grid.index(i * step, j * step)],
            |i, j| benchmark.fixed[grid.index(i * step, j * step)],
        );
        let mut graph = build_graph_from_mesh(&mesh)?;
        graph.node_features = Matrix::zeros(mesh.num_nodes(), 0);
        graph.edge_features = rest_features(&mesh.positions, &mesh.positions, &graph.edges)?;
        out.push(HierarchyLevel {
            grid: dims,
            positions: mesh.positions,
            graph,
        });
    }
    Ok(GraphHierarchy {
        levels: out,
        cross_edges: Vec::new(),
    })
}

impl GraphHierarchy {
    /// Number of coarse levels.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.positions.len()).collect()
    }

    /// Builds all cross-graph edge sets from benchmark geometry.
    pub fn connect(&mut self, k: usize) -> Result<()> {
        self.cross_edges = (0..self.depth())
            .map(|l| {
                connect_cross_graph_edges(&self.levels[l].positions, &self.levels[l + 1].positions, k)
            })
            .collect::<Result<_>>()?;
        Ok(())
    }
}
