use std::collections::BTreeSet;
use std::sync::Arc;

use super::mesh::Mesh;
use crate::diffcore::Matrix;
use crate::error::{Error, Result};

/// Directed edges as parallel sender / receiver rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeIndex {
    pub senders: Arc<[u32]>,
    pub receivers: Arc<[u32]>,
}

impl EdgeIndex {
    pub fn new(senders: Vec<u32>, receivers: Vec<u32>) -> Result<Self> {
        if senders.len() != receivers.len() {
            return Err(Error::InvalidInput(format!(
                "edge index rows differ in length: {} vs {}",
                senders.len(),
                receivers.len()
            )));
        }
        Ok(EdgeIndex {
            senders: senders.into(),
            receivers: receivers.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.senders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senders.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.senders
            .iter()
            .zip(self.receivers.iter())
            .map(|(&s, &r)| (s as usize, r as usize))
    }

    /// Same edges with sender and receiver swapped, in the same order.
    pub fn reversed(&self) -> EdgeIndex {
        EdgeIndex {
            senders: self.receivers.clone(),
            receivers: self.senders.clone(),
        }
    }

    pub fn max_node(&self) -> Option<usize> {
        self.senders
            .iter()
            .chain(self.receivers.iter())
            .max()
            .map(|&v| v as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: EdgeIndex,
    pub node_features: Matrix,
    pub edge_features: Matrix,
}

/// Connects every pair of nodes sharing an element (both quad diagonals
/// included) with a pair of directed edges, sorted by `(sender, receiver)`.
/// Node and edge features are zero-filled with 3 and 8 channels.
pub fn build_graph_from_mesh(mesh: &Mesh) -> Result<Graph> {
    let n = mesh.num_nodes();
    let mut pairs = BTreeSet::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        for a in 0..4 {
            for b in a + 1..4 {
                let (u, v) = (el[a], el[b]);
                if u as usize >= n || v as usize >= n {
                    return Err(Error::InvalidInput(format!(
                        "element {e} references node {} but the mesh has {n} nodes",
                        u.max(v)
                    )));
                }
                if u == v {
                    return Err(Error::InvalidInput(format!(
                        "element {e} repeats node {u}"
                    )));
                }
                pairs.insert((u, v));
                pairs.insert((v, u));
            }
        }
    }
    let (senders, receivers): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
    let m = senders.len();
    Ok(Graph {
        num_nodes: n,
        edges: EdgeIndex::new(senders, receivers)?,
        node_features: Matrix::zeros(n, 3),
        edge_features: Matrix::zeros(m, 8),
    })
}
