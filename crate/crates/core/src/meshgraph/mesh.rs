use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Quadrilateral surface mesh with per-node clamp flags. Lengths in mm.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub positions: Vec<Point>,
    pub elements: Vec<[u32; 4]>,
    pub fixed: Vec<bool>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Checks index ranges, mask length and that every node belongs to an element.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.fixed.len() != n {
            return Err(Error::InvalidInput(format!(
                "fixed mask has {} entries for {n} nodes",
                self.fixed.len()
            )));
        }
        let mut used = vec![false; n];
        for (e, el) in self.elements.iter().enumerate() {
            for &v in el {
                let v = v as usize;
                if v >= n {
                    return Err(Error::InvalidInput(format!(
                        "element {e} references node {v} but the mesh has {n} nodes"
                    )));
                }
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInput(format!("node {v} belongs to no element")));
        }
        if self.positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite node position".into()));
        }
        Ok(())
    }
}

/// Node counts of a structured `nx x ny` grid; node `(i, j)` has index `i + nx * j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
}

impl GridDims {
    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Quad elements in counter-clockwise order, row by row.
    pub fn quads(&self) -> Vec<[u32; 4]> {
        let mut out = Vec::with_capacity((self.nx - 1) * (self.ny - 1));
        for j in 0..self.ny.saturating_sub(1) {
            for i in 0..self.nx.saturating_sub(1) {
                out.push([
                    self.index(i, j) as u32,
                    self.index(i + 1, j) as u32,
                    self.index(i + 1, j + 1) as u32,
                    self.index(i, j + 1) as u32,
                ]);
            }
        }
        out
    }

    /// Grid after keeping every `2^levels`-th node in each direction.
    pub fn coarsened(&self, levels: usize) -> Result<GridDims> {
        let step = 1usize << levels;
        let ok = |n: usize| n >= 2 && (n - 1) % step == 0 && (n - 1) / step >= 1;
        if !ok(self.nx) || !ok(self.ny) {
            return Err(Error::Config(format!(
                "grid {}x{} cannot be coarsened {levels} times: (n - 1) must be a positive multiple of {step} in both directions",
                self.nx, self.ny
            )));
        }
        Ok(GridDims {
            nx: (self.nx - 1) / step + 1,
            ny: (self.ny - 1) / step + 1,
        })
    }
}

/// Structured grid mesh from a position function `f(i, j)`.
pub fn grid_mesh(
    dims: GridDims,
    mut position: impl FnMut(usize, usize) -> Point,
    mut fixed: impl FnMut(usize, usize) -> bool,
) -> Mesh {
    let mut positions = Vec::with_capacity(dims.num_nodes());
    let mut mask = Vec::with_capacity(dims.num_nodes());
    for j in 0..dims.ny {
        for i in 0..dims.nx {
            positions.push(position(i, j));
            mask.push(fixed(i, j));
        }
    }
    Mesh {
        positions,
        elements: dims.quads(),
        fixed: mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_element_rejected() {
        let m = Mesh {
            positions: vec![[0.0; 3]; 3],
            elements: vec![[0, 1, 2, 3]],
            fixed: vec![false; 3],
        };
        assert!(matches!(m.validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn orphan_node_rejected() {
        let dims = GridDims { nx: 2, ny: 2 };
        let mut m = grid_mesh(dims, |i, j| [i as f64, j as f64, 0.0], |_, _| false);
        m.validate().unwrap();
        m.positions.push([5.0, 5.0, 0.0]);
        m.fixed.push(false);
        assert!(m.validate().is_err());
    }

    #[test]
    fn coarsening_arithmetic() {
        let d = GridDims { nx: 33, ny: 9 };
        assert_eq!(d.coarsened(3).unwrap(), GridDims { nx: 5, ny: 2 });
        assert!(GridDims { nx: 33, ny: 7 }.coarsened(3).is_err());
    }
}
