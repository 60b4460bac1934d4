use crate::error::{Error, Result};
use crate::meshgraph::{
    compute_node_features, edge_features_from_displacement, GraphSequence, EDGE_FEATURES,
    NODE_FEATURES,
};
use crate::model::norm::STD_FLOOR;
use crate::model::{displacements, NormStats};

/// Running per-channel moments. Values are kept so the second pass runs
/// about the exact first-pass mean in the same order.
struct Channels {
    values: Vec<Vec<f64>>,
}

impl Channels {
    fn new(n: usize) -> Self {
        Channels {
            values: vec![Vec::new(); n],
        }
    }

    fn push_row(&mut self, row: &[f64]) {
        for (c, v) in row.iter().enumerate() {
            self.values[c].push(*v);
        }
    }

    fn mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        self.values
            .iter()
            .map(|v| {
                if v.is_empty() {
                    return (0.0, 1.0);
                }
                let first = v[0];
                if v.iter().all(|x| *x == first) {
                    return (first, STD_FLOOR);
                }
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (mean, var.sqrt().max(STD_FLOOR))
            })
            .unzip()
    }

    fn rms(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| {
                if v.is_empty() {
                    return 1.0;
                }
                let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
                ms.sqrt().max(STD_FLOOR)
            })
            .collect()
    }
}

/// Normalization statistics over every teacher-forced step of `train`.
///
/// Node and edge inputs get mean and standard deviation over all nodes or
/// edges; targets (per-step increments) get a zero-centred scale, the RMS
/// over free nodes, so that a zero network output decodes to zero motion.
/// A constant channel gets its exact value as mean and the floor as scale.
pub fn compute_norm_stats(train: &[GraphSequence]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::InvalidInput("no training samples for normalization".into()));
    }
    let mut nodes = Channels::new(NODE_FEATURES);
    let mut edges = Channels::new(EDGE_FEATURES);
    let mut targets = Channels::new(NODE_FEATURES);
    for seq in train {
        seq.validate()?;
        let u = displacements(seq);
        let init = seq.initial();
        for i in 0..u.len().saturating_sub(1) {
            let prev = &u[i.saturating_sub(1)];
            let xv = compute_node_features(prev, &u[i])?;
            for r in 0..xv.rows() {
                nodes.push_row(xv.row(r));
            }
            let xe = edge_features_from_displacement(init, &u[i], &seq.edges)?;
            for r in 0..xe.rows() {
                edges.push_row(xe.row(r));
            }
            for (n, (a, b)) in u[i + 1].iter().zip(&u[i]).enumerate() {
                if !seq.fixed[n] {
                    targets.push_row(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
                }
            }
        }
    }
    let (node_mean, node_std) = nodes.mean_std();
    let (edge_mean, edge_std) = edges.mean_std();
    let stats = NormStats {
        node_mean,
        node_std,
        edge_mean,
        edge_std,
        target_scale: targets.rms(),
    };
    stats.validate()?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Matrix;
    use crate::meshgraph::{EdgeIndex, Point};

    fn seq(positions: Vec<Vec<Point>>, fixed: Vec<bool>) -> GraphSequence {
        GraphSequence {
            positions,
            fixed,
            edges: EdgeIndex::new(vec![0, 1], vec![1, 0]).unwrap(),
        }
    }

    #[test]
    fn static_sequence_clamps_targets() {
        let p = vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let s = compute_norm_stats(&[seq(vec![p.clone(); 4], vec![false, false])]).unwrap();
        assert_eq!(s.target_scale, vec![STD_FLOOR; 3]);
        assert_eq!(s.node_mean, vec![0.0; 3]);
        // dx of the two edges is +3 and -3; |d| is the constant 3
        assert_eq!(s.edge_mean[0], 0.0);
        assert_eq!(s.edge_std[0], 3.0);
        assert_eq!((s.edge_mean[3], s.edge_std[3]), (3.0, STD_FLOOR));
        let mut m = Matrix::from_rows(&[[3.0, 0.0, 0.0, 3.0, 3.0, 0.0, 0.0, 3.0]]);
        s.normalize_edges(&mut m);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(0, 7), 0.0);
    }

    #[test]
    fn constant_non_dyadic_channel_normalizes_to_zero() {
        let p = vec![[0.0, 0.1, 0.0], [0.3, 0.1, 0.0]];
        let s = compute_norm_stats(&[seq(vec![p.clone(); 3], vec![false, false])]).unwrap();
        let mut m = Matrix::from_rows(&[[0.0, 0.0, 0.0, 0.3, 0.3, 0.0, 0.0, 0.3]]);
        s.normalize_edges(&mut m);
        assert_eq!(m.get(0, 3), 0.0);
    }

    #[test]
    fn targets_use_free_nodes_only() {
        let a = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let b = vec![[0.0, 0.0, 0.0], [1.0, 0.0, -2.0]];
        let s = compute_norm_stats(&[seq(vec![a, b], vec![true, false])]).unwrap();
        assert_eq!(s.target_scale, vec![STD_FLOOR, STD_FLOOR, 2.0]);
    }

    #[test]
    fn recomputation_is_bit_identical() {
        let a = vec![[0.0, 0.0, 0.0], [1.0, 0.5, 0.25]];
        let b = vec![[0.1, 0.0, 0.3], [1.0, 0.7, -2.0]];
        let c = vec![[0.2, -0.1, 0.1], [1.3, 0.7, -2.5]];
        let data = [seq(vec![a, b, c], vec![false, false])];
        assert_eq!(compute_norm_stats(&data).unwrap(), compute_norm_stats(&data).unwrap());
    }
}
