use std::collections::BTreeMap;

use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::meshgraph::{EDGE_FEATURES, NODE_FEATURES};

/// Standard deviations below this are clamped.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel input statistics and target scales.
///
/// Inputs are standardized; targets are only divided by their per-channel
/// RMS so that a zero network output decodes to a zero increment.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub edge_mean: Vec<f64>,
    pub edge_std: Vec<f64>,
    pub target_scale: Vec<f64>,
}

impl Default for NormStats {
    fn default() -> Self {
        NormStats {
            node_mean: vec![0.0; NODE_FEATURES],
            node_std: vec![1.0; NODE_FEATURES],
            edge_mean: vec![0.0; EDGE_FEATURES],
            edge_std: vec![1.0; EDGE_FEATURES],
            target_scale: vec![1.0; NODE_FEATURES],
        }
    }
}

fn standardize(m: &mut Matrix, mean: &[f64], std: &[f64]) {
    for r in 0..m.rows() {
        for (c, v) in m.row_mut(r).iter_mut().enumerate() {
            *v = (*v - mean[c]) / std[c];
        }
    }
}

impl NormStats {
    pub fn normalize_nodes(&self, m: &mut Matrix) {
        standardize(m, &self.node_mean, &self.node_std);
    }

    pub fn normalize_edges(&self, m: &mut Matrix) {
        standardize(m, &self.edge_mean, &self.edge_std);
    }

    pub fn normalize_targets(&self, m: &mut Matrix) {
        standardize(m, &[0.0; NODE_FEATURES], &self.target_scale);
    }

    pub fn denormalize_targets(&self, m: &mut Matrix) {
        for r in 0..m.rows() {
            for (c, v) in m.row_mut(r).iter_mut().enumerate() {
                *v *= self.target_scale[c];
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64], n: usize, positive: bool| {
            v.len() == n && v.iter().all(|x| x.is_finite() && (!positive || *x >= STD_FLOOR))
        };
        if ok(&self.node_mean, NODE_FEATURES, false)
            && ok(&self.node_std, NODE_FEATURES, true)
            && ok(&self.edge_mean, EDGE_FEATURES, false)
            && ok(&self.edge_std, EDGE_FEATURES, true)
            && ok(&self.target_scale, NODE_FEATURES, true)
        {
            Ok(())
        } else {
            Err(Error::InvalidInput("malformed normalization statistics".into()))
        }
    }

    pub(crate) fn to_tensors(&self) -> Vec<(String, Matrix)> {
        let row = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec());
        vec![
            ("__norm.node_mean".into(), row(&self.node_mean)),
            ("__norm.node_std".into(), row(&self.node_std)),
            ("__norm.edge_mean".into(), row(&self.edge_mean)),
            ("__norm.edge_std".into(), row(&self.edge_std)),
            ("__norm.target_scale".into(), row(&self.target_scale)),
        ]
    }

    pub(crate) fn from_tensors(t: &BTreeMap<String, Matrix>) -> Result<Self> {
        let get = |k: &str| -> Result<Vec<f64>> {
            t.get(k)
                .map(|m| m.as_slice().to_vec())
                .ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks {k}")))
        };
        let s = NormStats {
            node_mean: get("__norm.node_mean")?,
            node_std: get("__norm.node_std")?,
            edge_mean: get("__norm.edge_mean")?,
            edge_std: get("__norm.edge_std")?,
            target_scale: get("__norm.target_scale")?,
        };
        s.validate()?;
        Ok(s)
    }
}
