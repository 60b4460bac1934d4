use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Param {
    name: String,
    value: Matrix,
    grad: Matrix,
    moment1: Matrix,
    moment2: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Named parameter tensors with paired gradient and Adam moment buffers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, ParamId>,
    step: u64,
}

pub(crate) const MOMENT1_SUFFIX: &str = "#adam_m";
pub(crate) const MOMENT2_SUFFIX: &str = "#adam_v";
pub(crate) const STEP_NAME: &str = "#adam_step";

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidInput(format!("duplicate parameter name {name:?}")));
        }
        if name.contains('#') {
            return Err(Error::InvalidInput(format!(
                "parameter name {name:?} uses the reserved character '#'"
            )));
        }
        let id = ParamId(self.params.len());
        let (r, c) = value.shape();
        self.params.push(Param {
            name: name.clone(),
            value,
            grad: Matrix::zeros(r, c),
            moment1: Matrix::zeros(r, c),
            moment2: Matrix::zeros(r, c),
        });
        self.index.insert(name, id);
        Ok(id)
    }

    /// Glorot-uniform weight of shape `fan_in x fan_out`.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ParamId> {
        let w = glorot_uniform(fan_in, fan_out, fan_in, fan_out, rng);
        self.add(name, w)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].grad
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Sets every parameter (weights, biases, norm gains) to zero.
    pub fn zero_values(&mut self) {
        for p in &mut self.params {
            p.value.fill(0.0);
        }
    }

    /// Adds uniform noise in `[-scale, scale)` to every entry. Moves a freshly
    /// initialized store (zero biases) off ReLU kinks before a gradient check.
    pub fn jitter(&mut self, scale: f64, rng: &mut ChaCha8Rng) {
        for p in &mut self.params {
            for v in p.value.as_mut_slice() {
                *v += rng.gen_range(-scale..scale);
            }
        }
    }

    pub fn accumulate(&mut self, grads: &ParamGrads) {
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            if let Some(g) = g {
                p.grad.add_assign(g);
            }
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.params.iter().all(|p| p.grad.is_finite())
    }

    pub fn scale_grads(&mut self, s: f64) {
        for p in &mut self.params {
            p.grad.scale(s);
        }
    }

    /// One Adam update with bias correction using the accumulated gradients.
    pub fn adam_step(&mut self, lr: f64, cfg: AdamConfig) {
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - cfg.beta1.powf(t);
        let c2 = 1.0 - cfg.beta2.powf(t);
        for p in &mut self.params {
            let w = p.value.as_mut_slice();
            let g = p.grad.as_slice();
            let m = p.moment1.as_mut_slice();
            let v = p.moment2.as_mut_slice();
            for i in 0..w.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                w[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }

    /// Parameters followed by optimizer moments and the step counter, as named tensors.
    pub fn to_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out: Vec<(String, Matrix)> = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect();
        for p in &self.params {
            out.push((format!("{}{MOMENT1_SUFFIX}", p.name), p.moment1.clone()));
            out.push((format!("{}{MOMENT2_SUFFIX}", p.name), p.moment2.clone()));
        }
        out.push((
            STEP_NAME.to_string(),
            Matrix::from_vec(1, 1, vec![self.step as f64]),
        ));
        out
    }

    /// Loads values and moments for every registered parameter from named tensors.
    pub fn load_tensors(&mut self, tensors: &BTreeMap<String, Matrix>) -> Result<()> {
        for p in &mut self.params {
            let load = |name: &str, dst: &mut Matrix| -> Result<()> {
                let src = tensors
                    .get(name)
                    .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {name:?}")))?;
                if src.shape() != dst.shape() {
                    return Err(Error::Config(format!(
                        "tensor {name:?} has shape {:?}, expected {:?}",
                        src.shape(),
                        dst.shape()
                    )));
                }
                *dst = src.clone();
                Ok(())
            };
            load(&p.name, &mut p.value)?;
            load(&format!("{}{MOMENT1_SUFFIX}", p.name), &mut p.moment1)?;
            load(&format!("{}{MOMENT2_SUFFIX}", p.name), &mut p.moment2)?;
        }
        let step = tensors
            .get(STEP_NAME)
            .ok_or_else(|| Error::Config("checkpoint lacks optimizer step counter".into()))?;
        self.step = step.get(0, 0) as u64;
        Ok(())
    }
}

/// Gradients for every parameter of a store; `None` where the parameter was unused.
#[derive(Clone, Debug, Default)]
pub struct ParamGrads(pub(crate) Vec<Option<Matrix>>);

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.0.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.0.iter_mut().flatten() {
            g.scale(s);
        }
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`, drawn row-major.
pub fn glorot_uniform(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(values: &[f64]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values
            .iter()
            .enumerate()
            .map(|(i, v)| s.add(format!("p{i}"), Matrix::filled(1, 1, *v)).unwrap())
            .collect();
        (s, ids)
    }

    fn set_grads(s: &mut ParamStore, g: &[f64]) {
        let grads = ParamGrads(g.iter().map(|v| Some(Matrix::filled(1, 1, *v))).collect());
        s.zero_grads();
        s.accumulate(&grads);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let (mut s, ids) = scalar_store(&[0.0]);
        set_grads(&mut s, &[5.0]);
        s.adam_step(0.1, AdamConfig::default());
        let w = s.value(ids[0]).get(0, 0);
        assert!((w + 0.1).abs() < 1e-7, "{w}");
    }

    #[test]
    fn adam_zero_gradient_keeps_value() {
        let (mut s, ids) = scalar_store(&[1.25]);
        set_grads(&mut s, &[0.0]);
        s.adam_step(0.1, AdamConfig::default());
        assert_eq!(s.value(ids[0]).get(0, 0), 1.25);
    }

    #[test]
    fn adam_first_step_scale_invariant() {
        let (mut s, ids) = scalar_store(&[0.0, 0.0]);
        set_grads(&mut s, &[0.3, 300.0]);
        s.adam_step(0.01, AdamConfig::default());
        let a = s.value(ids[0]).get(0, 0);
        let b = s.value(ids[1]).get(0, 0);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Matrix::zeros(1, 1)).unwrap();
        assert!(s.add("w", Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn glorot_is_seeded() {
        use rand::SeedableRng;
        let a = glorot_uniform(3, 4, 3, 4, &mut ChaCha8Rng::seed_from_u64(7));
        let b = glorot_uniform(3, 4, 3, 4, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        let lim = (6.0f64 / 7.0).sqrt();
        assert!(a.as_slice().iter().all(|v| v.abs() < lim));
    }
}
