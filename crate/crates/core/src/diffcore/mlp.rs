use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub layers: usize,
    pub layer_norm: bool,
}

impl MlpSpec {
    /// Four affine layers with ReLU in between, as used throughout the model.
    pub fn standard(input: usize, hidden: usize, output: usize, layer_norm: bool) -> Self {
        MlpSpec {
            input,
            hidden,
            output,
            layers: 4,
            layer_norm,
        }
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        for l in 0..self.layers {
            let fi = if l == 0 { self.input } else { self.hidden };
            let fo = if l + 1 == self.layers { self.output } else { self.hidden };
            n += fi * fo + fo;
        }
        if self.layer_norm {
            n += 2 * self.output;
        }
        n
    }
}

/// One block of the first layer's input, occupying consecutive weight rows.
pub enum MlpInput {
    /// Rows used as-is.
    Rows(Var),
    /// `x[idx[i]]` for each output row; the product is formed on `x` before gathering.
    Gathered(Var, Arc<[u32]>),
    /// An all-zero block of the given width (its weight rows receive no gradient).
    Zero(usize),
}

/// Multi-layer perceptron with parameters registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Mlp {
    pub spec: MlpSpec,
    layers: Vec<(ParamId, ParamId)>,
    norm: Option<(ParamId, ParamId)>,
}

impl Mlp {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        spec: MlpSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if spec.layers == 0 {
            return Err(Error::Config(format!("{prefix}: MLP needs at least one layer")));
        }
        let mut layers = Vec::with_capacity(spec.layers);
        for l in 0..spec.layers {
            let fi = if l == 0 { spec.input } else { spec.hidden };
            let fo = if l + 1 == spec.layers { spec.output } else { spec.hidden };
            let w = store.add_glorot(format!("{prefix}.l{l}.w"), fi, fo, rng)?;
            let b = store.add(format!("{prefix}.l{l}.b"), Matrix::zeros(1, fo))?;
            layers.push((w, b));
        }
        let norm = if spec.layer_norm {
            let g = store.add(format!("{prefix}.ln.gain"), Matrix::filled(1, spec.output, 1.0))?;
            let b = store.add(format!("{prefix}.ln.shift"), Matrix::zeros(1, spec.output))?;
            Some((g, b))
        } else {
            None
        };
        Ok(Mlp { spec, layers, norm })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.forward_parts(tape, &[MlpInput::Rows(x)])
    }

    /// Forward pass on the column-wise concatenation of `parts`, without
    /// materializing the concatenation.
    pub fn forward_parts(&self, tape: &mut Tape<'_>, parts: &[MlpInput]) -> Result<Var> {
        let (w0, b0) = self.layers[0];
        let mut offset = 0;
        let mut terms = Vec::with_capacity(parts.len());
        for part in parts {
            match part {
                MlpInput::Rows(x) => {
                    let width = tape.value(*x).cols();
                    let bias = terms.is_empty().then_some(b0);
                    terms.push(tape.linear(*x, w0, bias, offset)?);
                    offset += width;
                }
                MlpInput::Gathered(x, idx) => {
                    let width = tape.value(*x).cols();
                    let bias = terms.is_empty().then_some(b0);
                    let y = tape.linear(*x, w0, bias, offset)?;
                    terms.push(tape.gather_rows(y, idx.clone())?);
                    offset += width;
                }
                MlpInput::Zero(width) => offset += width,
            }
        }
        if offset != self.spec.input {
            return Err(Error::shape(
                "mlp",
                format!("input width {offset}, expected {}", self.spec.input),
            ));
        }
        let mut h = match terms.len() {
            0 => return Err(Error::shape("mlp", "no non-zero input blocks")),
            1 => terms[0],
            _ => tape.sum(&terms)?,
        };
        for &(w, b) in &self.layers[1..] {
            h = tape.relu(h);
            h = tape.linear(h, w, Some(b), 0)?;
        }
        if let Some((g, s)) = self.norm {
            h = tape.layer_norm(h, g, s, LAYER_NORM_EPS)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    #[test]
    fn zero_weights_give_zero_output() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::register(&mut s, "m", MlpSpec::standard(3, 8, 2, false), &mut rng).unwrap();
        s.zero_values();
        let mut t = Tape::new(&s);
        let x = t.leaf(Matrix::from_rows(&[[1.0, -4.0, 2.0], [9.0, 9.0, 9.0]]));
        let y = mlp.forward(&mut t, x).unwrap();
        assert!(t.value(y).as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn split_input_equals_concatenation() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::register(&mut s, "m", MlpSpec::standard(5, 6, 4, true), &mut rng).unwrap();
        let nodes = Matrix::from_vec(3, 2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let edges = Matrix::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let idx: Arc<[u32]> = vec![2, 0, 1, 2].into();
        let mut t = Tape::new(&s);
        let xn = t.leaf(nodes);
        let xe = t.leaf(edges);
        let split = mlp
            .forward_parts(&mut t, &[MlpInput::Gathered(xn, idx.clone()), MlpInput::Rows(xe)])
            .unwrap();
        let g = t.gather_rows(xn, idx).unwrap();
        let cat = t.concat_cols(&[g, xe]).unwrap();
        let full = mlp.forward(&mut t, cat).unwrap();
        assert!(t.value(split).max_abs_diff(t.value(full)) < 1e-14);
    }

    #[test]
    fn param_count_matches_spec() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = MlpSpec::standard(7, 5, 3, true);
        Mlp::register(&mut s, "m", spec, &mut rng).unwrap();
        assert_eq!(s.num_scalars(), spec.num_params());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::diffcore::gradcheck::{finite_difference_check, GradCheckOptions};
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::register(&mut s, "m", MlpSpec::standard(5, 6, 4, true), &mut rng).unwrap();
        let nodes = Matrix::from_vec(3, 2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let edges = Matrix::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let target = Arc::new(Matrix::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()));
        let idx: Arc<[u32]> = vec![2, 0, 1, 2].into();
        s.jitter(0.1, &mut rng);
        let report = finite_difference_check(&mut s, GradCheckOptions::default(), |t| {
            let xn = t.leaf(nodes.clone());
            let xe = t.leaf(edges.clone());
            let y = mlp.forward_parts(t, &[MlpInput::Gathered(xn, idx.clone()), MlpInput::Rows(xe)])?;
            t.masked_squared_error(y, target.clone(), vec![true; 4].into(), 1.0)
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
