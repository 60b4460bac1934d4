//! Central finite-difference validation of reverse-mode gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Perturbation size for `(f(θ+h) - f(θ-h)) / 2h`.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator; keeps gradients that are
    /// zero in exact arithmetic from dividing rounding noise by ~0.
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            tolerance: 1e-5,
            abs_floor: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub entries_checked: usize,
    pub max_relative_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` at the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Compares the reverse-mode gradient of a scalar function of `params` with
/// central differences on every parameter entry.
///
/// `forward` records the function on the given tape and returns its `1 x 1` output.
pub fn finite_difference_check<F>(
    params: &mut ParamStore,
    opts: GradCheckOptions,
    mut forward: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<'_>) -> Result<Var>,
{
    let grads = {
        let mut tape = Tape::new(params);
        let out = forward(&mut tape)?;
        tape.backward_scalar(out)?.params
    };
    let mut eval = |params: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(params);
        let out = forward(&mut tape)?;
        let v = tape.scalar(out);
        if !v.is_finite() {
            return Err(Error::NonFinite("loss during finite-difference check".into()));
        }
        Ok(v)
    };

    let mut report = GradCheckReport {
        entries_checked: 0,
        max_relative_error: 0.0,
        worst: None,
        tolerance: opts.tolerance,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for i in 0..params.value(id).len() {
            let orig = params.value(id).as_slice()[i];
            params.value_mut(id).as_mut_slice()[i] = orig + opts.step;
            let plus = eval(params);
            params.value_mut(id).as_mut_slice()[i] = orig - opts.step;
            let minus = eval(params);
            params.value_mut(id).as_mut_slice()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let analytic = grads.get(id).map_or(0.0, |g| g.as_slice()[i]);
            let denom = analytic.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel = (analytic - numeric).abs() / denom;
            report.entries_checked += 1;
            if report.worst.is_none() || rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = Some((params.name(id).to_string(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
