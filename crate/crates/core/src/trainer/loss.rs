//! Teacher-forced sequence loss and its gradient through time.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::diffcore::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::meshgraph::GraphSequence;
use crate::model::{displacements, HiddenState, HiddenVars, Model, SampleContext, StepInputs};

/// Mean squared error over free rows, 3 channels and all steps:
/// `Σ (pred - true)^2 / (3 · N_free · steps)`.
pub fn mse_loss(pred: &[Matrix], truth: &[Matrix], fixed: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidInput(format!(
            "mse over {} predicted and {} true steps",
            pred.len(),
            truth.len()
        )));
    }
    let free = fixed.iter().filter(|f| !**f).count();
    if free == 0 {
        return Err(Error::InvalidInput("mse needs at least one free node".into()));
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.shape() != t.shape() || p.rows() != fixed.len() || p.cols() != 3 {
            return Err(Error::shape("mse_loss", "prediction, target and mask disagree"));
        }
        for r in (0..p.rows()).filter(|&r| !fixed[r]) {
            for (a, b) in p.row(r).iter().zip(t.row(r)) {
                acc += (a - b) * (a - b);
            }
        }
    }
    Ok(acc / (3 * free * pred.len()) as f64)
}

/// How gradients flow back through the hidden state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BpttMode {
    /// Full tape when it fits [`AUTO_TAPE_BYTES`], otherwise checkpointed.
    Auto,
    /// One tape over the whole sequence.
    Full,
    /// Per-step tapes; hidden states are stored on a forward pass and each
    /// step is re-recorded during the backward sweep.
    Checkpointed,
}

/// Activation budget of [`BpttMode::Auto`].
pub const AUTO_TAPE_BYTES: usize = 2 << 30;

impl fmt::Display for BpttMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BpttMode::Auto => "auto",
            BpttMode::Full => "full",
            BpttMode::Checkpointed => "checkpointed",
        })
    }
}

impl FromStr for BpttMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BpttMode::Auto),
            "full" => Ok(BpttMode::Full),
            "checkpointed" => Ok(BpttMode::Checkpointed),
            _ => Err(Error::Config(format!("unknown bptt mode {s:?}"))),
        }
    }
}

/// Ground-truth inputs and normalized targets of one sequence.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub name: String,
    pub ctx: SampleContext,
    pub inputs: Vec<StepInputs>,
    pub targets: Vec<Arc<Matrix>>,
    /// `1 / (3 · N_free · (T - 1))`.
    pub scale: f64,
}

impl PreparedSample {
    pub fn new(model: &Model, seq: &GraphSequence, name: impl Into<String>) -> Result<Self> {
        let ctx = model.context(seq)?;
        let steps = seq.num_steps().saturating_sub(1);
        if steps == 0 || ctx.num_free() == 0 {
            return Err(Error::InvalidInput(
                "training needs at least two snapshots and one free node".into(),
            ));
        }
        let u = displacements(seq);
        let mut inputs = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps);
        for i in 0..steps {
            inputs.push(model.step_inputs(&ctx, &u[i.saturating_sub(1)], &u[i])?);
            let d: Vec<[f64; 3]> = u[i + 1]
                .iter()
                .zip(&u[i])
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
                .collect();
            let mut t = Matrix::from_rows(&d);
            model.norm.normalize_targets(&mut t);
            targets.push(Arc::new(t));
        }
        let scale = 1.0 / (3 * ctx.num_free() * steps) as f64;
        Ok(PreparedSample {
            name: name.into(),
            ctx,
            inputs,
            targets,
            scale,
        })
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

fn step_loss(
    model: &Model,
    tape: &mut Tape<'_>,
    s: &PreparedSample,
    i: usize,
    hidden: HiddenVars,
) -> Result<(Var, HiddenVars)> {
    let consts = model.constants(tape, &s.ctx)?;
    let (y, next) = model.step(tape, &s.ctx, consts.as_ref(), &s.inputs[i], hidden)?;
    let l = tape.masked_squared_error(y, s.targets[i].clone(), s.ctx.free.clone(), s.scale)?;
    Ok((l, next))
}

/// Records the whole teacher-forced sequence loss on one tape.
pub fn record_sequence_loss(model: &Model, tape: &mut Tape<'_>, s: &PreparedSample) -> Result<Var> {
    let consts = model.constants(tape, &s.ctx)?;
    let mut hv = HiddenVars::default();
    let mut terms = Vec::with_capacity(s.steps());
    for i in 0..s.steps() {
        let (y, next) = model.step(tape, &s.ctx, consts.as_ref(), &s.inputs[i], hv)?;
        hv = next;
        terms.push(tape.masked_squared_error(y, s.targets[i].clone(), s.ctx.free.clone(), s.scale)?);
    }
    tape.sum(&terms)
}

/// Teacher-forced normalized MSE without gradients.
pub fn sequence_loss(model: &Model, s: &PreparedSample) -> Result<f64> {
    let mut hidden = HiddenState::default();
    let mut total = 0.0;
    for i in 0..s.steps() {
        let mut tape = Tape::new(&model.params);
        let hv = hidden.to_vars(&mut tape);
        let (l, next) = step_loss(model, &mut tape, s, i, hv)?;
        total += tape.scalar(l);
        hidden = HiddenState::from_vars(&tape, next);
    }
    Ok(total)
}

/// Activation elements of the first step, a proxy for tape memory.
pub fn step_activation_elements(model: &Model, s: &PreparedSample) -> Result<usize> {
    let mut tape = Tape::new(&model.params);
    step_loss(model, &mut tape, s, 0, HiddenVars::default())?;
    Ok(tape.activation_elements())
}

/// Resolves [`BpttMode::Auto`] for `model` on samples shaped like `s`.
pub fn resolve_bptt(mode: BpttMode, model: &Model, s: &PreparedSample) -> Result<BpttMode> {
    if mode != BpttMode::Auto {
        return Ok(mode);
    }
    if !model.variant.is_recurrent() {
        return Ok(BpttMode::Checkpointed);
    }
    let bytes = step_activation_elements(model, s)? * 8 * s.steps();
    Ok(if bytes <= AUTO_TAPE_BYTES {
        BpttMode::Full
    } else {
        BpttMode::Checkpointed
    })
}

/// Adds the gradient of the sequence loss to the model's gradient buffers
/// and returns the loss. All modes give the same gradient up to rounding.
pub fn accumulate_sequence_gradients(
    model: &mut Model,
    s: &PreparedSample,
    mode: BpttMode,
) -> Result<f64> {
    match resolve_bptt(mode, model, s)? {
        BpttMode::Full => {
            let (loss, grads) = {
                let mut tape = Tape::new(&model.params);
                let total = record_sequence_loss(model, &mut tape, s)?;
                let loss = tape.scalar(total);
                if !loss.is_finite() {
                    return Ok(loss);
                }
                (loss, tape.backward_scalar(total)?.params)
            };
            model.params.accumulate(&grads);
            Ok(loss)
        }
        _ => checkpointed(model, s),
    }
}

fn checkpointed(model: &mut Model, s: &PreparedSample) -> Result<f64> {
    let recurrent = model.variant.is_recurrent();
    // forward sweep: the hidden state entering each step
    let mut entering = Vec::with_capacity(s.steps());
    let mut loss = 0.0;
    if recurrent {
        let mut hidden = HiddenState::default();
        for i in 0..s.steps() {
            let mut tape = Tape::new(&model.params);
            let hv = hidden.to_vars(&mut tape);
            let (l, next) = step_loss(model, &mut tape, s, i, hv)?;
            loss += tape.scalar(l);
            entering.push(hidden);
            hidden = HiddenState::from_vars(&tape, next);
        }
        if !loss.is_finite() {
            return Ok(loss);
        }
    }
    // backward sweep, carrying dL/dH of the hidden state leaving the step
    let mut d_next = HiddenState::default();
    let mut total = 0.0;
    for i in (0..s.steps()).rev() {
        let grads = {
            let mut tape = Tape::new(&model.params);
            let h_in = entering.pop().unwrap_or_default();
            let hv = h_in.to_vars(&mut tape);
            let (l, next) = step_loss(model, &mut tape, s, i, hv)?;
            total += tape.scalar(l);
            let mut seeds = vec![(l, Matrix::filled(1, 1, 1.0))];
            for (v, g) in [(next.fine, d_next.fine.take()), (next.coarse, d_next.coarse.take())] {
                if let (Some(v), Some(g)) = (v, g) {
                    seeds.push((v, g));
                }
            }
            let grads = tape.backward(seeds)?;
            d_next = HiddenState {
                fine: hv.fine.and_then(|v| grads.leaf(v).cloned()),
                coarse: hv.coarse.and_then(|v| grads.leaf(v).cloned()),
            };
            grads.params
        };
        model.params.accumulate(&grads);
    }
    Ok(if recurrent { loss } else { total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_three_four_five() {
        let fixed = vec![true, false, false, false];
        let truth: Vec<Matrix> = (0..3).map(|_| Matrix::zeros(4, 3)).collect();
        let mut pred = truth.clone();
        pred[1].set(2, 0, 3.0);
        pred[1].set(2, 1, 4.0);
        // fixed rows are ignored entirely
        pred[0].set(0, 2, 100.0);
        let l = mse_loss(&pred, &truth, &fixed).unwrap();
        assert_eq!(l, 25.0 / (3.0 * 3.0 * 3.0));
        assert_eq!(mse_loss(&truth, &truth, &fixed).unwrap(), 0.0);
    }

    #[test]
    fn mse_rejects_mismatch() {
        let a = vec![Matrix::zeros(2, 3)];
        assert!(mse_loss(&a, &[], &[false, false]).is_err());
        assert!(mse_loss(&a, &a, &[true, true]).is_err());
        assert!(mse_loss(&a, &a, &[false]).is_err());
    }

    #[test]
    fn bptt_mode_text() {
        for m in [BpttMode::Auto, BpttMode::Full, BpttMode::Checkpointed] {
            assert_eq!(m.to_string().parse::<BpttMode>().unwrap(), m);
        }
        assert!("none".parse::<BpttMode>().is_err());
    }
}
