//! Sequence rollouts in teacher-forced or autoregressive mode.
//!
//! Positions are tracked as cumulative displacements from the initial
//! state; inputs at step `i` are built from the displacements of snapshots
//! `i - 1` and `i` (the step before the first one repeats snapshot 0).

use super::graphs::SampleContext;
use super::network::{HiddenState, Model};
use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::meshgraph::{GraphSequence, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutMode {
    TeacherForced,
    Autoregressive,
}

/// Something that predicts per-node increments one step at a time.
pub trait Predictor {
    /// Starts a fresh sequence (memory reset to zero).
    fn start<'a>(&'a self, seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>>;
}

pub trait StepSession {
    /// Increments for step `step` (snapshot `step` to `step + 1`), given the
    /// cumulative displacements of the previous and current snapshots.
    fn step(&mut self, step: usize, prev: &[Point], curr: &[Point]) -> Result<Vec<Point>>;
}

/// Result of a rollout: `T` position snapshots (snapshot 0 given), their
/// displacements from snapshot 0 and the `T - 1` increments.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub positions: Vec<Vec<Point>>,
    pub displacements: Vec<Vec<Point>>,
    pub increments: Vec<Vec<Point>>,
}

pub fn displacements(seq: &GraphSequence) -> Vec<Vec<Point>> {
    let init = seq.initial();
    seq.positions
        .iter()
        .map(|snap| {
            snap.iter()
                .zip(init)
                .map(|(p, q)| [p[0] - q[0], p[1] - q[1], p[2] - q[2]])
                .collect()
        })
        .collect()
}

pub fn rollout(predictor: &dyn Predictor, seq: &GraphSequence, mode: RolloutMode) -> Result<Rollout> {
    seq.validate()?;
    let truth = displacements(seq);
    let t = seq.num_steps();
    let n = seq.num_nodes();
    let mut session = predictor.start(seq)?;
    let mut disp: Vec<Vec<Point>> = vec![truth[0].clone()];
    let mut increments = Vec::with_capacity(t.saturating_sub(1));
    for i in 0..t.saturating_sub(1) {
        let (prev, curr) = match mode {
            RolloutMode::TeacherForced => (&truth[i.saturating_sub(1)], &truth[i]),
            RolloutMode::Autoregressive => (&disp[i.saturating_sub(1)], &disp[i]),
        };
        let inc = session.step(i, prev, curr)?;
        if inc.len() != n {
            return Err(Error::shape("rollout", "predictor returned wrong node count"));
        }
        let base = match mode {
            RolloutMode::TeacherForced => &truth[i],
            RolloutMode::Autoregressive => &disp[i],
        };
        let next = base
            .iter()
            .zip(&inc)
            .map(|(u, d)| [u[0] + d[0], u[1] + d[1], u[2] + d[2]])
            .collect();
        disp.push(next);
        increments.push(inc);
    }
    let init = seq.initial();
    let positions = disp
        .iter()
        .map(|u| {
            u.iter()
                .zip(init)
                .map(|(d, p)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
                .collect()
        })
        .collect();
    Ok(Rollout {
        positions,
        displacements: disp,
        increments,
    })
}

struct ModelSession<'a> {
    model: &'a Model,
    ctx: SampleContext,
    hidden: HiddenState,
}

impl StepSession for ModelSession<'_> {
    fn step(&mut self, _step: usize, prev: &[Point], curr: &[Point]) -> Result<Vec<Point>> {
        let inputs = self.model.step_inputs(&self.ctx, prev, curr)?;
        let out = self.model.predict_step(&self.ctx, &inputs, &mut self.hidden)?;
        Ok(matrix_to_points(&out))
    }
}

impl Predictor for Model {
    fn start<'a>(&'a self, seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>> {
        Ok(Box::new(ModelSession {
            model: self,
            ctx: self.context(seq)?,
            hidden: HiddenState::default(),
        }))
    }
}

pub(crate) fn matrix_to_points(m: &Matrix) -> Vec<Point> {
    (0..m.rows()).map(|r| [m.get(r, 0), m.get(r, 1), m.get(r, 2)]).collect()
}

/// Returns the true increments of the sequence it was started on, whatever
/// the inputs. Its autoregressive rollout therefore reproduces ground truth.
#[derive(Clone, Copy, Debug, Default)]
pub struct GroundTruthStub;

struct StubSession {
    truth: Vec<Vec<Point>>,
}

impl StepSession for StubSession {
    fn step(&mut self, step: usize, _prev: &[Point], curr: &[Point]) -> Result<Vec<Point>> {
        // exact for dyadic-grid data, where the subtraction and the rollout's
        // re-addition are both exact
        Ok(self.truth[step + 1]
            .iter()
            .zip(curr)
            .map(|(b, c)| [b[0] - c[0], b[1] - c[1], b[2] - c[2]])
            .collect())
    }
}

impl Predictor for GroundTruthStub {
    fn start<'a>(&'a self, seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>> {
        Ok(Box::new(StubSession {
            truth: displacements(seq),
        }))
    }
}

/// Predicts zero increments everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPredictor;

struct ZeroSession;

impl StepSession for ZeroSession {
    fn step(&mut self, _step: usize, _prev: &[Point], curr: &[Point]) -> Result<Vec<Point>> {
        Ok(vec![[0.0; 3]; curr.len()])
    }
}

impl Predictor for ZeroPredictor {
    fn start<'a>(&'a self, _seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>> {
        Ok(Box::new(ZeroSession))
    }
}
