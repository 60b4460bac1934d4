//! Autoregressive error metrics.

use crate::error::{Error, Result};
use crate::meshgraph::{GraphSequence, Point};
use crate::model::{displacements, rollout, Predictor, Rollout, RolloutMode};

#[inline]
fn dist(a: &Point, b: &Point) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Per-step mean over nodes of the Euclidean distance between predicted and
/// true displacements (equivalently positions), mm.
pub fn sample_error_curve(truth: &[Vec<Point>], pred: &[Vec<Point>]) -> Result<Vec<f64>> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} true and {} predicted snapshots",
            truth.len(),
            pred.len()
        )));
    }
    truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            if t.len() != p.len() || t.is_empty() {
                return Err(Error::InvalidInput("snapshot node counts differ".into()));
            }
            Ok(t.iter().zip(p).map(|(a, b)| dist(a, b)).sum::<f64>() / t.len() as f64)
        })
        .collect()
}

/// Largest `|z|` displacement over nodes.
pub fn intrusion(disp: &[Point]) -> f64 {
    disp.iter().fold(0.0, |m, d| m.max(d[2].abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntrusionRecord {
    pub true_mm: f64,
    pub pred_mm: f64,
    /// `|pred - true| / |true|`; 0 when both vanish, infinite when only the truth does.
    pub relative_error: f64,
}

impl IntrusionRecord {
    pub fn new(true_mm: f64, pred_mm: f64) -> Self {
        let diff = (pred_mm - true_mm).abs();
        let relative_error = if diff == 0.0 {
            0.0
        } else if true_mm == 0.0 {
            f64::INFINITY
        } else {
            diff / true_mm.abs()
        };
        IntrusionRecord {
            true_mm,
            pred_mm,
            relative_error,
        }
    }
}

/// Autoregressive results over a split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Mean error per snapshot, averaged over samples with equal weight; entry 0 is 0.
    pub per_step: Vec<f64>,
    pub final_step: f64,
    pub intrusion: Vec<IntrusionRecord>,
    pub max_intrusion_error: f64,
    /// `per_node[sample][step][node]` Euclidean errors, mm.
    pub per_node: Vec<Vec<Vec<f64>>>,
}

/// One autoregressive rollout per sample.
pub fn rollouts(predictor: &dyn Predictor, samples: &[GraphSequence]) -> Result<Vec<Rollout>> {
    samples
        .iter()
        .map(|s| rollout(predictor, s, RolloutMode::Autoregressive))
        .collect()
}

pub fn report_from_rollouts(samples: &[GraphSequence], runs: &[Rollout]) -> Result<EvalReport> {
    if samples.is_empty() || samples.len() != runs.len() {
        return Err(Error::InvalidInput("evaluation needs one rollout per sample".into()));
    }
    let steps = samples[0].num_steps();
    let mut per_step = vec![0.0; steps];
    let mut intr = Vec::with_capacity(samples.len());
    let mut per_node = Vec::with_capacity(samples.len());
    for (seq, run) in samples.iter().zip(runs) {
        if seq.num_steps() != steps {
            return Err(Error::InvalidInput("samples differ in snapshot count".into()));
        }
        let truth = displacements(seq);
        let curve = sample_error_curve(&truth, &run.displacements)?;
        for (acc, e) in per_step.iter_mut().zip(&curve) {
            *acc += e;
        }
        per_node.push(
            truth
                .iter()
                .zip(&run.displacements)
                .map(|(t, p)| t.iter().zip(p).map(|(a, b)| dist(a, b)).collect())
                .collect(),
        );
        intr.push(IntrusionRecord::new(
            intrusion(&truth[steps - 1]),
            intrusion(&run.displacements[steps - 1]),
        ));
    }
    per_step.iter_mut().for_each(|v| *v /= samples.len() as f64);
    Ok(EvalReport {
        final_step: per_step[steps - 1],
        max_intrusion_error: intr.iter().fold(0.0, |m, r| m.max(r.relative_error)),
        per_step,
        intrusion: intr,
        per_node,
    })
}

pub fn evaluate(predictor: &dyn Predictor, samples: &[GraphSequence]) -> Result<EvalReport> {
    report_from_rollouts(samples, &rollouts(predictor, samples)?)
}

/// Mean autoregressive error per step over `samples`.
pub fn error_accumulation(predictor: &dyn Predictor, samples: &[GraphSequence]) -> Result<Vec<f64>> {
    Ok(evaluate(predictor, samples)?.per_step)
}

/// Per-sample intrusion errors and their maximum.
pub fn max_intrusion_error(
    predictor: &dyn Predictor,
    samples: &[GraphSequence],
) -> Result<(Vec<IntrusionRecord>, f64)> {
    let r = evaluate(predictor, samples)?;
    Ok((r.intrusion, r.max_intrusion_error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgraph::EdgeIndex;
    use crate::model::{GroundTruthStub, StepSession, ZeroPredictor};

    fn seq() -> GraphSequence {
        let p0 = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let p1 = vec![[0.0, 0.0, 0.0], [1.0, 0.0, -0.5], [0.0, 1.0, -0.25]];
        let p2 = vec![[0.0, 0.0, 0.0], [1.0, 0.0, -1.5], [0.0, 1.0, -0.75]];
        GraphSequence {
            positions: vec![p0, p1, p2],
            edges: EdgeIndex::new(vec![0, 1, 2], vec![1, 2, 0]).unwrap(),
            fixed: vec![true, false, false],
        }
    }

    #[test]
    fn stub_is_exact() {
        let r = evaluate(&GroundTruthStub, &[seq(), seq()]).unwrap();
        assert_eq!(r.per_step, vec![0.0; 3]);
        assert!(r.intrusion.iter().all(|i| i.relative_error == 0.0));
        assert_eq!(r.max_intrusion_error, 0.0);
    }

    #[test]
    fn zero_model_curve_is_mean_displacement() {
        let s = seq();
        let r = evaluate(&ZeroPredictor, &[s]).unwrap();
        assert_eq!(r.per_step, vec![0.0, 0.75 / 3.0, 2.25 / 3.0]);
        assert_eq!(r.intrusion[0], IntrusionRecord::new(1.5, 0.0));
        assert_eq!(r.intrusion[0].relative_error, 1.0);
    }

    #[test]
    fn three_four_five() {
        let t = vec![vec![[0.0; 3]], vec![[1.0, 1.0, 1.0]]];
        let p = vec![vec![[0.0; 3]], vec![[4.0, 5.0, 1.0]]];
        assert_eq!(sample_error_curve(&t, &p).unwrap(), vec![0.0, 5.0]);
    }

    struct Half;
    struct HalfSession(Vec<Vec<Point>>);
    impl StepSession for HalfSession {
        fn step(&mut self, step: usize, _prev: &[Point], _curr: &[Point]) -> Result<Vec<Point>> {
            let (a, b) = (&self.0[step], &self.0[step + 1]);
            Ok(a.iter().zip(b).map(|(x, y)| [0.0, 0.0, 0.5 * (y[2] - x[2])]).collect())
        }
    }
    impl Predictor for Half {
        fn start<'a>(&'a self, seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>> {
            Ok(Box::new(HalfSession(displacements(seq))))
        }
    }

    #[test]
    fn half_displacement_is_fifty_percent() {
        let (recs, max) = max_intrusion_error(&Half, &[seq()]).unwrap();
        assert_eq!(recs[0].pred_mm, 0.75);
        assert_eq!(recs[0].relative_error, 0.5);
        assert_eq!(max, 0.5);
    }

    #[test]
    fn equal_weighting_across_samples() {
        let mut big = seq();
        for p in &mut big.positions[2] {
            p[2] *= 2.0;
        }
        let a = evaluate(&ZeroPredictor, &[seq()]).unwrap().per_step[2];
        let b = evaluate(&ZeroPredictor, &[big.clone()]).unwrap().per_step[2];
        let both = evaluate(&ZeroPredictor, &[seq(), big]).unwrap().per_step[2];
        assert_eq!(both, (a + b) / 2.0);
    }
}
