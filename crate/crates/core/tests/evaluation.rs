use std::fs;
use std::path::Path;

use proptest::prelude::*;
use regunet_core::evalcli::{evaluate, export_fields};
use regunet_core::meshgraph::{EdgeIndex, GraphSequence, Point};
use regunet_core::model::{displacements, GroundTruthStub, Predictor, StepSession};
use regunet_core::Result;

/// Predicts `gain` times the true increment plus a per-node offset.
struct Skewed {
    gain: f64,
    offset: f64,
}

struct SkewedSession {
    truth: Vec<Vec<Point>>,
    gain: f64,
    offset: f64,
}

impl StepSession for SkewedSession {
    fn step(&mut self, step: usize, _prev: &[Point], _curr: &[Point]) -> Result<Vec<Point>> {
        let (a, b) = (&self.truth[step], &self.truth[step + 1]);
        Ok(a.iter()
            .zip(b)
            .enumerate()
            .map(|(n, (x, y))| {
                let o = self.offset * (n as f64 + 1.0);
                [
                    self.gain * (y[0] - x[0]) + o,
                    self.gain * (y[1] - x[1]) - o,
                    self.gain * (y[2] - x[2]) + 0.5 * o,
                ]
            })
            .collect())
    }
}

impl Predictor for Skewed {
    fn start<'a>(&'a self, seq: &GraphSequence) -> Result<Box<dyn StepSession + 'a>> {
        Ok(Box::new(SkewedSession {
            truth: displacements(seq),
            gain: self.gain,
            offset: self.offset,
        }))
    }
}

fn sequence(n: usize, moves: &[f64]) -> GraphSequence {
    let t = moves.len() / (3 * n) + 1;
    let p0: Vec<Point> = (0..n).map(|i| [i as f64 * 7.5, (i % 3) as f64, 0.0]).collect();
    let mut positions = vec![p0.clone()];
    for s in 1..t {
        let prev: &Vec<Point> = &positions[s - 1];
        let next = (0..n)
            .map(|i| {
                if i == 0 {
                    p0[0]
                } else {
                    let m = &moves[3 * (n * (s - 1) + i)..];
                    [prev[i][0] + m[0], prev[i][1] + m[1], prev[i][2] + m[2]]
                }
            })
            .collect();
        positions.push(next);
    }
    let senders: Vec<u32> = (0..n as u32).collect();
    let receivers: Vec<u32> = (0..n as u32).map(|i| (i + 1) % n as u32).collect();
    let mut fixed = vec![false; n];
    fixed[0] = true;
    GraphSequence {
        positions,
        edges: EdgeIndex::new(senders, receivers).unwrap(),
        fixed,
    }
}

fn read_curve_from_fields(dir: &Path, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|s| {
            let text = fs::read_to_string(dir.join(format!("step_{s:03}.csv"))).unwrap();
            let mut lines = text.lines();
            let head: Vec<&str> = lines.next().unwrap().split(',').collect();
            let col = |name: &str| head.iter().position(|h| *h == name).unwrap();
            let idx = ["true_dx", "true_dy", "true_dz", "pred_dx", "pred_dy", "pred_dz"].map(col);
            let mut sum = 0.0;
            let mut n = 0;
            for l in lines {
                let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                let d = [c[idx[3]] - c[idx[0]], c[idx[4]] - c[idx[1]], c[idx[5]] - c[idx[2]]];
                sum += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                n += 1;
            }
            sum / n as f64
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exported_fields_reproduce_the_error_curve(
        n in 2usize..7,
        t in 2usize..6,
        seed_moves in proptest::collection::vec(-3.0f64..3.0, 3 * 6 * 5),
        gain in 0.0f64..2.0,
        offset in -0.1f64..0.1,
    ) {
        let seq = sequence(n, &seed_moves[..3 * n * (t - 1)]);
        let model = Skewed { gain, offset };
        let report = evaluate(&model, std::slice::from_ref(&seq)).unwrap();
        prop_assert_eq!(report.per_step.len(), t);
        prop_assert_eq!(report.per_step[0], 0.0);
        prop_assert!(report.per_step.iter().all(|e| *e >= 0.0));
        let dir = tempfile::tempdir().unwrap();
        export_fields(&model, &seq, dir.path()).unwrap();
        let curve = read_curve_from_fields(dir.path(), t);
        for (a, b) in curve.iter().zip(&report.per_step) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn stub_reports_are_exactly_zero(n in 2usize..7, t in 2usize..6,
        moves in proptest::collection::vec(-3.0f64..3.0, 3 * 6 * 5)) {
        // dyadic moves keep the stub's subtract-then-add exact
        let q: Vec<f64> = moves.iter().map(|m| (m * 1024.0).round() / 1024.0).collect();
        let seq = sequence(n, &q[..3 * n * (t - 1)]);
        let r = evaluate(&GroundTruthStub, &[seq.clone(), seq]).unwrap();
        prop_assert!(r.per_step.iter().all(|e| *e == 0.0));
        prop_assert_eq!(r.max_intrusion_error, 0.0);
    }
}
