//! Per-step displacement fields for external contour plotting.

use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{intrusion, report_from_rollouts};
use crate::csvout::{float, Csv};
use crate::error::{Error, Result};
use crate::meshgraph::GraphSequence;
use crate::model::{displacements, rollout, Predictor, RolloutMode};

pub const FIELD_HEADER: [&str; 10] = [
    "node", "true_dz", "pred_dz", "diff_dz", "true_dx", "pred_dx", "true_dy", "pred_dy", "error", "fixed",
];
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 5] = ["step", "mean_error", "max_abs_diff_dz", "true_intrusion", "pred_intrusion"];

pub fn field_file_name(step: usize) -> String {
    format!("step_{step:03}.csv")
}

/// Writes one CSV per snapshot (`step_000.csv` ...) and `summary.csv` under
/// `out_dir`. Returns the per-step paths.
pub fn export_fields(predictor: &dyn Predictor, seq: &GraphSequence, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let run = rollout(predictor, seq, RolloutMode::Autoregressive)?;
    let report = report_from_rollouts(std::slice::from_ref(seq), std::slice::from_ref(&run))?;
    let truth = displacements(seq);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summary = Csv::new(&SUMMARY_HEADER);
    let mut paths = Vec::with_capacity(truth.len());
    for (step, (t, p)) in truth.iter().zip(&run.displacements).enumerate() {
        let mut csv = Csv::new(&FIELD_HEADER);
        let mut max_diff = 0.0f64;
        for (node, (a, b)) in t.iter().zip(p).enumerate() {
            let diff = b[2] - a[2];
            max_diff = max_diff.max(diff.abs());
            csv.row(&[
                node.to_string(),
                float(a[2]),
                float(b[2]),
                float(diff),
                float(a[0]),
                float(b[0]),
                float(a[1]),
                float(b[1]),
                float(report.per_node[0][step][node]),
                u8::from(seq.fixed[node]).to_string(),
            ])?;
        }
        let path = out_dir.join(field_file_name(step));
        csv.write(&path)?;
        paths.push(path);
        summary.row(&[
            step.to_string(),
            float(report.per_step[step]),
            float(max_diff),
            float(intrusion(t)),
            float(intrusion(p)),
        ])?;
    }
    summary.write(&out_dir.join(SUMMARY_FILE))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroundTruthStub, ZeroPredictor};
    use crate::synthdata::{generate_split, split_seeds, DatasetSpec, PerSplit, ScenarioConfig, Split};

    fn sample() -> GraphSequence {
        let spec = DatasetSpec {
            scenario: ScenarioConfig {
                grid_nx: 9,
                grid_ny: 5,
                levels: 2,
                snapshot_count: 4,
                ..Default::default()
            },
            counts: PerSplit { train: 1, val: 0, test: 0 },
            seeds: split_seeds(7),
        };
        generate_split(&spec, Split::Train).unwrap().remove(0).sequence
    }

    fn column(path: &Path, name: &str) -> Vec<f64> {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
        lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
    }

    #[test]
    fn stub_differences_vanish() {
        let dir = tempfile::tempdir().unwrap();
        let seq = sample();
        let paths = export_fields(&GroundTruthStub, &seq, dir.path()).unwrap();
        assert_eq!(paths.len(), seq.num_steps());
        for p in &paths {
            assert!(column(p, "diff_dz").iter().all(|d| *d == 0.0));
        }
        assert!(column(&dir.path().join(SUMMARY_FILE), "mean_error").iter().all(|e| *e == 0.0));
    }

    #[test]
    fn final_z_error_recomputes_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let seq = sample();
        let paths = export_fields(&ZeroPredictor, &seq, dir.path()).unwrap();
        let last = paths.last().unwrap();
        let from_file: f64 = column(last, "diff_dz").iter().map(|d| d * d).sum();
        let truth = displacements(&seq);
        let direct: f64 = truth.last().unwrap().iter().map(|u| u[2] * u[2]).sum();
        assert!((from_file - direct).abs() <= 1e-12 * direct.max(1.0));
        assert!(direct > 0.0);
    }
}
