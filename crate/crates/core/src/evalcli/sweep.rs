//! Hyperparameter grid: one training run per point, shared seed.

use std::path::Path;

use super::metrics::error_accumulation;
use crate::config::KvConfig;
use crate::csvout::{float, Csv};
use crate::error::{Error, Result};
use crate::meshgraph::GraphSequence;
use crate::model::GUNetConfig;
use crate::synthdata::ScenarioConfig;
use crate::trainer::loss::step_activation_elements;
use crate::trainer::{train_sequences, PreparedSample, TrainConfig};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_HEADER: [&str; 8] = [
    "k",
    "coarse_steps",
    "fine_steps",
    "channels",
    "parameters",
    "final_val_error",
    "activation_elements",
    "seconds_per_epoch",
];

/// Values per axis; an empty axis keeps the base configuration's value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub coarse_steps: Vec<usize>,
    pub fine_steps: Vec<usize>,
    /// `C_0`; the rest of the schedule doubles per level.
    pub channels: Vec<usize>,
}

impl SweepGrid {
    /// Consumes `sweep_k`, `sweep_coarse_steps`, `sweep_fine_steps`, `sweep_channels`.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        for (key, dst) in [
            ("sweep_k", &mut self.k),
            ("sweep_coarse_steps", &mut self.coarse_steps),
            ("sweep_fine_steps", &mut self.fine_steps),
            ("sweep_channels", &mut self.channels),
        ] {
            if let Some(v) = kv.take_list(key)? {
                *dst = v;
            }
        }
        Ok(())
    }

    /// Model configurations in row-major order (k outermost, channels innermost).
    pub fn points(&self, base: &GUNetConfig) -> Vec<GUNetConfig> {
        let axis = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
        let mut out = Vec::new();
        for &k in &axis(&self.k, base.k) {
            for &pc in &axis(&self.coarse_steps, base.coarse_steps) {
                for &pf in &axis(&self.fine_steps, base.fine_steps) {
                    for &c in &axis(&self.channels, base.channels[0]) {
                        let mut m = base.clone();
                        m.k = k;
                        m.coarse_steps = pc;
                        m.fine_steps = pf;
                        if c != base.channels[0] {
                            m.channels = GUNetConfig::schedule(c, m.levels);
                        }
                        out.push(m);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub model: GUNetConfig,
    pub parameters: usize,
    pub final_val_error: f64,
    /// Tape elements of one teacher-forced sequence, a memory proxy.
    pub activation_elements: usize,
    /// Mean over epochs; 0 when wall time is not recorded.
    pub seconds_per_epoch: f64,
}

pub fn sweep(
    grid: &SweepGrid,
    base: &TrainConfig,
    train: &[(String, GraphSequence)],
    val: &[(String, GraphSequence)],
    scenario: &ScenarioConfig,
    progress: &mut dyn FnMut(usize, &SweepRow),
) -> Result<Vec<SweepRow>> {
    if val.is_empty() {
        return Err(Error::InvalidInput("sweep needs a validation split".into()));
    }
    let val_seqs: Vec<GraphSequence> = val.iter().map(|(_, s)| s.clone()).collect();
    let mut rows = Vec::new();
    for (i, m) in grid.points(&base.model).into_iter().enumerate() {
        let cfg = TrainConfig {
            model: m.clone(),
            ..base.clone()
        };
        let out = train_sequences(train, val, scenario, &cfg, None, &mut |_| {})?;
        let curve = error_accumulation(&out.model, &val_seqs)?;
        let probe = PreparedSample::new(&out.model, &train[0].1, &train[0].0)?;
        let row = SweepRow {
            model: m,
            parameters: out.model.params.num_scalars(),
            final_val_error: *curve.last().unwrap_or(&0.0),
            activation_elements: step_activation_elements(&out.model, &probe)? * probe.steps(),
            seconds_per_epoch: out.log.iter().map(|r| r.seconds).sum::<f64>() / out.log.len().max(1) as f64,
        };
        progress(i, &row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Csv> {
    let mut csv = Csv::new(&SWEEP_HEADER);
    for r in rows {
        csv.row(&[
            r.model.k.to_string(),
            r.model.coarse_steps.to_string(),
            r.model.fine_steps.to_string(),
            r.model.channels[0].to_string(),
            r.parameters.to_string(),
            float(r.final_val_error),
            r.activation_elements.to_string(),
            float(r.seconds_per_epoch),
        ])?;
    }
    Ok(csv)
}

/// Writes `sweep.csv` under `out_dir`.
pub fn write_sweep(rows: &[SweepRow], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    sweep_csv(rows)?.write(&out_dir.join(SWEEP_CSV))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_in_order() {
        let base = GUNetConfig::default();
        let g = SweepGrid {
            k: vec![3, 6],
            channels: vec![16, 32],
            ..Default::default()
        };
        let pts = g.points(&base);
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[0].k, pts[0].channels.clone()), (3, vec![16, 16, 32, 64]));
        assert_eq!((pts[3].k, pts[3].channels.clone()), (6, base.channels.clone()));
        assert!(pts.iter().all(|p| p.coarse_steps == base.coarse_steps));
        assert_eq!(SweepGrid::default().points(&base), vec![base]);
    }

    #[test]
    fn grid_from_config() {
        let mut kv = KvConfig::parse("sweep_k = 3, 6, 9, 12\nsweep_fine_steps = 1,2\n").unwrap();
        let mut g = SweepGrid::default();
        g.apply(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(g.k, vec![3, 6, 9, 12]);
        assert_eq!(g.fine_steps, vec![1, 2]);
        assert!(g.coarse_steps.is_empty());
    }
}
