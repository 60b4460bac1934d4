//! Explicit mass-spring impact simulator used as the ground-truth oracle.
//!
//! Every mesh edge is a linear spring with its initial length as rest
//! length, every free node carries a point mass and linear velocity damping,
//! and a rigid sphere moving along z pushes nodes out with a penalty force.
//! Integration is semi-implicit Euler in a fixed iteration order.

use super::geometry::quantize_point;
use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::meshgraph::features::{norm, sub};
use crate::meshgraph::{build_graph_from_mesh, GraphSequence, Mesh, Point};

/// Sequence plus the diagnostics used by physics sanity checks.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub sequence: GraphSequence,
    /// Total mechanical energy (J) at each snapshot.
    pub energy: Vec<f64>,
    /// Impactor centre z (mm) at each snapshot.
    pub impactor_z: Vec<f64>,
    /// Largest per-step mismatch `|I_nodes + I_impactor| / max(|I_nodes|, |I_impactor|)`
    /// between the z contact impulses on the plate and on the impactor.
    pub max_contact_imbalance: f64,
    /// Largest per-step z contact impulse on the impactor, kg·mm/ms.
    pub max_contact_impulse: f64,
}

struct Spring {
    a: usize,
    b: usize,
    rest: f64,
}

struct State<'a> {
    cfg: &'a ScenarioConfig,
    pos: Vec<Point>,
    vel: Vec<Point>,
    force: Vec<Point>,
    fixed: &'a [bool],
    springs: Vec<Spring>,
    center: Point,
    vz: f64,
    k_spring: f64,
    k_contact: f64,
    damping: f64,
}

impl State<'_> {
    /// Fills `force` and returns the z contact force on the impactor, the
    /// summed z contact force on the nodes.
    fn forces(&mut self) -> (f64, f64) {
        for f in &mut self.force {
            *f = [0.0; 3];
        }
        for s in &self.springs {
            let d = sub(&self.pos[s.b], &self.pos[s.a]);
            let len = norm(&d);
            if len > 0.0 {
                let m = self.k_spring * (len - s.rest) / len;
                for c in 0..3 {
                    self.force[s.a][c] += m * d[c];
                    self.force[s.b][c] -= m * d[c];
                }
            }
        }
        let r = self.cfg.impactor_radius;
        let mut on_impactor = 0.0;
        let mut on_nodes = 0.0;
        for (i, p) in self.pos.iter().enumerate() {
            let v = self.vel[i];
            for c in 0..3 {
                self.force[i][c] -= self.damping * v[c];
            }
            let d = sub(p, &self.center);
            let dist = norm(&d);
            if dist < r && dist > 0.0 {
                let m = self.k_contact * (r - dist) / dist;
                for c in 0..3 {
                    self.force[i][c] += m * d[c];
                }
                on_nodes += m * d[2];
                on_impactor -= m * d[2];
            }
        }
        (on_impactor, on_nodes)
    }

    fn energy(&self, node_mass: f64, impactor_mass: f64) -> f64 {
        let mut e = 0.5 * impactor_mass * self.vz * self.vz;
        for (v, &f) in self.vel.iter().zip(self.fixed) {
            if !f {
                e += 0.5 * node_mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            }
        }
        for s in &self.springs {
            let ext = norm(&sub(&self.pos[s.b], &self.pos[s.a])) - s.rest;
            e += 0.5 * self.k_spring * ext * ext;
        }
        let r = self.cfg.impactor_radius;
        for p in &self.pos {
            let pen = r - norm(&sub(p, &self.center));
            if pen > 0.0 {
                e += 0.5 * self.k_contact * pen * pen;
            }
        }
        e
    }
}

/// Impactor centre in zero-gap contact above the surface at the strike point.
pub fn initial_impactor_center(mesh: &Mesh, cfg: &ScenarioConfig) -> Result<Point> {
    let cx = cfg.impact_center_fraction * cfg.length;
    let cy = 0.5 * cfg.width;
    let r = cfg.impactor_radius;
    let mut best: Option<f64> = None;
    for p in &mesh.positions {
        let dh2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
        if dh2 < r * r {
            let z = p[2] + (r * r - dh2).sqrt();
            best = Some(best.map_or(z, |b: f64| b.max(z)));
        }
    }
    let Some(z) = best else {
        return Err(Error::Config(format!(
            "no node lies under the impactor footprint at ({cx}, {cy})"
        )));
    };
    Ok([cx, cy, z])
}

pub fn simulate_impact(mesh: &Mesh, cfg: &ScenarioConfig) -> Result<GraphSequence> {
    Ok(simulate_impact_traced(mesh, cfg)?.sequence)
}

/// Runs the oracle and records `snapshot_count` quantized snapshots.
pub fn simulate_impact_traced(mesh: &Mesh, cfg: &ScenarioConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    mesh.validate()?;
    let graph = build_graph_from_mesh(mesh)?;
    let springs = graph
        .edges
        .iter()
        .filter(|(s, r)| s < r)
        .map(|(a, b)| Spring {
            a,
            b,
            rest: norm(&sub(&mesh.positions[b], &mesh.positions[a])),
        })
        .collect();
    let n = mesh.num_nodes();
    let mut st = State {
        cfg,
        pos: mesh.positions.clone(),
        vel: vec![[0.0; 3]; n],
        force: vec![[0.0; 3]; n],
        fixed: &mesh.fixed,
        springs,
        center: initial_impactor_center(mesh, cfg)?,
        vz: -cfg.impact_speed,
        // N/mm -> kN/mm and N·ms/mm -> kg/ms
        k_spring: cfg.spring_stiffness * 1e-3,
        k_contact: cfg.contact_stiffness * 1e-3,
        damping: cfg.damping * 1e-3,
    };
    let (m, big_m, dt) = (cfg.node_mass, cfg.impactor_mass, cfg.dt);
    let every = cfg.steps_per_snapshot()?;
    let limit = 10.0 * cfg.length;

    let mut positions = Vec::with_capacity(cfg.snapshot_count);
    positions.push(mesh.positions.clone());
    let mut energy = vec![st.energy(m, big_m)];
    let mut impactor_z = vec![st.center[2]];
    let mut max_imbalance: f64 = 0.0;
    let mut max_impulse: f64 = 0.0;

    let total = every * (cfg.snapshot_count - 1);
    for step in 1..=total {
        let (on_imp, on_nodes) = st.forces();
        let (i_imp, i_nodes) = (on_imp * dt, on_nodes * dt);
        let scale = i_imp.abs().max(i_nodes.abs());
        if scale > 0.0 {
            max_imbalance = max_imbalance.max((i_imp + i_nodes).abs() / scale);
        }
        max_impulse = max_impulse.max(i_imp.abs());
        for i in 0..n {
            if st.fixed[i] {
                continue;
            }
            for c in 0..3 {
                st.vel[i][c] += dt * st.force[i][c] / m;
                st.pos[i][c] += dt * st.vel[i][c];
            }
        }
        if big_m > 0.0 {
            st.vz += dt * on_imp / big_m;
        }
        st.center[2] += dt * st.vz;

        let bad = st.pos.iter().flatten().any(|v| !(v.abs() <= limit))
            || !(st.center[2].abs() <= limit);
        if bad {
            return Err(Error::Diverged {
                step: step as u64,
                time_ms: step as f64 * dt,
            });
        }
        if step % every == 0 {
            let snap = st
                .pos
                .iter()
                .zip(&mesh.positions)
                .zip(&mesh.fixed)
                .map(|((p, p0), &f)| if f { *p0 } else { quantize_point(*p) })
                .collect();
            positions.push(snap);
            energy.push(st.energy(m, big_m));
            impactor_z.push(st.center[2]);
        }
    }

    Ok(SimulationTrace {
        sequence: GraphSequence {
            positions,
            edges: graph.edges,
            fixed: mesh.fixed.clone(),
        },
        energy,
        impactor_z,
        max_contact_imbalance: max_imbalance,
        max_contact_impulse: max_impulse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgraph::MorphParams;
    use crate::synthdata::geometry::{generate_benchmark_mesh, morph_geometry};

    fn run(cfg: &ScenarioConfig, morph: MorphParams) -> SimulationTrace {
        let m = generate_benchmark_mesh(cfg).unwrap();
        let m = morph_geometry(&m, morph, cfg).unwrap();
        simulate_impact_traced(&m, cfg).unwrap()
    }

    const FLAT: MorphParams = MorphParams { control_point: 0, amplitude: 0.0 };

    #[test]
    fn no_forcing_keeps_initial_state() {
        let cfg = ScenarioConfig {
            impactor_mass: 0.0,
            impact_speed: 0.0,
            ..Default::default()
        };
        let tr = run(&cfg, FLAT);
        assert_eq!(tr.sequence.num_steps(), 12);
        for snap in &tr.sequence.positions {
            assert_eq!(snap, &tr.sequence.positions[0]);
        }
    }

    #[test]
    fn energy_decreases_and_clamps_hold() {
        let cfg = ScenarioConfig::default();
        for morph in [FLAT, MorphParams { control_point: 2, amplitude: -2.4 }] {
            let tr = run(&cfg, morph);
            assert_eq!(tr.energy.len(), 12);
            for w in tr.energy.windows(2) {
                assert!(w[1] <= w[0], "energy rose: {:?}", tr.energy);
            }
            let p0 = &tr.sequence.positions[0];
            for snap in &tr.sequence.positions {
                for (n, &f) in tr.sequence.fixed.iter().enumerate() {
                    if f {
                        assert_eq!(snap[n], p0[n]);
                    }
                }
            }
            assert!(tr.max_contact_imbalance <= 1e-9);
            assert!(tr.max_contact_impulse > 0.0);
        }
    }

    #[test]
    fn impactor_starts_in_zero_gap_contact() {
        let cfg = ScenarioConfig::default();
        let m = generate_benchmark_mesh(&cfg).unwrap();
        let c = initial_impactor_center(&m, &cfg).unwrap();
        let closest = m
            .positions
            .iter()
            .map(|p| norm(&sub(p, &c)))
            .fold(f64::INFINITY, f64::min);
        assert!((closest - cfg.impactor_radius).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig::default();
        let a = run(&cfg, FLAT);
        let b = run(&cfg, FLAT);
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = ScenarioConfig {
            dt: 0.05,
            snapshot_interval: 1.5,
            ..Default::default()
        };
        match simulate_impact(&generate_benchmark_mesh(&cfg).unwrap(), &cfg) {
            Err(Error::Diverged { step, .. }) => assert!(step > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
