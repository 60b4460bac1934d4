use crate::config::{render, KvConfig};
use crate::error::{Error, Result};
use crate::meshgraph::GridDims;

/// Geometry, material and loading constants of the synthetic impact case.
///
/// Units: mm, ms, kg. Stiffnesses are given in N/mm and damping in
/// N·ms/mm (= g/ms); the simulator converts them to kN-based units so that
/// energies come out in J.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub length: f64,
    pub width: f64,
    pub arch_height: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Coarse levels the grid must support (each halves the node spacing count).
    pub levels: usize,
    /// kg per node.
    pub node_mass: f64,
    /// N/mm per edge spring.
    pub spring_stiffness: f64,
    /// N·ms/mm per node.
    pub damping: f64,
    /// N/mm penetration stiffness.
    pub contact_stiffness: f64,
    pub impactor_radius: f64,
    /// kg; 0 makes the impactor kinematic (constant velocity).
    pub impactor_mass: f64,
    /// mm/ms, directed along -z.
    pub impact_speed: f64,
    pub impact_center_fraction: f64,
    /// ms.
    pub dt: f64,
    /// ms between snapshots.
    pub snapshot_interval: f64,
    pub snapshot_count: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            length: 350.0,
            width: 90.0,
            arch_height: 30.0,
            grid_nx: 33,
            grid_ny: 9,
            levels: 3,
            node_mass: 0.005,
            spring_stiffness: 2000.0,
            damping: 400.0,
            contact_stiffness: 50_000.0,
            impactor_radius: 20.0,
            impactor_mass: 100.0,
            impact_speed: 4.0,
            impact_center_fraction: 0.3,
            dt: 1e-3,
            snapshot_interval: 1.5,
            snapshot_count: 12,
        }
    }
}

impl ScenarioConfig {
    pub fn grid(&self) -> GridDims {
        GridDims {
            nx: self.grid_nx,
            ny: self.grid_ny,
        }
    }

    /// Integration steps between consecutive snapshots.
    pub fn steps_per_snapshot(&self) -> Result<usize> {
        let r = self.snapshot_interval / self.dt;
        let n = r.round();
        if !(n >= 1.0) || (r - n).abs() > 1e-9 * n {
            return Err(Error::Config(format!(
                "snapshot_interval {} is not an integer multiple of dt {}",
                self.snapshot_interval, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("arch_height", self.arch_height),
            ("node_mass", self.node_mass),
            ("spring_stiffness", self.spring_stiffness),
            ("damping", self.damping),
            ("contact_stiffness", self.contact_stiffness),
            ("impactor_radius", self.impactor_radius),
            ("dt", self.dt),
            ("snapshot_interval", self.snapshot_interval),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive and finite, got {v}")));
            }
        }
        for (k, v) in [("impactor_mass", self.impactor_mass), ("impact_speed", self.impact_speed)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.impact_center_fraction) {
            return Err(Error::Config(format!(
                "impact_center_fraction must lie in [0, 1], got {}",
                self.impact_center_fraction
            )));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(Error::Config("grid needs at least 2x2 nodes".into()));
        }
        if self.snapshot_count < 1 {
            return Err(Error::Config("snapshot_count must be at least 1".into()));
        }
        self.grid().coarsened(self.levels)?;
        self.steps_per_snapshot()?;
        Ok(())
    }

    /// Consumes the scenario keys present in `kv`.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        kv.take_into("length", &mut self.length)?;
        kv.take_into("width", &mut self.width)?;
        kv.take_into("arch_height", &mut self.arch_height)?;
        kv.take_into("grid_nx", &mut self.grid_nx)?;
        kv.take_into("grid_ny", &mut self.grid_ny)?;
        kv.take_into("levels", &mut self.levels)?;
        kv.take_into("node_mass", &mut self.node_mass)?;
        kv.take_into("spring_stiffness", &mut self.spring_stiffness)?;
        kv.take_into("damping", &mut self.damping)?;
        kv.take_into("contact_stiffness", &mut self.contact_stiffness)?;
        kv.take_into("impactor_radius", &mut self.impactor_radius)?;
        kv.take_into("impactor_mass", &mut self.impactor_mass)?;
        kv.take_into("impact_speed", &mut self.impact_speed)?;
        kv.take_into("impact_center_fraction", &mut self.impact_center_fraction)?;
        kv.take_into("dt", &mut self.dt)?;
        kv.take_into("snapshot_interval", &mut self.snapshot_interval)?;
        kv.take_into("snapshot_count", &mut self.snapshot_count)?;
        Ok(())
    }

    /// Parses a complete scenario file; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvConfig::parse(text)?;
        let mut cfg = ScenarioConfig::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_text())` reproduces `self` exactly.
    pub fn to_text(&self) -> String {
        let f = |v: f64| format!("{v:?}");
        render(&[
            ("length", f(self.length)),
            ("width", f(self.width)),
            ("arch_height", f(self.arch_height)),
            ("grid_nx", self.grid_nx.to_string()),
            ("grid_ny", self.grid_ny.to_string()),
            ("levels", self.levels.to_string()),
            ("node_mass", f(self.node_mass)),
            ("spring_stiffness", f(self.spring_stiffness)),
            ("damping", f(self.damping)),
            ("contact_stiffness", f(self.contact_stiffness)),
            ("impactor_radius", f(self.impactor_radius)),
            ("impactor_mass", f(self.impactor_mass)),
            ("impact_speed", f(self.impact_speed)),
            ("impact_center_fraction", f(self.impact_center_fraction)),
            ("dt", f(self.dt)),
            ("snapshot_interval", f(self.snapshot_interval)),
            ("snapshot_count", self.snapshot_count.to_string()),
        ])
    }
}
