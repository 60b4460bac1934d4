use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::loss::BpttMode;
use crate::config::{render, KvConfig};
use crate::error::{Error, Result};
use crate::model::{GUNetConfig, ModelVariant};

/// Last epoch trained at the first learning rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSwitch {
    Epoch(usize),
    /// Fraction of the total epoch count, rounded to the nearest epoch.
    Fraction(f64),
}

impl LrSwitch {
    pub fn epoch(self, epochs: usize) -> usize {
        match self {
            LrSwitch::Epoch(e) => e,
            LrSwitch::Fraction(f) => (f * epochs as f64).round() as usize,
        }
    }
}

impl fmt::Display for LrSwitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrSwitch::Epoch(e) => write!(f, "{e}"),
            LrSwitch::Fraction(x) => write!(f, "{:?}%", x * 100.0),
        }
    }
}

impl FromStr for LrSwitch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad lr_switch {s:?} (an epoch or a percentage)"));
        match s.strip_suffix('%') {
            Some(p) => {
                let v: f64 = p.trim().parse().map_err(|_| bad())?;
                if !(0.0..=100.0).contains(&v) {
                    return Err(bad());
                }
                Ok(LrSwitch::Fraction(v / 100.0))
            }
            None => s.parse().map(LrSwitch::Epoch).map_err(|_| bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub model: GUNetConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    pub lr_switch: LrSwitch,
    /// Seeds parameter initialization and the per-epoch shuffle.
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: final checkpoint only).
    pub checkpoint_every: usize,
    pub bptt: BpttMode,
    /// Log wall-clock seconds per epoch; when off the column is 0 and logs
    /// are byte-reproducible.
    pub record_wall_time: bool,
}

/// Desk preset: 200 epochs, first 60% at the higher rate.
impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: ModelVariant::ReGUNet,
            model: GUNetConfig::default(),
            batch_size: 2,
            epochs: 200,
            lr_phase1: 4e-4,
            lr_phase2: 2e-4,
            lr_switch: LrSwitch::Fraction(0.6),
            seed: 0,
            checkpoint_every: 0,
            bptt: BpttMode::Auto,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn full() -> Self {
        TrainConfig {
            epochs: 800,
            lr_switch: LrSwitch::Epoch(500),
            ..Default::default()
        }
    }

    /// Learning rate of 1-based `epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        if epoch <= self.lr_switch.epoch(self.epochs) {
            self.lr_phase1
        } else {
            self.lr_phase2
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (k, v) in [("lr_phase1", self.lr_phase1), ("lr_phase2", self.lr_phase2)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        self.model.validate()
    }

    /// Applies `preset`, training keys and model keys from `kv`.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        match kv.take::<String>("preset")?.as_deref() {
            None => {}
            Some("desk") => *self = TrainConfig::default(),
            Some("full") => *self = TrainConfig::full(),
            Some(p) => return Err(Error::Config(format!("unknown training preset {p:?}"))),
        }
        kv.take_into("variant", &mut self.variant)?;
        kv.take_into("batch_size", &mut self.batch_size)?;
        kv.take_into("epochs", &mut self.epochs)?;
        kv.take_into("lr_phase1", &mut self.lr_phase1)?;
        kv.take_into("lr_phase2", &mut self.lr_phase2)?;
        kv.take_into("lr_switch", &mut self.lr_switch)?;
        kv.take_into("seed", &mut self.seed)?;
        kv.take_into("checkpoint_every", &mut self.checkpoint_every)?;
        kv.take_into("bptt", &mut self.bptt)?;
        kv.take_into("record_wall_time", &mut self.record_wall_time)?;
        self.model.apply(kv)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvConfig::parse(text)?;
        let mut cfg = TrainConfig::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let list = m.channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        render(&[
            ("variant", self.variant.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr_phase1", format!("{:?}", self.lr_phase1)),
            ("lr_phase2", format!("{:?}", self.lr_phase2)),
            ("lr_switch", self.lr_switch.to_string()),
            ("seed", self.seed.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("bptt", self.bptt.to_string()),
            ("record_wall_time", self.record_wall_time.to_string()),
            ("levels", m.levels.to_string()),
            ("channels", list),
            ("fine_steps", m.fine_steps.to_string()),
            ("coarse_steps", m.coarse_steps.to_string()),
            ("k", m.k.to_string()),
            ("leaky_slope", format!("{:?}", m.leaky_slope)),
            ("baseline_channels", m.baseline_channels.to_string()),
            ("baseline_steps", m.baseline_steps.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let p = TrainConfig::full();
        assert_eq!((p.epochs, p.batch_size), (800, 2));
        assert_eq!(p.lr(1), 4e-4);
        assert_eq!(p.lr(500), 4e-4);
        assert_eq!(p.lr(501), 2e-4);
        let d = TrainConfig::default();
        assert_eq!(d.epochs, 200);
        assert_eq!(d.lr(120), 4e-4);
        assert_eq!(d.lr(121), 2e-4);
        let o = TrainConfig { epochs: 500, ..Default::default() };
        assert_eq!(o.lr(300), 4e-4);
        assert_eq!(o.lr(301), 2e-4);
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::full();
        c.variant = ModelVariant::Baseline2;
        c.lr_switch = LrSwitch::Fraction(0.25);
        c.record_wall_time = false;
        c.model.k = 9;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrainConfig::parse("epochs = 0").is_err());
        assert!(TrainConfig::parse("lr_phase2 = -1").is_err());
        assert!(TrainConfig::parse("lr_switch = 150%").is_err());
        assert!(TrainConfig::parse("preset = huge").is_err());
        assert!(TrainConfig::parse("unknown_key = 1").is_err());
        let c = TrainConfig::parse("preset = full\nepochs = 10\nvariant = baseline3").unwrap();
        assert_eq!((c.epochs, c.lr_switch, c.variant), (10, LrSwitch::Epoch(500), ModelVariant::Baseline3));
    }
}
