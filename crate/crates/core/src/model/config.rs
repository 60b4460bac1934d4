use std::fmt;
use std::str::FromStr;

use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Architecture hyperparameters shared by all variants.
#[derive(Clone, Debug, PartialEq)]
pub struct GUNetConfig {
    /// `[C_0, C_1, ..., C_L]`; `C_1 = C_0`, then doubling per level.
    pub channels: Vec<usize>,
    pub fine_steps: usize,
    pub coarse_steps: usize,
    /// Cross-graph edges per sender node.
    pub k: usize,
    pub levels: usize,
    pub leaky_slope: f64,
    /// Latent width of baselines 1 and 2.
    pub baseline_channels: usize,
    /// Message-passing steps of baselines 1 and 2.
    pub baseline_steps: usize,
}

impl Default for GUNetConfig {
    fn default() -> Self {
        GUNetConfig {
            channels: vec![32, 32, 64, 128],
            fine_steps: 2,
            coarse_steps: 10,
            k: 6,
            levels: 3,
            leaky_slope: 0.01,
            baseline_channels: 128,
            baseline_steps: 15,
        }
    }
}

impl GUNetConfig {
    /// Tiny network for gradient checks on a 3x3 grid with one coarse level.
    pub fn toy() -> Self {
        GUNetConfig {
            channels: vec![4, 4],
            fine_steps: 1,
            coarse_steps: 2,
            k: 2,
            levels: 1,
            leaky_slope: 0.01,
            baseline_channels: 4,
            baseline_steps: 2,
        }
    }

    /// Doubling schedule `[c, c, 2c, 4c, ...]` for `levels` coarse levels.
    pub fn schedule(c0: usize, levels: usize) -> Vec<usize> {
        let mut v = vec![c0, c0];
        for l in 2..=levels {
            v.push(v[l - 1] * 2);
        }
        v.truncate(levels + 1);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if self.channels.len() != self.levels + 1 {
            return Err(Error::Config(format!(
                "channel schedule {:?} needs levels + 1 = {} entries",
                self.channels,
                self.levels + 1
            )));
        }
        if self.channels[0] == 0 || self.channels[1] != self.channels[0] {
            return Err(Error::Config(format!(
                "channel schedule {:?}: C_1 must equal C_0 > 0",
                self.channels
            )));
        }
        for l in 2..=self.levels {
            if self.channels[l] != 2 * self.channels[l - 1] {
                return Err(Error::Config(format!(
                    "channel schedule {:?}: C_{l} must be twice C_{}",
                    self.channels,
                    l - 1
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.baseline_channels == 0 {
            return Err(Error::Config("baseline_channels must be positive".into()));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Config("leaky_slope must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Consumes model keys present in `kv`.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        kv.take_into("levels", &mut self.levels)?;
        match kv.take_list::<usize>("channels")? {
            Some(c) => self.channels = c,
            None if self.channels.len() != self.levels + 1 => {
                self.channels = Self::schedule(self.channels[0], self.levels)
            }
            None => {}
        }
        kv.take_into("fine_steps", &mut self.fine_steps)?;
        kv.take_into("coarse_steps", &mut self.coarse_steps)?;
        kv.take_into("k", &mut self.k)?;
        kv.take_into("leaky_slope", &mut self.leaky_slope)?;
        kv.take_into("baseline_channels", &mut self.baseline_channels)?;
        kv.take_into("baseline_steps", &mut self.baseline_steps)?;
        Ok(())
    }

    pub(crate) fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.levels as f64,
            self.k as f64,
            self.fine_steps as f64,
            self.coarse_steps as f64,
            self.leaky_slope,
            self.baseline_channels as f64,
            self.baseline_steps as f64,
        ];
        v.extend(self.channels.iter().map(|&c| c as f64));
        v
    }

    pub(crate) fn from_vec(v: &[f64]) -> Result<Self> {
        let bad = || Error::InvalidInput("malformed model configuration tensor".into());
        let int = |x: f64| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
                Ok(x as usize)
            } else {
                Err(bad())
            }
        };
        if v.len() < 7 {
            return Err(bad());
        }
        let cfg = GUNetConfig {
            levels: int(v[0])?,
            k: int(v[1])?,
            fine_steps: int(v[2])?,
            coarse_steps: int(v[3])?,
            leaky_slope: v[4],
            baseline_channels: int(v[5])?,
            baseline_steps: int(v[6])?,
            channels: v[7..].iter().map(|&c| int(c)).collect::<Result<_>>()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The four model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelVariant {
    /// Multi-scale block with fine and coarse hidden states.
    ReGUNet,
    /// Single-scale encoder-processor-decoder without memory.
    Baseline1,
    /// Baseline 1 with per-edge hidden state threaded through time.
    Baseline2,
    /// Multi-scale block without hidden states.
    Baseline3,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::ReGUNet,
        ModelVariant::Baseline1,
        ModelVariant::Baseline2,
        ModelVariant::Baseline3,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelVariant::ReGUNet => "regunet",
            ModelVariant::Baseline1 => "baseline1",
            ModelVariant::Baseline2 => "baseline2",
            ModelVariant::Baseline3 => "baseline3",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelVariant::ReGUNet | ModelVariant::Baseline2)
    }

    pub fn is_multiscale(self) -> bool {
        matches!(self, ModelVariant::ReGUNet | ModelVariant::Baseline3)
    }

    pub(crate) fn code(self) -> f64 {
        match self {
            ModelVariant::ReGUNet => 0.0,
            ModelVariant::Baseline1 => 1.0,
            ModelVariant::Baseline2 => 2.0,
            ModelVariant::Baseline3 => 3.0,
        }
    }

    pub(crate) fn from_code(c: f64) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.code() == c)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant code {c}")))
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model variant {s:?}")))
    }
}
