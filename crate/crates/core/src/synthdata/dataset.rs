//! Dataset directories: `scenario.cfg`, `manifest.txt` and one `RGSQ` file per sample.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::geometry::{generate_benchmark_mesh, morph_geometry, sample_to_morph};
use super::lhs::latin_hypercube_sample;
use super::scenario::ScenarioConfig;
use super::simulate::simulate_impact;
use crate::binio::write_atomic;
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::meshgraph::{deserialize_sample, serialize_sample, Sample};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SCENARIO_FILE: &str = "scenario.cfg";
const MANIFEST_HEADER: &str = "# regunet dataset v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidInput(format!("unknown split {s:?}"))),
        }
    }
}

/// A value per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PerSplit<T> {
    pub train: T,
    pub val: T,
    pub test: T,
}

impl<T: Copy> PerSplit<T> {
    pub fn get(&self, s: Split) -> T {
        match s {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

/// Everything that determines a dataset's bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub scenario: ScenarioConfig,
    pub counts: PerSplit<usize>,
    pub seeds: PerSplit<u64>,
}

impl Default for DatasetSpec {
    /// Desk scale: 40 / 10 / 10 samples.
    fn default() -> Self {
        DatasetSpec {
            scenario: ScenarioConfig::default(),
            counts: PerSplit { train: 40, val: 10, test: 10 },
            seeds: split_seeds(1),
        }
    }
}

/// Independent per-split seeds derived from one base seed.
pub fn split_seeds(base: u64) -> PerSplit<u64> {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    PerSplit {
        train: base,
        val: base.wrapping_add(GOLDEN),
        test: base.wrapping_add(GOLDEN.wrapping_mul(2)),
    }
}

impl DatasetSpec {
    /// 100 / 50 / 50 samples.
    pub fn full() -> Self {
        DatasetSpec {
            counts: PerSplit { train: 100, val: 50, test: 50 },
            ..Default::default()
        }
    }

    /// Consumes `preset`, `seed`, `{split}_count`, `{split}_seed` and scenario keys.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        if let Some(p) = kv.take::<String>("preset")? {
            let scenario = self.scenario.clone();
            *self = match p.as_str() {
                "desk" => DatasetSpec::default(),
                "full" => DatasetSpec::full(),
                _ => return Err(Error::Config(format!("unknown dataset preset {p:?}"))),
            };
            self.scenario = scenario;
        }
        if let Some(s) = kv.take::<u64>("seed")? {
            self.seeds = split_seeds(s);
        }
        kv.take_into("train_count", &mut self.counts.train)?;
        kv.take_into("val_count", &mut self.counts.val)?;
        kv.take_into("test_count", &mut self.counts.test)?;
        kv.take_into("train_seed", &mut self.seeds.train)?;
        kv.take_into("val_seed", &mut self.seeds.val)?;
        kv.take_into("test_seed", &mut self.seeds.test)?;
        self.scenario.apply(kv)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for s in Split::ALL {
            if self.counts.get(s) == 0 {
                return Err(Error::Config(format!("{s}_count must be at least 1")));
            }
        }
        Ok(())
    }
}

pub fn sample_file_name(split: Split, index: usize) -> String {
    format!("{split}_{index:04}.rgsq")
}

/// Generates one split's samples in LHS order.
pub fn generate_split(spec: &DatasetSpec, split: Split) -> Result<Vec<Sample>> {
    let cfg = &spec.scenario;
    let bench = generate_benchmark_mesh(cfg)?;
    latin_hypercube_sample(spec.counts.get(split), 2, spec.seeds.get(split))?
        .into_iter()
        .map(|u| {
            let morph = sample_to_morph([u[0], u[1]], cfg);
            let mesh = morph_geometry(&bench, morph, cfg)?;
            Ok(Sample {
                sequence: simulate_impact(&mesh, cfg)?,
                morph,
            })
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a full dataset into `out_dir` (created if missing). Every file is
/// written atomically and the manifest last.
pub fn build_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Dataset> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let scenario_text = spec.scenario.to_text();
    write_atomic(&out_dir.join(SCENARIO_FILE), scenario_text.as_bytes())?;

    let mut manifest = format!(
        "{MANIFEST_HEADER}\n# config_sha256 {}\n# seeds train={} val={} test={}\n",
        sha256_hex(scenario_text.as_bytes()),
        spec.seeds.train,
        spec.seeds.val,
        spec.seeds.test
    );
    let mut entries = Vec::new();
    for split in Split::ALL {
        for (i, sample) in generate_split(spec, split)?.iter().enumerate() {
            let name = sample_file_name(split, i);
            serialize_sample(sample, &out_dir.join(&name))?;
            manifest.push_str(&format!("{split} {name}\n"));
            entries.push((split, name));
        }
    }
    write_atomic(&out_dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    Ok(Dataset {
        dir: out_dir.to_path_buf(),
        scenario: spec.scenario.clone(),
        entries,
    })
}

/// An on-disk dataset opened through its manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub scenario: ScenarioConfig,
    /// `(split, file name)` in manifest order.
    pub entries: Vec<(Split, String)>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let scen_path = dir.join(SCENARIO_FILE);
        let scenario_text = fs::read_to_string(&scen_path).map_err(|e| Error::io(&scen_path, e))?;
        let scenario = ScenarioConfig::parse(&scenario_text)?;
        let man_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&man_path).map_err(|e| Error::io(&man_path, e))?;
        let bad = |line: usize, msg: String| Error::InvalidInput(format!("{}:{line}: {msg}", man_path.display()));

        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l) != Some(MANIFEST_HEADER) {
            return Err(bad(1, "not a dataset manifest".into()));
        }
        let mut entries = Vec::new();
        let mut hash_seen = false;
        for (i, line) in lines {
            if let Some(rest) = line.strip_prefix("# config_sha256 ") {
                if rest.trim() != sha256_hex(scenario_text.as_bytes()) {
                    return Err(bad(i + 1, "scenario.cfg does not match the recorded hash".into()));
                }
                hash_seen = true;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (split, name) = line
                .split_once(' ')
                .ok_or_else(|| bad(i + 1, format!("expected `<split> <file>`, got {line:?}")))?;
            let name = name.trim();
            if name.contains('/') || name.contains('\\') || name.starts_with('.') {
                return Err(bad(i + 1, format!("invalid sample file name {name:?}")));
            }
            entries.push((split.parse()?, name.to_string()));
        }
        if !hash_seen {
            return Err(bad(2, "missing config_sha256 header".into()));
        }
        Ok(Dataset {
            dir: dir.to_path_buf(),
            scenario,
            entries,
        })
    }

    pub fn files(&self, split: Split) -> Vec<PathBuf> {
        self.entries
            .iter()
            .filter(|(s, _)| *s == split)
            .map(|(_, n)| self.dir.join(n))
            .collect()
    }

    pub fn load(&self, split: Split) -> Result<Vec<Sample>> {
        self.files(split).iter().map(|p| deserialize_sample(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> DatasetSpec {
        let mut spec = DatasetSpec {
            counts: PerSplit { train: 2, val: 1, test: 1 },
            ..Default::default()
        };
        spec.scenario.grid_nx = 17;
        spec.scenario.levels = 2;
        spec.scenario.snapshot_count = 3;
        spec
    }

    #[test]
    fn counts_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ds = build_dataset(&small_spec(), dir.path()).unwrap();
        assert_eq!(ds.entries.len(), 4);
        let rgsq = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "rgsq"))
            .count();
        assert_eq!(rgsq, 4);
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);

        let back = Dataset::open(dir.path()).unwrap();
        assert_eq!(back.entries, ds.entries);
        assert_eq!(back.scenario, ds.scenario);
        let train = back.load(Split::Train).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(train[0].sequence.num_steps(), 3);
    }

    #[test]
    fn tampered_scenario_detected() {
        let dir = tempfile::tempdir().unwrap();
        build_dataset(&small_spec(), dir.path()).unwrap();
        let p = dir.path().join(SCENARIO_FILE);
        let t = fs::read_to_string(&p).unwrap().replace("damping = 400.0", "damping = 300.0");
        fs::write(&p, t).unwrap();
        assert!(Dataset::open(dir.path()).is_err());
    }

    #[test]
    fn presets() {
        let p = DatasetSpec::full();
        assert_eq!((p.counts.train, p.counts.val, p.counts.test), (100, 50, 50));
        let d = DatasetSpec::default();
        assert_eq!((d.counts.train, d.counts.val, d.counts.test), (40, 10, 10));
        let mut kv = KvConfig::parse("preset = full\nseed = 9\ngrid_nx = 17").unwrap();
        let mut s = DatasetSpec::default();
        s.apply(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(s.counts.test, 50);
        assert_eq!(s.seeds, split_seeds(9));
        assert_eq!(s.scenario.grid_nx, 17);
    }

    #[test]
    fn zero_count_rejected() {
        let mut s = small_spec();
        s.counts.val = 0;
        assert!(build_dataset(&s, Path::new("/nonexistent/never")).is_err());
    }
}
