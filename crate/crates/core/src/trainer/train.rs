use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::loss::{accumulate_sequence_gradients, resolve_bptt, sequence_loss, BpttMode, PreparedSample};
use super::norm_stats::compute_norm_stats;
use crate::binio::write_atomic;
use crate::csvout::{float, Csv};
use crate::diffcore::AdamConfig;
use crate::error::{Error, Result};
use crate::meshgraph::{GraphHierarchy, GraphSequence};
use crate::model::{build_model, GUNetConfig, Model, ModelVariant};
use crate::synthdata::{benchmark_hierarchy, Dataset, ScenarioConfig, Split};

pub const LOG_FILE: &str = "train_log.csv";
pub const LOG_HEADER: [&str; 5] = ["epoch", "train_mse", "val_mse", "lr", "seconds"];
pub const CONFIG_FILE: &str = "train.cfg";
pub const FINAL_CHECKPOINT: &str = "model.rgck";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean teacher-forced loss over the epoch's samples, each taken just
    /// before its batch's update.
    pub train_mse: f64,
    /// `None` when there is no validation split.
    pub val_mse: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

impl EpochRecord {
    fn cells(&self) -> [String; 5] {
        [
            self.epoch.to_string(),
            float(self.train_mse),
            self.val_mse.map_or_else(|| "nan".into(), float),
            float(self.lr),
            float(self.seconds),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochRecord>,
    /// Gradient mode actually used.
    pub bptt: BpttMode,
    pub checkpoint: Option<PathBuf>,
}

/// Benchmark hierarchy for `variant`, or `None` for single-scale baselines.
pub fn model_hierarchy(
    scenario: &ScenarioConfig,
    variant: ModelVariant,
    cfg: &GUNetConfig,
) -> Result<Option<Arc<GraphHierarchy>>> {
    if !variant.is_multiscale() {
        return Ok(None);
    }
    Ok(Some(Arc::new(benchmark_hierarchy(scenario, cfg.levels, cfg.k)?)))
}

/// Freshly initialized model with normalization fitted to `train`.
pub fn initial_model(train: &[GraphSequence], scenario: &ScenarioConfig, cfg: &TrainConfig) -> Result<Model> {
    let h = model_hierarchy(scenario, cfg.variant, &cfg.model)?;
    let mut model = build_model(cfg.variant, h, &cfg.model, cfg.seed)?;
    model.norm = compute_norm_stats(train)?;
    Ok(model)
}

/// Mean teacher-forced normalized MSE over `samples`.
pub fn mean_loss(model: &Model, samples: &[PreparedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to evaluate".into()));
    }
    let mut acc = 0.0;
    for s in samples {
        acc += sequence_loss(model, s)?;
    }
    Ok(acc / samples.len() as f64)
}

pub fn prepare_all(model: &Model, seqs: &[(String, GraphSequence)]) -> Result<Vec<PreparedSample>> {
    seqs.iter().map(|(n, s)| PreparedSample::new(model, s, n.clone())).collect()
}

fn write_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut csv = Csv::new(&LOG_HEADER);
    for r in log {
        csv.row(&r.cells())?;
    }
    csv.write(path)
}

/// Trains on named in-memory sequences. With `out_dir`, writes the resolved
/// configuration, the per-epoch log, periodic checkpoints and the final one.
pub fn train_sequences(
    train: &[(String, GraphSequence)],
    val: &[(String, GraphSequence)],
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let seqs: Vec<GraphSequence> = train.iter().map(|(_, s)| s.clone()).collect();
    let mut model = initial_model(&seqs, scenario, cfg)?;
    let train_set = prepare_all(&model, train)?;
    let val_set = prepare_all(&model, val)?;
    let bptt = resolve_bptt(cfg.bptt, &model, &train_set[0])?;

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
        if cfg.checkpoint_every > 0 {
            let c = dir.join(CHECKPOINT_DIR);
            std::fs::create_dir_all(&c).map_err(|e| Error::io(&c, e))?;
        }
    }

    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let adam = AdamConfig::default();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let lr = cfg.lr(epoch);
        order.shuffle(&mut shuffle);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.params.zero_grads();
            for &i in batch {
                let s = &train_set[i];
                let l = accumulate_sequence_gradients(&mut model, s, bptt)?;
                if !l.is_finite() || !model.params.grads_finite() {
                    return Err(Error::NonFinite(format!(
                        "training loss at epoch {epoch}, sample {}",
                        s.name
                    )));
                }
                sum += l;
            }
            model.params.scale_grads(1.0 / batch.len() as f64);
            model.params.adam_step(lr, adam);
        }
        let val_mse = if val_set.is_empty() {
            None
        } else {
            Some(mean_loss(&model, &val_set)?)
        };
        let rec = EpochRecord {
            epoch,
            train_mse: sum / train_set.len() as f64,
            val_mse,
            lr,
            seconds: if cfg.record_wall_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        progress(&rec);
        log.push(rec);
        if let Some(dir) = out_dir {
            write_log(&dir.join(LOG_FILE), &log)?;
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                model.save(&dir.join(CHECKPOINT_DIR).join(format!("epoch_{epoch:04}.rgck")))?;
            }
        }
    }
    let checkpoint = match out_dir {
        Some(dir) => {
            let p = dir.join(FINAL_CHECKPOINT);
            model.save(&p)?;
            Some(p)
        }
        None => None,
    };
    Ok(TrainOutcome {
        model,
        log,
        bptt,
        checkpoint,
    })
}

/// Named sequences of one split, in manifest order.
pub fn load_named(dataset: &Dataset, split: Split) -> Result<Vec<(String, GraphSequence)>> {
    let samples = dataset.load(split)?;
    Ok(dataset
        .entries
        .iter()
        .filter(|(s, _)| *s == split)
        .map(|(_, n)| n.clone())
        .zip(samples.into_iter().map(|s| s.sequence))
        .collect())
}

/// Trains on the dataset's training split, validating on its validation split.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    out_dir: &Path,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let train = load_named(dataset, Split::Train)?;
    let val = load_named(dataset, Split::Val)?;
    train_sequences(&train, &val, &dataset.scenario, cfg, Some(out_dir), progress)
}
