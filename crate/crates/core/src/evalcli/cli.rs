//! `regunet` command line.
//!
//! Exit codes: 0 success, 1 invalid arguments, configuration or input files,
//! 2 failures while computing.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::compare::compare_models;
use super::export::export_fields;
use super::load_checkpoint;
use super::metrics::evaluate;
use super::svg::line_chart;
use super::sweep::{sweep, write_sweep, SweepGrid};
use crate::binio::write_atomic;
use crate::config::KvConfig;
use crate::csvout::{float, Csv};
use crate::diffcore::GradCheckOptions;
use crate::error::{Error, Result};
use crate::model::{ModelVariant, Predictor};
use crate::synthdata::{build_dataset, split_seeds, Dataset, DatasetSpec, Split};
use crate::trainer::{load_named, toy_gradcheck, train, TrainConfig};

pub const EVAL_CURVE_CSV: &str = "eval_curve.csv";
pub const EVAL_CURVE_SVG: &str = "eval_curve.svg";
pub const INTRUSION_CSV: &str = "intrusion.csv";
pub const GRADCHECK_FILE: &str = "gradcheck.txt";

#[derive(Parser, Debug)]
#[command(name = "regunet", version, about = "Recurrent graph U-Net surrogates for impact dynamics")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seeds of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// Split to evaluate on (config key `split`).
    #[arg(long)]
    split: Option<Split>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic impact dataset.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model on a dataset's training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Autoregressive error curve and intrusion errors of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Model checkpoint (`model.rgck` of a training run).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reject checkpoints of any other variant (config key `variant`).
        #[arg(long)]
        variant: Option<ModelVariant>,
    },
    /// Error curves of several checkpoints in one CSV and chart.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Model checkpoint; repeat for each model to compare.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Train one model per grid point and tabulate validation error and cost.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference check of the toy ReGUNet gradient.
    Gradcheck {
        /// `key = value` file with `step`, `tolerance`, `abs_floor`, `seed`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for `gradcheck.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds the toy sample and initialization.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-step displacement fields of one sample.
    ExportFields {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Model checkpoint (`model.rgck` of a training run).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index of the sample within the split (config key `sample`).
        #[arg(long)]
        sample: Option<usize>,
    },
}

fn load_kv(path: Option<&Path>) -> Result<KvConfig> {
    match path {
        Some(p) => KvConfig::load(p),
        None => Ok(KvConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Evaluation keys: `split` (default test), `variant`, `sample`.
struct EvalKeys {
    split: Split,
    variant: Option<ModelVariant>,
    sample: usize,
}

fn eval_keys(common: &Common, source: &Source) -> Result<EvalKeys> {
    let mut kv = load_kv(common.config.as_deref())?;
    let split = kv.take("split")?.unwrap_or(Split::Test);
    let variant = kv.take("variant")?;
    let sample = kv.take("sample")?.unwrap_or(0);
    kv.finish()?;
    Ok(EvalKeys {
        split: source.split.unwrap_or(split),
        variant,
        sample,
    })
}

fn split_sequences(source: &Source, split: Split) -> Result<(Dataset, Vec<(String, crate::meshgraph::GraphSequence)>)> {
    let ds = Dataset::open(&source.data)?;
    let seqs = load_named(&ds, split)?;
    if seqs.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no {split} samples", source.data.display())));
    }
    Ok((ds, seqs))
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<()> {
    let say = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    match cmd {
        Command::GenData { common } => {
            let mut kv = load_kv(common.config.as_deref())?;
            let mut spec = DatasetSpec::default();
            spec.apply(&mut kv)?;
            kv.finish()?;
            if let Some(s) = common.seed {
                spec.seeds = split_seeds(s);
            }
            let ds = build_dataset(&spec, &common.out)?;
            say(out, format!("wrote {} samples to {}", ds.entries.len(), common.out.display()));
        }
        Command::Train { common, data } => {
            let mut kv = load_kv(common.config.as_deref())?;
            let mut cfg = TrainConfig::default();
            cfg.apply(&mut kv)?;
            kv.finish()?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let ds = Dataset::open(&data)?;
            let outcome = train(&ds, &cfg, &common.out, &mut |r| {
                let val = r.val_mse.map_or("-".into(), |v| format!("{v:.6e}"));
                say(
                    out,
                    format!("epoch {:>4}  train {:.6e}  val {val}  lr {:.1e}  {:.2}s", r.epoch, r.train_mse, r.lr, r.seconds),
                );
            })?;
            if let Some(p) = outcome.checkpoint {
                say(out, format!("checkpoint {} (bptt {})", p.display(), outcome.bptt));
            }
        }
        Command::Eval {
            common,
            source,
            checkpoint,
            variant,
        } => {
            let keys = eval_keys(&common, &source)?;
            let (ds, seqs) = split_sequences(&source, keys.split)?;
            let model = load_checkpoint(&checkpoint, &ds.scenario, variant.or(keys.variant))?;
            let samples: Vec<_> = seqs.iter().map(|(_, s)| s.clone()).collect();
            let report = evaluate(&model, &samples)?;
            create_dir(&common.out)?;
            let mut curve = Csv::new(&["step", "mean_error"]);
            for (i, e) in report.per_step.iter().enumerate() {
                curve.row(&[i.to_string(), float(*e)])?;
            }
            curve.write(&common.out.join(EVAL_CURVE_CSV))?;
            let svg = line_chart(
                "Error accumulation",
                "time step",
                "mean Euclidean error (mm)",
                &[(model.variant.tag().to_string(), report.per_step.clone())],
            );
            write_atomic(&common.out.join(EVAL_CURVE_SVG), svg.as_bytes())?;
            let mut intr = Csv::new(&["sample", "true_intrusion", "pred_intrusion", "relative_error"]);
            for ((name, _), r) in seqs.iter().zip(&report.intrusion) {
                intr.row(&[name.clone(), float(r.true_mm), float(r.pred_mm), float(r.relative_error)])?;
            }
            intr.write(&common.out.join(INTRUSION_CSV))?;
            say(
                out,
                format!(
                    "{} on {} {} samples: final-step mean error {:.6e} mm, max intrusion error {:.4}%",
                    model.variant,
                    samples.len(),
                    keys.split,
                    report.final_step,
                    100.0 * report.max_intrusion_error
                ),
            );
        }
        Command::Compare {
            common,
            source,
            checkpoints,
        } => {
            let keys = eval_keys(&common, &source)?;
            let (ds, seqs) = split_sequences(&source, keys.split)?;
            let models = checkpoints
                .iter()
                .map(|p| load_checkpoint(p, &ds.scenario, keys.variant))
                .collect::<Result<Vec<_>>>()?;
            let samples: Vec<_> = seqs.into_iter().map(|(_, s)| s).collect();
            let named: Vec<(String, &dyn Predictor)> = models
                .iter()
                .map(|m| (m.variant.tag().to_string(), m as &dyn Predictor))
                .collect();
            let cmp = compare_models(&named, &samples)?;
            cmp.write(&common.out)?;
            for (l, c) in cmp.labels.iter().zip(&cmp.curves) {
                say(out, format!("{l}: final-step mean error {:.6e} mm", c.last().copied().unwrap_or(0.0)));
            }
        }
        Command::Sweep { common, data } => {
            let mut kv = load_kv(common.config.as_deref())?;
            let mut cfg = TrainConfig::default();
            let mut grid = SweepGrid::default();
            grid.apply(&mut kv)?;
            cfg.apply(&mut kv)?;
            kv.finish()?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            for p in grid.points(&cfg.model) {
                p.validate()?;
            }
            let ds = Dataset::open(&data)?;
            let train = load_named(&ds, Split::Train)?;
            let val = load_named(&ds, Split::Val)?;
            let rows = sweep(&grid, &cfg, &train, &val, &ds.scenario, &mut |i, r| {
                say(
                    out,
                    format!(
                        "point {i}: k {} P_c {} P_f {} C_0 {} -> val error {:.6e} mm",
                        r.model.k, r.model.coarse_steps, r.model.fine_steps, r.model.channels[0], r.final_val_error
                    ),
                )
            })?;
            write_sweep(&rows, &common.out)?;
        }
        Command::Gradcheck { config, out: dir, seed } => {
            let mut kv = load_kv(config.as_deref())?;
            let mut opts = GradCheckOptions::default();
            kv.take_into("step", &mut opts.step)?;
            kv.take_into("tolerance", &mut opts.tolerance)?;
            kv.take_into("abs_floor", &mut opts.abs_floor)?;
            let seed = seed.or(kv.take("seed")?).unwrap_or(0);
            kv.finish()?;
            if !(opts.step > 0.0 && opts.tolerance > 0.0 && opts.abs_floor >= 0.0) {
                return Err(Error::Config("step and tolerance must be positive".into()));
            }
            let r = toy_gradcheck(seed, opts)?;
            let mut text = format!(
                "max relative gradient error {:.3e} over {} entries (tolerance {:.0e})\n",
                r.max_relative_error, r.entries_checked, r.tolerance
            );
            if let Some((name, i, a, n)) = &r.worst {
                text.push_str(&format!("worst: {name}[{i}] analytic {a:.9e} numeric {n:.9e}\n"));
            }
            let _ = out.write_all(text.as_bytes());
            if let Some(d) = dir {
                create_dir(&d)?;
                write_atomic(&d.join(GRADCHECK_FILE), text.as_bytes())?;
            }
            if !r.passed() {
                return Err(Error::CheckFailed(format!(
                    "max relative gradient error {:.3e} >= {:.0e}",
                    r.max_relative_error, r.tolerance
                )));
            }
        }
        Command::ExportFields {
            common,
            source,
            checkpoint,
            sample,
        } => {
            let keys = eval_keys(&common, &source)?;
            let (ds, seqs) = split_sequences(&source, keys.split)?;
            let idx = sample.unwrap_or(keys.sample);
            let (name, seq) = seqs.get(idx).ok_or_else(|| {
                Error::InvalidInput(format!("{} split has {} samples, index {idx} requested", keys.split, seqs.len()))
            })?;
            let model = load_checkpoint(&checkpoint, &ds.scenario, keys.variant)?;
            let paths = export_fields(&model, seq, &common.out)?;
            say(out, format!("wrote {} field files for {name} to {}", paths.len(), common.out.display()));
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(cli.cmd, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
