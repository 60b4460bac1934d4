//! Autoregressive evaluation, comparisons, sweeps, field export and the CLI.

pub mod cli;
pub mod compare;
pub mod export;
pub mod metrics;
pub mod sweep;
pub mod svg;

use std::collections::BTreeMap;
use std::path::Path;

use crate::diffcore::checkpoint::read_tensors;
use crate::error::{Error, Result};
use crate::model::{checkpoint_header, Model, ModelVariant};
use crate::synthdata::ScenarioConfig;
use crate::trainer::model_hierarchy;

pub use cli::cli_main;
pub use compare::{compare_models, Comparison};
pub use export::export_fields;
pub use metrics::{error_accumulation, evaluate, max_intrusion_error, EvalReport, IntrusionRecord};
pub use sweep::{sweep, SweepGrid, SweepRow};

/// Loads a checkpoint against the benchmark hierarchy of `scenario`. With
/// `expect`, a checkpoint of another variant is rejected.
pub fn load_checkpoint(path: &Path, scenario: &ScenarioConfig, expect: Option<ModelVariant>) -> Result<Model> {
    let tensors: BTreeMap<_, _> = read_tensors(path)?.into_iter().collect();
    let (variant, cfg) = checkpoint_header(&tensors)?;
    if let Some(v) = expect.filter(|v| *v != variant) {
        return Err(Error::Config(format!(
            "{} holds a {variant} model, {v} was requested",
            path.display()
        )));
    }
    let h = model_hierarchy(scenario, variant, &cfg)?;
    Model::from_tensors(&tensors, h)
}
