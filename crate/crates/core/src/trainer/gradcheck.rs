use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{record_sequence_loss, PreparedSample};
use super::norm_stats::compute_norm_stats;
use super::train::model_hierarchy;
use crate::diffcore::{finite_difference_check, GradCheckOptions, GradCheckReport};
use crate::error::Result;
use crate::model::{build_model, GUNetConfig, ModelVariant};
use crate::synthdata::{generate_split, split_seeds, DatasetSpec, PerSplit, ScenarioConfig, Split};

/// Half-width of the uniform offset added to every parameter before checking.
/// Fresh biases are exactly zero, which parks ReLU units of dead rows on
/// their kink where central differences are meaningless.
pub const TOY_JITTER: f64 = 0.05;

/// 3 x 3 clamped plate, one coarse level, impactor over the centre node.
pub fn toy_scenario() -> ScenarioConfig {
    ScenarioConfig {
        grid_nx: 3,
        grid_ny: 3,
        levels: 1,
        impact_center_fraction: 0.5,
        ..Default::default()
    }
}

/// Central-difference check of the full teacher-forced ReGUNet sequence
/// loss (all steps, normalized targets) on one toy sample.
pub fn toy_gradcheck(seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let scenario = toy_scenario();
    let spec = DatasetSpec {
        scenario: scenario.clone(),
        counts: PerSplit { train: 1, val: 0, test: 0 },
        seeds: split_seeds(seed),
    };
    let seq = generate_split(&spec, Split::Train)?.remove(0).sequence;
    let cfg = GUNetConfig::toy();
    let h = model_hierarchy(&scenario, ModelVariant::ReGUNet, &cfg)?;
    let mut model = build_model(ModelVariant::ReGUNet, h, &cfg, seed)?;
    model.norm = compute_norm_stats(std::slice::from_ref(&seq))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    model.params.jitter(TOY_JITTER, &mut rng);
    let sample = PreparedSample::new(&model, &seq, "toy")?;
    let frozen = model.clone();
    finite_difference_check(&mut model.params, opts, |t| record_sequence_loss(&frozen, t, &sample))
}
