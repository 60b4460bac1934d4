//! The recurrent graph U-Net, its building blocks and the three baselines.

pub mod config;
pub mod graphs;
pub mod layers;
pub mod network;
pub mod norm;
pub mod rollout;

pub use config::{GUNetConfig, ModelVariant};
pub use graphs::{ModelGraphs, SampleContext};
pub use layers::{cross_mp_forward, nw_forward, remp_layer, remp_step, RempOut, RempStep};
pub use network::{
    build_model, checkpoint_header, BlockConsts, HiddenState, HiddenVars, Model, StepInputs,
};
pub use norm::NormStats;
pub use rollout::{
    displacements, rollout, GroundTruthStub, Predictor, Rollout, RolloutMode, StepSession,
    ZeroPredictor,
};

#[cfg(test)]
pub(crate) mod tests;
