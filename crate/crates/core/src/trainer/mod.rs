//! Teacher-forced training: normalization, loss, gradient through time and the epoch loop.

pub mod config;
pub mod gradcheck;
pub mod loss;
pub mod norm_stats;
pub mod train;

pub use config::{LrSwitch, TrainConfig};
pub use loss::{
    accumulate_sequence_gradients, mse_loss, record_sequence_loss, resolve_bptt, sequence_loss, BpttMode,
    PreparedSample,
};
pub use gradcheck::{toy_gradcheck, toy_scenario};
pub use norm_stats::compute_norm_stats;
pub use train::{
    initial_model, load_named, mean_loss, model_hierarchy, prepare_all, train, train_sequences,
    EpochRecord, TrainOutcome, FINAL_CHECKPOINT, LOG_FILE,
};
