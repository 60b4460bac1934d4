//! Synthetic impact data: benchmark geometry, control-point morphing, Latin
//! hypercube designs and the mass-spring oracle that produces graph sequences.

pub mod dataset;
pub mod geometry;
pub mod lhs;
pub mod scenario;
pub mod simulate;

pub use dataset::{build_dataset, generate_split, split_seeds, Dataset, DatasetSpec, PerSplit, Split};
pub use geometry::{
    benchmark_hierarchy, generate_benchmark_mesh, morph_geometry, quantize, sample_to_morph,
    POSITION_QUANTUM,
};
pub use lhs::latin_hypercube_sample;
pub use scenario::ScenarioConfig;
pub use simulate::{simulate_impact, simulate_impact_traced, SimulationTrace};
