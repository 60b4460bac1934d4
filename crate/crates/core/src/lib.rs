//! Recurrent graph U-Net surrogates for mesh-based impact dynamics.
//!
//! The crate is organized bottom-up:
//!
//! - [`meshgraph`]: mesh to graph conversion, multi-scale hierarchy, cross-graph
//!   edges, node/edge features and the `RGSQ` sample format.
//! - [`synthdata`]: deterministic benchmark geometry, morphing, Latin hypercube
//!   sampling and the mass-spring impact simulator that produces datasets.
//! - [`diffcore`]: matrices, reverse-mode tape, MLPs, Adam, checkpoints.
//! - [`model`]: the recurrent graph U-Net and the three baselines.
//! - [`trainer`]: normalization, teacher-forced loss and the training loop.
//! - [`evalcli`]: autoregressive metrics, comparisons, sweeps, field export and the CLI.

mod binio;
pub mod config;
pub mod csvout;
pub mod diffcore;
pub mod error;
pub mod evalcli;
pub mod meshgraph;
pub mod model;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, Result};
