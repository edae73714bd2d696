//! Batch pipeline around `cocoa-core`: scoring, PRR evaluation, ablation
//! grids, similarity precomputation and synthetic data.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod synth;

pub use error::RunError;
