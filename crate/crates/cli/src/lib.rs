//! Command-line front end for the clustering pipeline: graph construction,
//! autoencoder pretraining, clustering, evaluation and plot-data export.

pub mod commands;
pub mod config;
pub mod plot;

pub use config::{Mode, RunConfig};
