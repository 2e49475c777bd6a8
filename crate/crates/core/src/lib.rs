//! Deep continuous clustering.
//!
//! A deep autoencoder embeds the data into a low-dimensional space while a
//! robust continuous objective pulls per-point representatives together.
//! Clusters are read off as connected components of the representatives,
//! so the number of clusters is never fixed in advance.
//!
//! The crate is organized bottom-up:
//!
//! - [`dataio`]: feature matrices, labels, binary matrices and checkpoints.
//! - [`nncore`]: dense layers, manual backprop, Adam and SGD with momentum.
//! - [`graph`]: mutual-kNN + MST connectivity graph and derived constants.
//! - [`robust`]: Geman-McClure estimators, minibatch objective and gradients.
//! - [`sdae`]: stacked denoising autoencoder initialization.
//! - [`dccopt`]: the training driver, continuation, stopping and extraction.
//! - [`metrics`]: AMI, NMI and clustering accuracy.
//! - [`baseline`]: a k-means++ reference clusterer.

pub mod baseline;
pub mod dataio;
pub mod dccopt;
mod error;
pub mod graph;
pub mod metrics;
pub mod nncore;
pub mod robust;
pub mod sdae;
pub mod unionfind;

pub use error::{Error, Result};

/// Random number generator used everywhere a seed is involved.
pub type DccRng = rand_chacha::ChaCha8Rng;
