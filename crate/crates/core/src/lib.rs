//! Information theoretic learning (ITL) divergences and autoencoders regularised
//! by them.
//!
//! - [`numerics`]: dense matrices, pairwise distances, log-sum-exp, seeded RNG
//! - [`estimators`]: Parzen densities, information potentials, quadratic Renyi
//!   entropies, Euclidean and Cauchy-Schwarz divergences and their gradients
//! - [`priors`]: Gaussian, Laplacian and swiss-roll latent priors
//! - [`network`]: fully connected layers with manual backpropagation
//! - [`optim`]: SGD with momentum and Adam
//! - [`trainer`]: the regularised autoencoder objective and training loop
//! - [`evaluation`]: Parzen log-likelihood benchmark for decoders
//! - [`data_io`]: IDX/CSV readers and writers, synthetic datasets
//! - [`checkpoint`]: JSON model files

pub mod checkpoint;
pub mod data_io;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod network;
pub mod numerics;
pub mod optim;
pub mod priors;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use estimators::{DivergenceKind, DivergenceReport, KernelWidth, SampleBatch};
pub use network::{Activation, LayerSpec, NetworkParams};
pub use numerics::{Matrix, Rng};
pub use optim::OptimizerConfig;
pub use priors::{PriorKind, PriorSpec};
pub use trainer::{Architecture, Autoencoder, EpochMetrics, TrainConfig};
