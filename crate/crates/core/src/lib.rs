//! Desk-scale generative-modeling lab built around optimal transport:
//! Wasserstein auto-encoders with MMD and adversarial latent penalties, a
//! VAE baseline, an exact discrete transport solver that certifies the
//! encoder-factorization identity, and evaluation metrics.

pub mod adam;
pub mod data;
pub mod divergence;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod ot;
pub mod rng;
pub mod tensor;

pub use tensor::Tensor;
