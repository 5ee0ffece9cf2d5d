//! Minimal neural-network substrate: 4-axis tensors, convolution / transposed
//! convolution / dense / activation layers with analytic backward passes, a
//! gated recurrent cell, Adam, reparameterized latent sampling, central
//! finite-difference gradient checking and the `THNV` checkpoint container.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` as a shadow copy for gradient verification.

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod latent;
pub mod layers;
pub mod network;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Block, Checkpoint, LayerRecord};
pub use error::{NnError, Result};
pub use gru::{Gru, GruTrace};
pub use latent::{sample_latent, sample_latent_backward, LOGVAR_CLAMP};
pub use layers::{Activation, Layer, LayerKind, LayerSpec};
pub use network::{Network, Trace};
pub use tensor::{Scalar, Tensor};
