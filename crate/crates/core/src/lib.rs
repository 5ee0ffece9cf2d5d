//! Thin-obstacle-aware navigation from noisy depth: a ray-cast depth-camera
//! simulator, a semantically weighted VAE for depth compression, FFT
//! baselines, a recurrent collision predictor over the latent code and an
//! uncertainty-aware motion-primitive planner, plus the evaluation harness.

pub mod cpn;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod harness;
pub mod io;
pub mod planner;
pub mod render;
pub mod sim;
pub mod vae;

pub use error::{Error, Result};
