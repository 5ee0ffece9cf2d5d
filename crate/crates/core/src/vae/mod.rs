//! Variational autoencoder for depth frames with semantically weighted
//! reconstruction.

pub mod loss;
pub mod model;
pub mod train;

pub use loss::{beta_norm, kl_loss, recon_loss, semantic_weight_mask, SemanticWeights};
pub use model::{vae_loss, LatentCode, LossParts, Vae, VaeBatch, VaeConfig, VaeMode};
pub use train::{evaluate_loss, split_indices, train_vae, write_loss_csv, EpochLog, VaeTrainConfig};
