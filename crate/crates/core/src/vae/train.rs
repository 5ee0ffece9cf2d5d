//! Mini-batch Adam training of a [`Vae`] on depth frames.

use std::io::Write;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thinnav_nn::{Adam, AdamConfig, Tensor};

use super::loss::semantic_weight_mask;
use super::model::{vae_loss, LossParts, Vae, VaeBatch, VaeConfig, VaeMode};
use crate::error::{invalid, Error, Result};
use crate::render::DepthFrame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_fraction: f64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 8,
            lr: 1e-4,
            val_fraction: 0.2,
        }
    }
}

impl VaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.val_fraction) {
            return Err(invalid("vae training needs epochs, batch size >= 1, lr > 0, val fraction in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossParts,
    pub val: LossParts,
}

/// Seeded shuffle of `0..n` split into (train, validation).
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((n as f64) * val_fraction).round() as usize;
    let val = idx.split_off(n - n_val.min(n));
    (idx, val)
}

/// Per-pixel weights for a frame under `cfg.mode`.
pub fn frame_weights(frame: &DepthFrame, cfg: &VaeConfig) -> Vec<f32> {
    match cfg.mode {
        VaeMode::Semantic => semantic_weight_mask(frame.seg(), &cfg.semantic),
        VaeMode::Vanilla => vec![1.0; frame.len()],
    }
}

fn make_batch(vae: &Vae, frames: &[&DepthFrame], weights: &[&[f32]], eps: Vec<f32>) -> Result<VaeBatch<f32>> {
    Ok(VaeBatch {
        x: vae.input_tensor(frames)?,
        val: frames.iter().flat_map(|f| f.val().iter().copied()).collect(),
        weight: weights.concat(),
        eps,
    })
}

/// Mean loss over `idx` with `z = mu` (no sampling noise).
pub fn evaluate_loss(vae: &mut Vae, frames: &[DepthFrame], idx: &[usize], batch: usize) -> Result<LossParts> {
    let mut acc = LossParts::default();
    if idx.is_empty() {
        return Ok(acc);
    }
    let bn = vae.config.beta_norm();
    let j = vae.config.latent;
    for chunk in idx.chunks(batch.max(1)) {
        let fs: Vec<&DepthFrame> = chunk.iter().map(|&i| &frames[i]).collect();
        let ws: Vec<Vec<f32>> = fs.iter().map(|f| frame_weights(f, &vae.config)).collect();
        let wr: Vec<&[f32]> = ws.iter().map(|w| w.as_slice()).collect();
        let b = make_batch(vae, &fs, &wr, vec![0.0; fs.len() * j])?;
        let p = vae_loss(&mut vae.encoder, &mut vae.decoder, &b, j, bn, false)?;
        let n = fs.len() as f64;
        acc.total += p.total * n;
        acc.recon += p.recon * n;
        acc.kl += p.kl * n;
    }
    let n = idx.len() as f64;
    Ok(LossParts {
        total: acc.total / n,
        recon: acc.recon / n,
        kl: acc.kl / n,
    })
}

/// Trains a fresh model. The same frames, configs and seed give bitwise
/// identical weights.
pub fn train_vae(
    frames: &[DepthFrame],
    cfg: &VaeConfig,
    tc: &VaeTrainConfig,
    seed: u64,
) -> Result<(Vae, Vec<EpochLog>)> {
    tc.validate()?;
    if frames.len() < 2 {
        return Err(invalid("need at least two frames to train"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vae = Vae::new(cfg.clone(), &mut rng)?;
    for f in frames {
        vae.check_frame(f)?;
    }
    let (mut train_idx, val_idx) = split_indices(frames.len(), tc.val_fraction, seed ^ 0x5eed);
    let weights: Vec<Vec<f32>> = frames.iter().map(|f| frame_weights(f, cfg)).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(tc.lr));
    let bn = cfg.beta_norm();
    let j = cfg.latent;
    let mut log = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        train_idx.shuffle(&mut rng);
        let mut acc = LossParts::default();
        for chunk in train_idx.chunks(tc.batch_size) {
            let fs: Vec<&DepthFrame> = chunk.iter().map(|&i| &frames[i]).collect();
            let ws: Vec<&[f32]> = chunk.iter().map(|&i| weights[i].as_slice()).collect();
            let eps: Vec<f32> = (0..chunk.len() * j).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b = make_batch(&vae, &fs, &ws, eps)?;
            vae.encoder.zero_grad();
            vae.decoder.zero_grad();
            let p = vae_loss(&mut vae.encoder, &mut vae.decoder, &b, j, bn, true)?;
            if !p.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("training loss {}", p.total),
                });
            }
            adam.step(vec![vae.encoder.params_and_grads(), vae.decoder.params_and_grads()])
                .map_err(|e| Error::Diverged {
                    epoch,
                    detail: e.to_string(),
                })?;
            let n = chunk.len() as f64;
            acc.total += p.total * n;
            acc.recon += p.recon * n;
            acc.kl += p.kl * n;
        }
        let n = train_idx.len() as f64;
        let train = LossParts {
            total: acc.total / n,
            recon: acc.recon / n,
            kl: acc.kl / n,
        };
        let val = evaluate_loss(&mut vae, frames, &val_idx, tc.batch_size)?;
        if !val.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("validation loss {}", val.total),
            });
        }
        info!(
            "vae epoch {epoch}: train {:.3} (recon {:.3}, kl {:.3}) val {:.3}",
            train.total, train.recon, train.kl, val.total
        );
        log.push(EpochLog { epoch, train, val });
    }
    Ok((vae, log))
}

pub fn write_loss_csv(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,train_loss,val_loss,val_recon,val_kl")?;
    for e in log {
        writeln!(f, "{},{},{},{},{}", e.epoch, e.train.total, e.val.total, e.val.recon, e.val.kl)?;
    }
    f.flush()?;
    Ok(())
}

/// Stacks per-frame latent means into a `[N, J]` tensor.
pub fn stack_codes(codes: &[super::model::LatentCode]) -> Result<Tensor<f32>> {
    let j = codes.first().map_or(0, |c| c.mu.len());
    Ok(Tensor::new(&[codes.len(), j], codes.iter().flat_map(|c| c.mu.iter().copied()).collect())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (a, b) = split_indices(100, 0.2, 3);
        assert_eq!((a.len(), b.len()), (80, 20));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.2, 3), (a, b));
    }
}
