//! Masked, semantically weighted reconstruction loss, KL divergence to the
//! standard normal prior, and their gradients.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-instance weight constants: an instance covering `p_k > p_min` pixels
/// gets weight `max(w_const / p_k, nu_min)`; every other pixel weighs 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticWeights {
    pub w_const: f64,
    pub nu_min: f64,
    pub p_min: usize,
}

impl SemanticWeights {
    /// Constants for 270x480 frames.
    pub const FULL_SCALE: SemanticWeights = SemanticWeights {
        w_const: 6000.0,
        nu_min: 15.0,
        p_min: 40,
    };

    /// Full-scale constants with `w_const` and `p_min` scaled by the pixel
    /// ratio `h w / (270 * 480)`, so an instance covering the same image
    /// fraction receives the same weight.
    pub fn scaled_to(h: usize, w: usize) -> Self {
        let ratio = (h * w) as f64 / (270.0 * 480.0);
        Self {
            w_const: Self::FULL_SCALE.w_const * ratio,
            nu_min: Self::FULL_SCALE.nu_min,
            p_min: ((Self::FULL_SCALE.p_min as f64 * ratio).round() as usize).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_const > 0.0) || !(self.nu_min >= 1.0) || self.p_min < 1 {
            return Err(invalid("semantic weights need w_const > 0, nu_min >= 1, p_min >= 1"));
        }
        Ok(())
    }

    /// Weight of an instance with `p_k` pixels.
    pub fn instance_weight(&self, p_k: usize) -> f64 {
        if p_k > self.p_min {
            (self.w_const / p_k as f64).max(self.nu_min)
        } else {
            1.0
        }
    }
}

/// Per-pixel weight grid for an instance-ID grid (0 = background).
pub fn semantic_weight_mask(seg: &[u16], c: &SemanticWeights) -> Vec<f32> {
    let mut counts: HashMap<u16, usize> = HashMap::new();
    for &s in seg {
        if s > 0 {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    seg.iter()
        .map(|&s| if s == 0 { 1.0 } else { c.instance_weight(counts[&s]) as f32 })
        .collect()
}

fn check_len(n: usize, others: &[usize], what: &str) -> Result<()> {
    if others.iter().any(|m| *m != n) {
        return Err(invalid(format!("{what}: grid lengths {n} vs {others:?}")));
    }
    Ok(())
}

/// `sum((x - x_recon)^2 * x_val * weight)`.
pub fn recon_loss(x: &[f32], x_recon: &[f32], val: &[u8], weight: &[f32]) -> Result<f64> {
    check_len(x.len(), &[x_recon.len(), val.len(), weight.len()], "recon_loss")?;
    Ok(x.iter()
        .zip(x_recon)
        .zip(val.iter().zip(weight))
        .filter(|(_, (v, _))| **v != 0)
        .map(|((a, b), (_, w))| {
            let d = *a as f64 - *b as f64;
            d * d * *w as f64
        })
        .sum())
}

/// Gradient of [`recon_loss`] with respect to `x_recon`, times `scale`.
pub fn recon_loss_grad(x: &[f32], x_recon: &[f32], val: &[u8], weight: &[f32], scale: f32) -> Vec<f32> {
    x.iter()
        .zip(x_recon)
        .zip(val.iter().zip(weight))
        .map(|((a, b), (v, w))| if *v != 0 { 2.0 * (*b - *a) * *w * scale } else { 0.0 })
        .collect()
}

/// `KL(N(mu, diag(exp(logvar))) || N(0, I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar))`.
pub fn kl_loss(mu: &[f32], logvar: &[f32]) -> Result<f64> {
    check_len(mu.len(), &[logvar.len()], "kl_loss")?;
    if mu.iter().chain(logvar).any(|v| !v.is_finite()) {
        return Err(invalid("kl_loss: non-finite input"));
    }
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let (m, lv) = (*m as f64, *lv as f64);
            -0.5 * (1.0 + lv - m * m - lv.exp())
        })
        .sum())
}

/// Gradients of [`kl_loss`] times `scale`: `(mu, (exp(logvar) - 1) / 2)`.
pub fn kl_loss_grad(mu: &[f32], logvar: &[f32], scale: f32) -> (Vec<f32>, Vec<f32>) {
    let dmu = mu.iter().map(|m| m * scale).collect();
    let dlv = logvar.iter().map(|lv| 0.5 * (lv.exp() - 1.0) * scale).collect();
    (dmu, dlv)
}

/// `beta * J / (H W)`.
pub fn beta_norm(beta: f64, j: usize, h: usize, w: usize) -> f64 {
    beta * j as f64 / (h * w) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_table_full_scale() {
        let c = SemanticWeights::FULL_SCALE;
        assert_eq!(c.instance_weight(300), 20.0);
        assert_eq!(c.instance_weight(1000), 15.0);
        assert_eq!(c.instance_weight(30), 1.0);
        assert_eq!(c.instance_weight(40), 1.0);
        assert_eq!(c.instance_weight(41), 6000.0 / 41.0);
    }

    #[test]
    fn mask_counts_instances() {
        let c = SemanticWeights {
            w_const: 12.0,
            nu_min: 1.5,
            p_min: 1,
        };
        let seg = [0, 1, 1, 2, 3, 3, 3, 3];
        let m = semantic_weight_mask(&seg, &c);
        // instance 1: 12/2 = 6; instance 2: p = 1 <= p_min -> 1; instance 3: 12/4 = 3.
        assert_eq!(m, vec![1.0, 6.0, 6.0, 1.0, 3.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn desk_scale_constants() {
        let c = SemanticWeights::scaled_to(60, 80);
        assert!((c.w_const - 6000.0 * 4800.0 / 129600.0).abs() < 1e-9);
        assert_eq!(c.p_min, 1);
        assert_eq!(c.nu_min, 15.0);
    }

    #[test]
    fn recon_examples() {
        let x = [0.5f32, 0.5, 0.5, 0.5];
        let r = [0.6f32, 0.5, 0.5, 0.3];
        let l = recon_loss(&x, &r, &[1, 1, 1, 1], &[1.0; 4]).unwrap();
        assert!((l - 0.05).abs() < 1e-6);
        assert_eq!(recon_loss(&x, &x, &[1, 1, 1, 1], &[1.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_loss(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(kl_loss(&[1.0], &[0.0]).unwrap(), 0.5);
        let v = kl_loss(&[0.0], &[1.0]).unwrap();
        assert!((v - (std::f64::consts::E - 2.0) / 2.0).abs() < 1e-7);
        assert!(kl_loss(&[f32::NAN], &[0.0]).is_err());
    }

    #[test]
    fn beta_norm_scales() {
        assert_eq!(beta_norm(1.0, 128, 270, 480), 128.0 / 129600.0);
        assert!((beta_norm(1.0, 32, 60, 80) - 6.6667e-3).abs() < 1e-6);
    }
}
