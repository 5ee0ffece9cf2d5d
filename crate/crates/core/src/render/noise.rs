//! Synthetic stereo-sensor corruption: blob dropout, one-sided stereo
//! shadows, distance-dependent thin-structure dropout and quantization.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::frame::DepthFrame;
use crate::error::{invalid, Result};

/// Corruption parameters. Depth-related quantities are in normalized units
/// (depth divided by the camera's maximum range).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Mean number of invalid blobs per frame.
    pub blob_rate: f64,
    /// Blob radius range (pixels).
    pub blob_radius: [f64; 2],
    /// Minimum inverse-depth jump `1/x_near - 1/x_far` that casts a shadow.
    pub shadow_threshold: f64,
    /// Shadow width in pixels per unit inverse-depth jump; 0 disables.
    pub shadow_gain: f64,
    /// Thin-instance dropout probability at depth 0 and at full range;
    /// linearly interpolated in between.
    pub thin_dropout: [f64; 2],
    /// Depth quantization step; 0 disables.
    pub quantization: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            blob_rate: 2.0,
            blob_radius: [1.5, 5.0],
            shadow_threshold: 1.0,
            shadow_gain: 0.4,
            thin_dropout: [0.2, 0.8],
            quantization: 0.002,
        }
    }
}

impl NoiseParams {
    /// Every corruption disabled.
    pub fn none() -> Self {
        Self {
            blob_rate: 0.0,
            blob_radius: [1.0, 1.0],
            shadow_threshold: 0.0,
            shadow_gain: 0.0,
            thin_dropout: [0.0, 0.0],
            quantization: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs_ok = self.thin_dropout.iter().all(|p| (0.0..=1.0).contains(p));
        if !probs_ok {
            return Err(invalid("thin dropout probabilities must lie in [0, 1]"));
        }
        if !(self.blob_rate >= 0.0 && self.shadow_gain >= 0.0 && self.quantization >= 0.0 && self.shadow_threshold >= 0.0) {
            return Err(invalid("noise rates must be non-negative"));
        }
        if !(self.blob_radius[0] > 0.0 && self.blob_radius[1] >= self.blob_radius[0]) {
            return Err(invalid("blob radius range invalid"));
        }
        Ok(())
    }

    /// Thin-instance dropout probability at normalized depth `x`.
    pub fn thin_dropout_at(&self, x: f64) -> f64 {
        let [a, b] = self.thin_dropout;
        (a + (b - a) * x.clamp(0.0, 1.0)).clamp(0.0, 1.0)
    }
}

/// Pixels invalidated by stereo shadows: for every row, where the left
/// neighbour is farther than the right one by more than the threshold in
/// inverse depth, a band of `round(gain * jump)` pixels is removed on the
/// far side, left of the edge.
pub fn shadow_mask(frame: &DepthFrame, p: &NoiseParams) -> Vec<bool> {
    let (h, w) = frame.dims();
    let mut mask = vec![false; h * w];
    if p.shadow_gain <= 0.0 {
        return mask;
    }
    let x = frame.x();
    for r in 0..h {
        for c in 1..w {
            let (l, rt) = (r * w + c - 1, r * w + c);
            if !frame.is_valid(rt) {
                continue;
            }
            let inv_near = 1.0 / x[rt] as f64;
            let inv_far = if frame.is_valid(l) { 1.0 / x[l] as f64 } else { 0.0 };
            let jump = inv_near - inv_far;
            if jump <= p.shadow_threshold || !frame.is_valid(l) {
                continue;
            }
            let width = (p.shadow_gain * jump).round() as usize;
            for k in 1..=width.min(c) {
                mask[r * w + c - k] = true;
            }
        }
    }
    mask
}

/// Applies the corruption model. Frame invariants are preserved.
pub fn corrupt<R: Rng + ?Sized>(frame: &DepthFrame, p: &NoiseParams, rng: &mut R) -> DepthFrame {
    let (h, w) = frame.dims();
    let mut out = frame.clone();
    for (i, s) in shadow_mask(frame, p).into_iter().enumerate() {
        if s {
            out.invalidate(i);
        }
    }
    if p.blob_rate > 0.0 {
        let n = Poisson::new(p.blob_rate).map(|d| d.sample(rng) as usize).unwrap_or(0);
        for _ in 0..n {
            let cy = rng.gen_range(0.0..h as f64);
            let cx = rng.gen_range(0.0..w as f64);
            let ry = rng.gen_range(p.blob_radius[0]..=p.blob_radius[1]);
            let rx = rng.gen_range(p.blob_radius[0]..=p.blob_radius[1]);
            let (r0, r1) = ((cy - ry).floor().max(0.0) as usize, ((cy + ry).ceil() as usize).min(h));
            let (c0, c1) = ((cx - rx).floor().max(0.0) as usize, ((cx + rx).ceil() as usize).min(w));
            for r in r0..r1 {
                for c in c0..c1 {
                    let dy = (r as f64 + 0.5 - cy) / ry;
                    let dx = (c as f64 + 0.5 - cx) / rx;
                    if dx * dx + dy * dy <= 1.0 {
                        out.invalidate(r * w + c);
                    }
                }
            }
        }
    }
    if p.thin_dropout[0] > 0.0 || p.thin_dropout[1] > 0.0 {
        for i in 0..h * w {
            if out.seg()[i] > 0 {
                let prob = p.thin_dropout_at(out.x()[i] as f64);
                if rng.gen_bool(prob) {
                    out.invalidate(i);
                }
            }
        }
    }
    if p.quantization > 0.0 {
        let q = p.quantization;
        for i in 0..h * w {
            if out.is_valid(i) {
                let v = ((out.x()[i] as f64 / q).round() * q).clamp(q, 1.0);
                let seg = out.seg()[i];
                out.set(i, v as f32, seg);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_planes(w: usize, split: usize, far: f32, near: f32) -> DepthFrame {
        let mut f = DepthFrame::invalid(4, w);
        for r in 0..4 {
            for c in 0..w {
                f.set(r * w + c, if c < split { far } else { near }, 0);
            }
        }
        f
    }

    #[test]
    fn zero_rates_are_identity() {
        let f = two_planes(20, 10, 0.6, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(corrupt(&f, &NoiseParams::none(), &mut rng), f);
    }

    #[test]
    fn shadow_band_on_left_side_only() {
        let f = two_planes(20, 10, 0.5, 0.1);
        let p = NoiseParams {
            shadow_gain: 0.5,
            shadow_threshold: 1.0,
            ..NoiseParams::none()
        };
        // jump = 1/0.1 - 1/0.5 = 8 -> width 4.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = corrupt(&f, &p, &mut rng);
        for r in 0..4 {
            for c in 0..20 {
                let invalid = !g.is_valid(r * 20 + c);
                assert_eq!(invalid, (6..10).contains(&c), "r {r} c {c}");
            }
        }
        // Mirrored scene (near on the left) casts no shadow.
        let g = corrupt(&f.flipped(), &p, &mut rng);
        assert_eq!(g.valid_count(), g.len());
    }

    #[test]
    fn far_rod_mostly_dropped() {
        let mut f = DepthFrame::invalid(10, 10);
        for r in 0..10 {
            f.set(r * 10 + 5, 0.9, 3);
        }
        let p = NoiseParams {
            thin_dropout: [0.1, 0.8],
            ..NoiseParams::none()
        };
        let mut dropped = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            dropped += 10 - corrupt(&f, &p, &mut rng).valid_count();
        }
        assert!(dropped as f64 >= 0.5 * 1000.0, "{dropped}");
    }

    #[test]
    fn corruption_keeps_invariants() {
        let f = two_planes(30, 12, 0.7, 0.15);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            corrupt(&f, &NoiseParams::default(), &mut rng).validate().unwrap();
        }
    }
}
