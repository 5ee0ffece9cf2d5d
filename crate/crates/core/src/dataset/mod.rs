//! Frame sets and collision datapoints: labeling, augmentation, latent
//! encoding, splitting and the `THDS` container.

pub mod container;
pub mod import;
pub mod label;

use rand::Rng;

pub use container::{Dataset, DatasetInfo, SampleKind};
pub use import::{frame_from_pgm, import_depth_images, ImportReport};
pub use label::{flip_augment, label_episode, CollisionDatapoint, FrameDatapoint, LabelConfig, LatentDatapoint};

use crate::error::{invalid, Result};
use crate::render::{corrupt, DepthFrame, NoiseParams};
use crate::vae::{split_indices, Vae};

/// Seeded disjoint split; `ratio` is the training fraction.
pub fn split<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let (a, b) = split_indices(items.len(), 1.0 - ratio, seed);
    Ok((a.iter().map(|&i| items[i].clone()).collect(), b.iter().map(|&i| items[i].clone()).collect()))
}

/// Replaces every frame by the latent mean of a frozen encoder, keeping order.
pub fn encode_dataset(samples: &[FrameDatapoint], vae: &Vae) -> Result<Vec<LatentDatapoint>> {
    const CHUNK: usize = 32;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(CHUNK) {
        let frames: Vec<&DepthFrame> = chunk.iter().map(|s| &s.input).collect();
        let codes = vae.encode_batch(&frames)?;
        out.extend(chunk.iter().zip(codes).map(|(s, c)| s.with_input(c.mu)));
    }
    Ok(out)
}

/// Corrupts the frame of each sample independently with probability
/// `fraction`; the sample count is unchanged.
pub fn corrupt_samples<R: Rng + ?Sized>(
    samples: &[FrameDatapoint],
    noise: &NoiseParams,
    fraction: f64,
    rng: &mut R,
) -> Vec<FrameDatapoint> {
    samples
        .iter()
        .map(|s| {
            if rng.gen_bool(fraction.clamp(0.0, 1.0)) {
                s.with_input(corrupt(&s.input, noise, rng))
            } else {
                s.clone()
            }
        })
        .collect()
}

/// Appends the mirror image of every sample.
pub fn with_flips(samples: Vec<FrameDatapoint>) -> Vec<FrameDatapoint> {
    let flipped: Vec<FrameDatapoint> = samples.iter().map(flip_augment).collect();
    samples.into_iter().chain(flipped).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_union() {
        let items: Vec<u32> = (0..100).collect();
        let (a, b) = split(&items, 0.8, 11).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        let mut u: Vec<u32> = a.iter().chain(&b).copied().collect();
        u.sort();
        assert_eq!(u, items);
        assert_eq!(split(&items, 0.8, 11).unwrap(), (a, b));
        assert!(split(&items, 1.0, 0).is_err());
    }
}
