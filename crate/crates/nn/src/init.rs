//! Seeded parameter initialisation.

use rand::Rng;

use crate::layers::LEAKY_SLOPE;
use crate::tensor::{Scalar, Tensor};

/// He-uniform initialisation for leaky-rectifier networks.
pub fn kaiming_uniform<F: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<F> {
    let gain = 2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE);
    let bound = (3.0 * gain / fan_in.max(1) as f64).sqrt();
    uniform(shape, bound, rng)
}

pub fn uniform<F: Scalar, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<F> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| F::of(rng.gen_range(-bound..=bound))).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}
