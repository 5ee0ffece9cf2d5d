//! Reparameterised sampling `z = mu + exp(logvar / 2) * eps`.

use crate::error::{NnError, Result};
use crate::tensor::Scalar;

/// Bound applied to log-variances before exponentiation.
pub const LOGVAR_CLAMP: f64 = 10.0;

#[inline]
pub fn clamp_logvar<F: Scalar>(lv: F) -> F {
    lv.max(F::of(-LOGVAR_CLAMP)).min(F::of(LOGVAR_CLAMP))
}

fn check(mu: &[impl Sized], logvar: &[impl Sized], eps: &[impl Sized]) -> Result<()> {
    if mu.len() != logvar.len() || mu.len() != eps.len() {
        return Err(NnError::DimensionMismatch(format!(
            "latent sample: mu {}, logvar {}, eps {}",
            mu.len(),
            logvar.len(),
            eps.len()
        )));
    }
    Ok(())
}

pub fn sample_latent<F: Scalar>(mu: &[F], logvar: &[F], eps: &[F]) -> Result<Vec<F>> {
    check(mu, logvar, eps)?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| *m + (clamp_logvar(*lv) * F::of(0.5)).exp() * *e)
        .collect())
}

/// Gradients of a loss with respect to `mu` and `logvar` given `dL/dz`.
/// The clamp passes no gradient outside `[-LOGVAR_CLAMP, LOGVAR_CLAMP]`.
pub fn sample_latent_backward<F: Scalar>(logvar: &[F], eps: &[F], dz: &[F]) -> Result<(Vec<F>, Vec<F>)> {
    check(logvar, eps, dz)?;
    let dmu = dz.to_vec();
    let dlv = logvar
        .iter()
        .zip(eps)
        .zip(dz)
        .map(|((lv, e), g)| {
            if lv.abs() > F::of(LOGVAR_CLAMP) {
                F::zero()
            } else {
                *g * F::of(0.5) * (*lv * F::of(0.5)).exp() * *e
            }
        })
        .collect();
    Ok((dmu, dlv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_returns_mean() {
        let z = sample_latent(&[0.3f64, -1.0], &[2.0, -4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(z, vec![0.3, -1.0]);
    }

    #[test]
    fn vanishing_sigma_returns_mean() {
        // logvar -> -inf is clamped to -10, leaving sigma = e^-5.
        let z = sample_latent(&[0.3f64], &[f64::NEG_INFINITY], &[5.0]).unwrap();
        assert!((z[0] - 0.3).abs() <= 5.0 * (-5.0f64).exp() + 1e-15, "{}", z[0]);
        let z = sample_latent(&[0.3f64], &[-1e6], &[0.0]).unwrap();
        assert_eq!(z[0], 0.3);
    }

    #[test]
    fn direct_formula() {
        // mu = 1, sigma = 2 (logvar = ln 4), eps = 0.5
        let z = sample_latent(&[1.0f64], &[4.0f64.ln()], &[0.5]).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(sample_latent(&[1.0f32], &[0.0, 0.0], &[0.0]).is_err());
    }
}
