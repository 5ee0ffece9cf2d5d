//! Unscented-transform sigma points of the partial state.

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use crate::error::{invalid, Result};

/// State dimension `gamma`.
pub const GAMMA: usize = 6;

/// Default `lambda_u = 3 - gamma`.
pub const DEFAULT_LAMBDA: f64 = 3.0 - GAMMA as f64;

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPointSet {
    /// `2 gamma + 1` points; the first is the mean.
    pub points: Vec<[f64; GAMMA]>,
    /// Mean weights (also used for the covariance).
    pub weights: Vec<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> [f64; GAMMA] {
        let mut m = [0.0; GAMMA];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for k in 0..GAMMA {
                m[k] += w * p[k];
            }
        }
        m
    }

    pub fn covariance(&self) -> Matrix6<f64> {
        let m = Vector6::from(self.mean());
        let mut c = Matrix6::zeros();
        for (p, w) in self.points.iter().zip(&self.weights) {
            let d = Vector6::from(*p) - m;
            c += d * d.transpose() * *w;
        }
        c
    }

    /// Distinct points with `|w| / sum|w|` summed over duplicates, in first
    /// occurrence order. These weights are non-negative and sum to 1.
    pub fn unique_normalized(&self) -> Vec<([f64; GAMMA], f64)> {
        let total: f64 = self.weights.iter().map(|w| w.abs()).sum();
        let mut out: Vec<([f64; GAMMA], f64)> = Vec::new();
        for (p, w) in self.points.iter().zip(&self.weights) {
            let w = w.abs() / total;
            match out.iter_mut().find(|(q, _)| q == p) {
                Some((_, acc)) => *acc += w,
                None => out.push((*p, w)),
            }
        }
        out
    }
}

/// Symmetric square root of a PSD matrix. Eigenvalues down to
/// `-1e-12 * max(1, |Sigma|)` are treated as 0; anything more negative, an
/// asymmetric or non-finite matrix is rejected.
pub fn psd_sqrt(sigma: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(invalid("covariance has non-finite entries"));
    }
    let scale = sigma.abs().max().max(1.0);
    if (sigma - sigma.transpose()).abs().max() > 1e-12 * scale {
        return Err(invalid("covariance is not symmetric"));
    }
    let eig = SymmetricEigen::new(*sigma);
    if eig.eigenvalues.iter().any(|l| *l < -1e-12 * scale) {
        return Err(invalid(format!("covariance is not positive semi-definite: eigenvalues {:?}", eig.eigenvalues.as_slice())));
    }
    let d = Matrix6::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `m_1 = s`, `m_{1+j} = s + col_j`, `m_{1+gamma+j} = s - col_j` with
/// `col_j` the `j`-th column of `sqrt((gamma + lambda) Sigma)`; weights
/// `lambda / (gamma + lambda)` and `1 / (2 (gamma + lambda))`.
pub fn sigma_points(mean: &[f64; GAMMA], sigma: &Matrix6<f64>, lambda: f64) -> Result<SigmaPointSet> {
    let n = GAMMA as f64;
    if !(n + lambda > 0.0) {
        return Err(invalid(format!("gamma + lambda = {} must be positive", n + lambda)));
    }
    let root = psd_sqrt(&(sigma * (n + lambda)))?;
    let mut points = Vec::with_capacity(2 * GAMMA + 1);
    points.push(*mean);
    for sign in [1.0, -1.0] {
        for j in 0..GAMMA {
            let mut p = *mean;
            for k in 0..GAMMA {
                p[k] += sign * root[(k, j)];
            }
            points.push(p);
        }
    }
    let mut weights = vec![1.0 / (2.0 * (n + lambda)); 2 * GAMMA + 1];
    weights[0] = lambda / (n + lambda);
    Ok(SigmaPointSet { points, weights })
}
