//! Central finite-difference verification (five-point stencil) of analytic gradients, meant to
//! run on `f64` shadow copies of `f32` models.

use rand::Rng;

use crate::network::Network;
use crate::tensor::Tensor;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-3;
/// Maximum accepted relative error between analytic and numeric gradients.
pub const REL_TOLERANCE: f64 = 1e-4;
/// Magnitudes below this floor are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }

    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        let checked = self.checked + other.checked;
        let mut best = if other.max_rel_error > self.max_rel_error {
            other
        } else {
            self
        };
        best.checked = checked;
        best
    }
}

/// Compares `analytic[k]` with the central difference of `eval` with respect
/// to the scalar `access(model, indices[k])`.
pub fn check_indices<M, A, E>(
    model: &mut M,
    indices: &[usize],
    analytic: &[f64],
    mut access: A,
    mut eval: E,
) -> GradCheckReport
where
    A: FnMut(&mut M, usize) -> &mut f64,
    E: FnMut(&M) -> f64,
{
    assert_eq!(indices.len(), analytic.len(), "one analytic value per probed index");
    let mut rep = GradCheckReport::default();
    for (k, &i) in indices.iter().enumerate() {
        let orig = *access(model, i);
        let mut at = |m: &mut M, d: f64| {
            *access(m, i) = orig + d;
            eval(m)
        };
        let f1 = at(model, FD_STEP) - at(model, -FD_STEP);
        let f2 = at(model, 2.0 * FD_STEP) - at(model, -2.0 * FD_STEP);
        *access(model, i) = orig;
        // Fourth-order central stencil; truncation error O(h^4).
        let numeric = (8.0 * f1 - f2) / (12.0 * FD_STEP);
        let e = relative_error(analytic[k], numeric);
        rep.checked += 1;
        if rep.checked == 1 || e > rep.max_rel_error {
            rep.max_rel_error = e;
            rep.worst_index = i;
            rep.worst_analytic = analytic[k];
            rep.worst_numeric = numeric;
        }
    }
    rep
}

/// Convenience form for a plain vector argument.
pub fn check_vector<E>(x: &mut Vec<f64>, analytic: &[f64], mut eval: E) -> GradCheckReport
where
    E: FnMut(&[f64]) -> f64,
{
    let idx: Vec<usize> = (0..x.len()).collect();
    check_indices(x, &idx, analytic, |v, i| &mut v[i], |v| eval(v))
}

/// Up to `max` evenly spread indices from `0..len`.
pub fn probe_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let step = len as f64 / max as f64;
    (0..max).map(|k| ((k as f64 + 0.5) * step) as usize).collect()
}

/// `L = sum(r * y) + 0.5 * sum(y^2)` and its gradient with respect to `y`.
pub fn probe_loss(y: &Tensor<f64>, r: &[f64]) -> (f64, Tensor<f64>) {
    let l = y.data().iter().zip(r).map(|(a, b)| a * b + 0.5 * a * a).sum();
    let g = Tensor::new(y.shape(), y.data().iter().zip(r).map(|(a, b)| a + b).collect()).expect("same shape");
    (l, g)
}

fn param_mut(net: &mut Network<f64>, mut i: usize) -> &mut f64 {
    for layer in net.layers_mut() {
        for p in layer.params_mut() {
            if i < p.len() {
                return &mut p.data_mut()[i];
            }
            i -= p.len();
        }
    }
    panic!("parameter index out of range")
}

/// Checks parameter and input gradients of `net` at `x` under
/// [`probe_loss`] with a random `r`. Returns `None` when a kinked activation
/// input lies too close to its kink for a meaningful finite difference.
pub fn check_network<R: Rng + ?Sized>(mut net: Network<f64>, x: Tensor<f64>, rng: &mut R) -> Option<GradCheckReport> {
    let (y, trace) = net.forward_traced(&x).ok()?;
    if net.min_kink_distance(&trace) < 8.0 * FD_STEP {
        return None;
    }
    let r: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, gy) = probe_loss(&y, &r);
    net.zero_grad();
    let gx = net.backward_traced(&trace, &gy).ok()?;

    let analytic_p: Vec<f64> = net.grads().iter().flat_map(|g| g.data().to_vec()).collect();
    let idx = probe_indices(analytic_p.len(), 150);
    let a: Vec<f64> = idx.iter().map(|i| analytic_p[*i]).collect();
    let mut rep = GradCheckReport::default();
    if !idx.is_empty() {
        let xc = x.clone();
        let r2 = r.clone();
        rep = check_indices(&mut net, &idx, &a, param_mut, |n| probe_loss(&n.infer(&xc).expect("infer"), &r2).0);
    }

    let mut state = (net, x);
    let idx = probe_indices(state.1.len(), 100);
    let a: Vec<f64> = idx.iter().map(|i| gx[*i]).collect();
    let rep_x = check_indices(
        &mut state,
        &idx,
        &a,
        |s, i| &mut s.1.data_mut()[i],
        |s| probe_loss(&s.0.infer(&s.1).expect("infer"), &r).0,
    );
    Some(rep.merge(rep_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_gradient_checks() {
        let mut x = vec![0.5, -1.2, 2.0];
        let analytic: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        let rep = check_vector(&mut x, &analytic, |v| v.iter().map(|a| a * a * a).sum());
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(x, vec![0.5, -1.2, 2.0]);
    }

    #[test]
    fn wrong_gradient_detected() {
        let mut x = vec![1.0];
        let rep = check_vector(&mut x, &[1.0], |v| v[0] * v[0]);
        assert!(!rep.passed());
        assert!((rep.worst_numeric - 2.0).abs() < 1e-9);
    }

    #[test]
    fn probe_indices_spread() {
        assert_eq!(probe_indices(3, 10), vec![0, 1, 2]);
        let p = probe_indices(1000, 10);
        assert_eq!(p.len(), 10);
        assert!(p.windows(2).all(|w| w[0] < w[1]) && *p.last().unwrap() < 1000);
    }
}
