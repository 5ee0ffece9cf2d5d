//! 2D FFT and top-k spectral reconstruction baseline.
//!
//! A conjugate-symmetric pair of bins counts as one of the `k` retained
//! coefficients (self-conjugate bins such as DC count alone), so the
//! reconstruction is real by construction. `k` complex values correspond to
//! `2k` real numbers, the budget a `2k`-dimensional latent code gets.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Default number of retained coefficients.
pub const DEFAULT_K: usize = 64;

fn transform(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for r in data.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut buf = vec![Complex64::default(); h];
    for c in 0..w {
        for r in 0..h {
            buf[r] = data[r * w + c];
        }
        col.process(&mut buf);
        for r in 0..h {
            data[r * w + c] = buf[r];
        }
    }
}

/// Unnormalized forward 2D DFT of a row-major `h x w` grid.
pub fn fft2(grid: &[f64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    if grid.len() != h * w || h == 0 || w == 0 {
        return Err(invalid(format!("fft2: {} values for {h}x{w}", grid.len())));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(invalid("fft2: non-finite input"));
    }
    let mut data: Vec<Complex64> = grid.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    transform(&mut data, h, w, false);
    Ok(data)
}

/// Inverse 2D DFT including the `1/(h w)` normalization.
pub fn ifft2(spectrum: &[Complex64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    if spectrum.len() != h * w || h == 0 || w == 0 {
        return Err(invalid(format!("ifft2: {} values for {h}x{w}", spectrum.len())));
    }
    let mut data = spectrum.to_vec();
    transform(&mut data, h, w, true);
    let s = 1.0 / (h * w) as f64;
    data.iter_mut().for_each(|v| *v *= s);
    Ok(data)
}

/// Index of the conjugate partner of bin `i`.
pub fn conjugate_index(i: usize, h: usize, w: usize) -> usize {
    let (u, v) = (i / w, i % w);
    ((h - u) % h) * w + (w - v) % w
}

/// Spectrum with only the `k` largest-magnitude conjugate classes kept.
/// Ties break toward the lower bin index.
pub fn topk_spectrum(spectrum: &[Complex64], h: usize, w: usize, k: usize) -> Vec<Complex64> {
    let mut classes: Vec<(usize, f64)> = (0..h * w)
        .filter(|&i| i <= conjugate_index(i, h, w))
        .map(|i| (i, spectrum[i].norm()))
        .collect();
    classes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = vec![Complex64::default(); h * w];
    for &(i, _) in classes.iter().take(k) {
        let j = conjugate_index(i, h, w);
        out[i] = spectrum[i];
        out[j] = spectrum[j];
    }
    out
}

/// Reconstruction from the top-`k` coefficients before clamping, with the
/// largest imaginary residue of the inverse transform.
pub fn topk_unclamped(grid: &[f64], h: usize, w: usize, k: usize) -> Result<(Vec<f64>, f64)> {
    if k == 0 || k > h * w {
        return Err(invalid(format!("k = {k} outside 1..={}", h * w)));
    }
    let spec = fft2(grid, h, w)?;
    let kept = topk_spectrum(&spec, h, w, k);
    let inv = ifft2(&kept, h, w)?;
    let resid = inv.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    Ok((inv.iter().map(|c| c.re).collect(), resid))
}

/// Top-`k` reconstruction clamped to `[0, 1]`.
pub fn fft_topk_reconstruct(grid: &[f64], h: usize, w: usize, k: usize) -> Result<Vec<f64>> {
    let (re, _) = topk_unclamped(grid, h, w, k)?;
    Ok(re.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Number of real values carried by `k` retained complex coefficients.
pub fn real_budget(k: usize) -> usize {
    2 * k
}
