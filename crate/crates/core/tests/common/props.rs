//! Exact property suites for the spectral baseline, the unscented transform
//! and the loss formulas. Each returns the list of violations.

use nalgebra::{DMatrix, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use thinnav::fft::{conjugate_index, fft2, ifft2, topk_unclamped};
use thinnav::planner::{
    build_library, sigma_points, uncertainty_aware_scores, CollisionPredictor, GoalVector, LibraryConfig,
    MotionPrimitiveLibrary, Observation, DEFAULT_LAMBDA, GAMMA,
};
use thinnav::render::DepthFrame;
use thinnav::sim::{PartialState, StateCovariance};
use thinnav::vae::{beta_norm, kl_loss, recon_loss, semantic_weight_mask, SemanticWeights};

use std::f64::consts::PI;

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

/// Direct O(N^2) DFT.
pub fn naive_dft(grid: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::default();
            for r in 0..h {
                for c in 0..w {
                    let a = -2.0 * PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                    acc += Complex64::from_polar(grid[r * w + c], a);
                }
            }
            out[u * w + v] = acc;
        }
    }
    out
}

pub fn sq_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of `m` cosines on distinct, non-self-conjugate frequency classes.
pub fn cosine_image(h: usize, w: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut used: Vec<usize> = Vec::new();
    let mut img = vec![0.0; h * w];
    while used.len() < m {
        let i = rng.gen_range(1..h * w);
        let j = conjugate_index(i, h, w);
        if i == j || used.contains(&i) || used.contains(&j) {
            continue;
        }
        used.push(i);
        let (u, v) = ((i / w) as f64, (i % w) as f64);
        let amp = rng.gen_range(0.05..0.5);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for r in 0..h {
            for c in 0..w {
                img[r * w + c] += amp * (2.0 * PI * (u * r as f64 / h as f64 + v * c as f64 / w as f64) + phase).cos();
            }
        }
    }
    img
}

pub fn fft_suite() -> Vec<String> {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(h, w) in &[(5, 7), (6, 8), (9, 4)] {
        let g: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fast = fft2(&g, h, w).unwrap();
        let slow = naive_dft(&g, h, w);
        let d = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        check(&mut f, d < 1e-9, || format!("fft2 differs from direct DFT on {h}x{w} by {d:e}"));
    }
    for _ in 0..10 {
        let (h, w) = (60, 80);
        let g: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let back = ifft2(&fft2(&g, h, w).unwrap(), h, w).unwrap();
        let d = back.iter().zip(&g).map(|(a, b)| (a.re - b).abs().max(a.im.abs())).fold(0.0, f64::max);
        check(&mut f, d < 1e-5, || format!("round-trip error {d:e}"));
        let (full, _) = topk_unclamped(&g, h, w, h * w).unwrap();
        let d = full.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check(&mut f, d < 1e-5, || format!("keeping every coefficient leaves error {d:e}"));
    }
    for k in [2usize, 8, 16, 64] {
        for _ in 0..5 {
            let (h, w) = (60, 80);
            let m = rng.gen_range(1..=k / 2);
            let img = cosine_image(h, w, m, &mut rng);
            let (rec, resid) = topk_unclamped(&img, h, w, k).unwrap();
            let d = rec.iter().zip(&img).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check(&mut f, d < 1e-9 && resid < 1e-9, || {
                format!("{m} cosines with k = {k}: error {d:e}, imaginary residue {resid:e}")
            });
        }
    }
    let (h, w) = (12, 16);
    for _ in 0..5 {
        let g: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=h * w / 2 + 2 {
            let (rec, resid) = topk_unclamped(&g, h, w, k).unwrap();
            let e = sq_error(&rec, &g);
            check(&mut f, e <= prev + 1e-12 && resid < 1e-9, || format!("error rose to {e} at k = {k} (was {prev})"));
            prev = e;
        }
        check(&mut f, prev < 1e-20, || format!("all classes kept, error {prev:e}"));
    }
    f
}

/// `A A^T` for a random 6x6 `A`, occasionally rank deficient.
pub fn random_psd(rng: &mut ChaCha8Rng) -> Matrix6<f64> {
    let cols = rng.gen_range(1..=GAMMA);
    let a = DMatrix::<f64>::from_fn(GAMMA, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &a * a.transpose();
    Matrix6::from_fn(|r, c| s[(r, c)])
}

/// Returns a per-step score that depends on the state and sequence.
struct Stub;

impl CollisionPredictor for Stub {
    fn predict(
        &mut self,
        _obs: &Observation,
        states: &[[f64; GAMMA]],
        library: &MotionPrimitiveLibrary,
    ) -> thinnav::Result<Vec<Vec<Vec<f32>>>> {
        Ok(states
            .iter()
            .map(|s| {
                (0..library.len())
                    .map(|m| {
                        (0..library.horizon)
                            .map(|k| (0.5 + 0.5 * (s[0] * 1.3 + s[4] - m as f64 * 0.7 + k as f64 * 0.4).sin()) as f32)
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }
}

pub fn ut_suite() -> Vec<String> {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..100 {
        let sigma = random_psd(&mut rng);
        let mean: [f64; GAMMA] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let set = sigma_points(&mean, &sigma, DEFAULT_LAMBDA).unwrap();
        check(&mut f, set.len() == 2 * GAMMA + 1, || format!("matrix {t}: {} points", set.len()));
        let wsum: f64 = set.weights.iter().sum();
        let dm = set.mean().iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dc = (set.covariance() - sigma).abs().max();
        check(&mut f, dm <= 1e-10 && dc <= 1e-10 && (wsum - 1.0).abs() <= 1e-12, || {
            format!("matrix {t}: mean error {dm:e}, covariance error {dc:e}, weight sum {wsum}")
        });
    }
    let library = build_library(&LibraryConfig::default()).unwrap();
    for _ in 0..5 {
        let state: [f64; GAMMA] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let set = sigma_points(&state, &Matrix6::zeros(), DEFAULT_LAMBDA).unwrap();
        check(&mut f, set.points.iter().all(|p| *p == state), || "zero covariance spread the points".into());
        let obs = Observation {
            frame: DepthFrame::invalid(4, 4),
            state: PartialState(state),
            covariance: StateCovariance(Matrix6::zeros()),
            goal: GoalVector::new([1.0, 0.0, 0.0]).unwrap(),
        };
        let scores = uncertainty_aware_scores(&mut Stub, &obs, &set, &library).unwrap();
        let single = Stub.predict(&obs, &[state], &library).unwrap();
        for (m, s) in scores.iter().enumerate() {
            let expect = single[0][m].iter().map(|v| *v as f64).fold(0.0, f64::max);
            check(&mut f, (s - expect).abs() < 1e-12, || format!("sequence {m}: c_uac {s} vs single point {expect}"));
        }
    }
    f
}

pub fn loss_suite() -> Vec<String> {
    let mut f = Vec::new();
    let bn = beta_norm(1.0, 128, 270, 480);
    check(&mut f, bn == 128.0 / 129600.0, || format!("beta_norm at 270x480, J = 128: {bn}"));
    let bn = beta_norm(2.0, 32, 60, 80);
    check(&mut f, bn == 64.0 / 4800.0, || format!("beta_norm at 60x80, J = 32, beta 2: {bn}"));
    let c = SemanticWeights::FULL_SCALE;
    for (p, w) in [(300, 20.0), (1000, 15.0), (30, 1.0)] {
        let got = c.instance_weight(p);
        check(&mut f, got == w, || format!("weight for p_k = {p}: {got}, expected {w}"));
    }
    let mut seg = vec![0u16; 1400];
    seg[..300].iter_mut().for_each(|s| *s = 1);
    seg[300..1300].iter_mut().for_each(|s| *s = 2);
    seg[1300..1330].iter_mut().for_each(|s| *s = 3);
    let mask = semantic_weight_mask(&seg, &c);
    let expect = |s: u16| match s {
        1 => 20.0,
        2 => 15.0,
        _ => 1.0,
    };
    check(&mut f, seg.iter().zip(&mask).all(|(s, m)| *m == expect(*s)), || "weight mask disagrees with the table".into());
    let kl0 = kl_loss(&[0.0; 8], &[0.0; 8]).unwrap();
    let kl1 = kl_loss(&[1.0], &[0.0]).unwrap();
    check(&mut f, kl0 == 0.0 && kl1 == 0.5, || format!("KL(0,1) = {kl0}, KL(1,1) = {kl1}"));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in 0..50 {
        let n = rng.gen_range(1..200);
        let x: Vec<f32> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r: Vec<f32> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let val: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let w: Vec<f32> = (0..n).map(|_| rng.gen_range(1.0..20.0)).collect();
        let base = recon_loss(&x, &r, &val, &w).unwrap();
        let (mut x2, mut r2) = (x.clone(), r.clone());
        for i in 0..n {
            if val[i] == 0 {
                x2[i] = rng.gen_range(-5.0..5.0);
                r2[i] = rng.gen_range(-5.0..5.0);
            }
        }
        let moved = recon_loss(&x2, &r2, &val, &w).unwrap();
        check(&mut f, base == moved, || format!("case {t}: invalid pixels changed the loss {base} -> {moved}"));
    }
    f
}
