//! Bridson dart-throwing Poisson-disc sampling over a rectangle.

use rand::Rng;

use super::world::Rect;

/// Candidate attempts per active point.
const ATTEMPTS: usize = 30;

/// Points in `region` with pairwise distance at least `r`.
pub fn poisson_disc_sample<R: Rng + ?Sized>(region: Rect, r: f64, rng: &mut R) -> Vec<[f64; 2]> {
    if !(r > 0.0) || !(region.width() > 0.0) || !(region.height() > 0.0) {
        return Vec::new();
    }
    let cell = r / std::f64::consts::SQRT_2;
    let nx = (region.width() / cell).ceil() as usize + 1;
    let ny = (region.height() / cell).ceil() as usize + 1;
    let mut grid: Vec<Option<u32>> = vec![None; nx * ny];
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut active: Vec<usize> = Vec::new();

    let index = |p: [f64; 2]| -> (usize, usize) {
        let cx = (((p[0] - region.x0) / cell) as usize).min(nx - 1);
        let cy = (((p[1] - region.y0) / cell) as usize).min(ny - 1);
        (cx, cy)
    };
    let fits = |p: [f64; 2], points: &[[f64; 2]], grid: &[Option<u32>]| -> bool {
        let (cx, cy) = index(p);
        let (x0, x1) = (cx.saturating_sub(2), (cx + 2).min(nx - 1));
        let (y0, y1) = (cy.saturating_sub(2), (cy + 2).min(ny - 1));
        for gy in y0..=y1 {
            for gx in x0..=x1 {
                if let Some(j) = grid[gy * nx + gx] {
                    let q = points[j as usize];
                    if (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) < r * r {
                        return false;
                    }
                }
            }
        }
        true
    };

    let first = [
        rng.gen_range(region.x0..region.x1),
        rng.gen_range(region.y0..region.y1),
    ];
    let (cx, cy) = index(first);
    grid[cy * nx + cx] = Some(0);
    points.push(first);
    active.push(0);

    while !active.is_empty() {
        let k = rng.gen_range(0..active.len());
        let base = points[active[k]];
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            // Uniform by area in the annulus [r, 2r].
            let rad = (rng.gen_range(1.0..4.0f64)).sqrt() * r;
            let p = [base[0] + rad * ang.cos(), base[1] + rad * ang.sin()];
            if !region.contains(p) || !fits(p, &points, &grid) {
                continue;
            }
            let (cx, cy) = index(p);
            grid[cy * nx + cx] = Some(points.len() as u32);
            active.push(points.len());
            points.push(p);
            placed = true;
            break;
        }
        if !placed {
            active.swap_remove(k);
        }
    }
    points
}

/// Upper bound on the number of `r`-separated points in `area` from
/// hexagonal packing.
pub fn packing_bound(area: f64, r: f64) -> f64 {
    2.0 / (3f64.sqrt() * r * r) * area
}
