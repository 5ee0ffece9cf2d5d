//! Obstacle geometry, the world container with a uniform 2D bucket grid,
//! ray intersection and sphere collision queries.

use nalgebra::Vector3;

/// Obstacles with a minimum cross-section below this width are "thin".
pub const THIN_WIDTH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Vertical cylinder.
    Cylinder { radius: f64 },
    /// Vertical box with half extents along its local x/y axes.
    Box { half: [f64; 2], yaw: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub z0: f64,
    pub z1: f64,
    pub shape: Shape,
    /// Semantic instance ID; 0 unless the obstacle is thin.
    pub instance: u16,
}

impl Obstacle {
    pub fn cylinder(center: [f64; 2], radius: f64, z0: f64, z1: f64) -> Self {
        Self {
            center,
            z0,
            z1,
            shape: Shape::Cylinder { radius },
            instance: 0,
        }
    }

    pub fn cuboid(center: [f64; 2], half: [f64; 2], yaw: f64, z0: f64, z1: f64) -> Self {
        Self {
            center,
            z0,
            z1,
            shape: Shape::Box { half, yaw },
            instance: 0,
        }
    }

    /// Smallest horizontal cross-section width.
    pub fn min_width(&self) -> f64 {
        match self.shape {
            Shape::Cylinder { radius } => 2.0 * radius,
            Shape::Box { half, .. } => 2.0 * half[0].min(half[1]),
        }
    }

    pub fn is_thin(&self) -> bool {
        self.min_width() < THIN_WIDTH
    }

    /// Radius of the horizontal bounding circle.
    pub fn bound_radius(&self) -> f64 {
        match self.shape {
            Shape::Cylinder { radius } => radius,
            Shape::Box { half, .. } => half[0].hypot(half[1]),
        }
    }

    /// Euclidean distance from `p` to the solid obstacle (0 inside).
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let dz = (self.z0 - p.z).max(p.z - self.z1).max(0.0);
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        let dr = match self.shape {
            Shape::Cylinder { radius } => (dx.hypot(dy) - radius).max(0.0),
            Shape::Box { half, yaw } => {
                let (s, c) = yaw.sin_cos();
                let lx = c * dx + s * dy;
                let ly = -s * dx + c * dy;
                let ex = (lx.abs() - half[0]).max(0.0);
                let ey = (ly.abs() - half[1]).max(0.0);
                ex.hypot(ey)
            }
        };
        dr.hypot(dz)
    }

    /// Smallest ray parameter `t` in `(t_min, t_max)` at which `o + t d` hits
    /// the obstacle surface.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<f64> {
        let ox = o.x - self.center[0];
        let oy = o.y - self.center[1];
        match self.shape {
            Shape::Cylinder { radius } => intersect_cylinder(ox, oy, o.z, d, radius, self.z0, self.z1, t_min, t_max),
            Shape::Box { half, yaw } => {
                let (s, c) = yaw.sin_cos();
                let lo = [c * ox + s * oy, -s * ox + c * oy, o.z];
                let ld = [c * d.x + s * d.y, -s * d.x + c * d.y, d.z];
                let lo_b = [-half[0], -half[1], self.z0];
                let hi_b = [half[0], half[1], self.z1];
                intersect_slab(&lo, &ld, &lo_b, &hi_b, t_min, t_max)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn intersect_cylinder(
    ox: f64,
    oy: f64,
    oz: f64,
    d: &Vector3<f64>,
    r: f64,
    z0: f64,
    z1: f64,
    t_min: f64,
    t_max: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > t_min && t < t_max && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-18 {
        let b = ox * d.x + oy * d.y;
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                let z = oz + t * d.z;
                if z >= z0 && z <= z1 {
                    take(t);
                }
            }
        }
    }
    if d.z.abs() > 1e-18 {
        for zc in [z0, z1] {
            let t = (zc - oz) / d.z;
            let x = ox + t * d.x;
            let y = oy + t * d.y;
            if x * x + y * y <= r * r {
                take(t);
            }
        }
    }
    best
}

fn intersect_slab(o: &[f64; 3], d: &[f64; 3], lo: &[f64; 3], hi: &[f64; 3], t_min: f64, t_max: f64) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-18 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (a, b) = {
            let a = (lo[k] - o[k]) * inv;
            let b = (hi[k] - o[k]) * inv;
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        };
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return None;
        }
    }
    // Ray origin inside the box reports the exit point.
    let t = if t0 > t_min { t0 } else { t1 };
    (t > t_min && t < t_max).then_some(t)
}

/// Horizontal floor and ceiling planes bounding the flight volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub floor: f64,
    pub ceiling: f64,
}

/// Axis-aligned horizontal rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

const CELL: f64 = 2.0;

#[derive(Clone, Debug, Default)]
struct Grid {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
    /// Largest bounding radius, used to pad queries.
    pad: f64,
}

impl Grid {
    fn build(obstacles: &[Obstacle]) -> Self {
        if obstacles.is_empty() {
            return Grid::default();
        }
        let pad = obstacles.iter().map(|o| o.bound_radius()).fold(0.0, f64::max);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for o in obstacles {
            x0 = x0.min(o.center[0]);
            y0 = y0.min(o.center[1]);
            x1 = x1.max(o.center[0]);
            y1 = y1.max(o.center[1]);
        }
        let nx = ((x1 - x0) / CELL).floor() as usize + 1;
        let ny = ((y1 - y0) / CELL).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, o) in obstacles.iter().enumerate() {
            let cx = ((o.center[0] - x0) / CELL) as usize;
            let cy = ((o.center[1] - y0) / CELL) as usize;
            cells[cy * nx + cx].push(i as u32);
        }
        Grid {
            x0,
            y0,
            nx,
            ny,
            cells,
            pad,
        }
    }

    /// Calls `f` with every obstacle whose center lies within `r + pad` of
    /// the axis-aligned square around `(x, y)`.
    fn visit(&self, x: f64, y: f64, r: f64, mut f: impl FnMut(usize)) {
        if self.nx == 0 {
            return;
        }
        let r = r + self.pad;
        let lo_x = ((x - r - self.x0) / CELL).floor().max(0.0) as usize;
        let lo_y = ((y - r - self.y0) / CELL).floor().max(0.0) as usize;
        let hi_x = ((x + r - self.x0) / CELL).floor();
        let hi_y = ((y + r - self.y0) / CELL).floor();
        if hi_x < 0.0 || hi_y < 0.0 {
            return;
        }
        let hi_x = (hi_x as usize).min(self.nx - 1);
        let hi_y = (hi_y as usize).min(self.ny - 1);
        for cy in lo_y..=hi_y {
            for cx in lo_x..=hi_x {
                for &i in &self.cells[cy * self.nx + cx] {
                    f(i as usize);
                }
            }
        }
    }
}

/// Immutable obstacle field.
#[derive(Clone, Debug)]
pub struct World {
    obstacles: Vec<Obstacle>,
    bounds: Option<Bounds>,
    sections: Vec<Rect>,
    grid: Grid,
}

/// Closest ray hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub instance: u16,
}

impl World {
    /// World without obstacles or bounding planes.
    pub fn empty() -> Self {
        Self::new(Vec::new(), None, Vec::new())
    }

    pub fn new(obstacles: Vec<Obstacle>, bounds: Option<Bounds>, sections: Vec<Rect>) -> Self {
        let grid = Grid::build(&obstacles);
        Self {
            obstacles,
            bounds,
            sections,
            grid,
        }
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    pub fn sections(&self) -> &[Rect] {
        &self.sections
    }

    /// Distance from `p` to the nearest obstacle surface or bounding plane.
    pub fn clearance(&self, p: &Vector3<f64>, search: f64) -> f64 {
        let mut best = search;
        if let Some(b) = self.bounds {
            best = best.min(p.z - b.floor).min(b.ceiling - p.z);
        }
        self.grid.visit(p.x, p.y, search, |i| {
            best = best.min(self.obstacles[i].distance(p));
        });
        best
    }

    /// True iff a sphere of `radius` at `p` touches any obstacle or bound.
    pub fn check_collision(&self, p: &Vector3<f64>, radius: f64) -> bool {
        if let Some(b) = self.bounds {
            if p.z - radius < b.floor || p.z + radius > b.ceiling {
                return true;
            }
        }
        let mut hit = false;
        self.grid.visit(p.x, p.y, radius, |i| {
            if !hit && self.obstacles[i].distance(p) < radius {
                hit = true;
            }
        });
        hit
    }

    /// Reference implementation of [`World::check_collision`] without the grid.
    pub fn check_collision_brute(&self, p: &Vector3<f64>, radius: f64) -> bool {
        if let Some(b) = self.bounds {
            if p.z - radius < b.floor || p.z + radius > b.ceiling {
                return true;
            }
        }
        self.obstacles.iter().any(|o| o.distance(p) < radius)
    }

    /// Indices of obstacles that may be hit by rays from `o` up to `range`.
    pub fn candidates(&self, o: &Vector3<f64>, range: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.grid.visit(o.x, o.y, range, |i| out.push(i));
        out
    }

    /// Closest hit among `candidates` and the bounding planes.
    pub fn raycast_among(
        &self,
        candidates: &[usize],
        o: &Vector3<f64>,
        d: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut t_hi = t_max;
        if let Some(b) = self.bounds {
            if d.z.abs() > 1e-12 {
                for zc in [b.floor, b.ceiling] {
                    let t = (zc - o.z) / d.z;
                    if t > t_min && t < t_hi {
                        t_hi = t;
                        best = Some(Hit { t, instance: 0 });
                    }
                }
            }
        }
        for &i in candidates {
            let ob = &self.obstacles[i];
            if let Some(t) = ob.intersect(o, d, t_min, t_hi) {
                t_hi = t;
                best = Some(Hit { t, instance: ob.instance });
            }
        }
        best
    }

    pub fn raycast(&self, o: &Vector3<f64>, d: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<Hit> {
        let all: Vec<usize> = (0..self.obstacles.len()).collect();
        self.raycast_among(&all, o, d, t_min, t_max)
    }
}
