//! Quasi-uniform point generators: spherical Fibonacci sets and Poisson-disk
//! (Bridson) sampling in 2D and 3D regions.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;

use crate::Point;

/// `m` points on the unit sphere along a Fibonacci spiral.
pub fn fibonacci_sphere(m: usize) -> Vec<Point> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..m)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let lon = 2.0 * PI * (i as f64 / golden).fract();
            Point::new(rho * lon.cos(), rho * lon.sin(), z)
        })
        .collect()
}

/// Uniformly distributed random rotation.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation3<f64> {
    // Shoemake's method
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = nalgebra::Quaternion::new(
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

/// Fibonacci points displaced by a random tangent jitter of at most
/// `jitter` times the mean spacing, then randomly rotated.
pub fn jittered_sphere<R: Rng>(n: usize, jitter: f64, rng: &mut R) -> Vec<Point> {
    let spacing = (4.0 * PI / n as f64).sqrt();
    let rot = random_rotation(rng);
    fibonacci_sphere(n)
        .into_iter()
        .map(|p| {
            let (a, b) = tangent_basis(&p);
            let ang = rng.gen_range(0.0..2.0 * PI);
            let len = jitter * spacing * rng.gen::<f64>().sqrt();
            let q = (p + (a * ang.cos() + b * ang.sin()) * len).normalize();
            (rot * q).normalize()
        })
        .collect()
}

fn tangent_basis(p: &Point) -> (Vector3<f64>, Vector3<f64>) {
    let axis = if p.z.abs() > 0.9 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let a = axis.cross(p).normalize();
    let b = p.cross(&a);
    (a, b)
}

/// Rotation about the z axis, for planar sets.
pub fn random_planar_rotation<R: Rng>(rng: &mut R) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::z()), rng.gen_range(0.0..2.0 * PI))
}

/// Axis-aligned region for Poisson-disk sampling.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl Region {
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }
}

/// Maximal Poisson-disk sample with minimum separation `r` inside
/// `region` restricted to `inside`.
pub fn poisson_disk<R: Rng>(
    region: &Region,
    r: f64,
    inside: &dyn Fn(&Point) -> bool,
    rng: &mut R,
) -> Vec<Point> {
    const ATTEMPTS: usize = 30;
    let dim = region.dim;
    let cell = r / (dim as f64).sqrt();
    let mut shape = [1usize; 3];
    for k in 0..dim {
        shape[k] = (((region.hi[k] - region.lo[k]) / cell).ceil() as usize).max(1);
    }
    let mut grid = vec![u32::MAX; shape[0] * shape[1] * shape[2]];
    let cell_of = |p: &Point| -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..dim {
            c[k] = (((p[k] - region.lo[k]) / cell) as usize).min(shape[k] - 1);
        }
        c
    };
    let flat = |c: [usize; 3]| (c[2] * shape[1] + c[1]) * shape[0] + c[0];
    let in_region = |p: &Point| (0..dim).all(|k| p[k] >= region.lo[k] && p[k] < region.hi[k]);

    let mut pts: Vec<Point> = Vec::new();
    let mut active: Vec<usize> = Vec::new();

    let reach = 2isize;
    let fits = |p: &Point, pts: &[Point], grid: &[u32]| -> bool {
        let c = cell_of(p);
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for k in 0..dim {
            lo[k] = (c[k] as isize - reach).max(0);
            hi[k] = (c[k] as isize + reach).min(shape[k] as isize - 1);
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let id = grid[flat([x as usize, y as usize, z as usize])];
                    if id != u32::MAX && (pts[id as usize] - p).norm_squared() < r * r {
                        return false;
                    }
                }
            }
        }
        true
    };

    let random_in_region = |rng: &mut R| {
        let mut p = Point::zeros();
        for k in 0..dim {
            p[k] = rng.gen_range(region.lo[k]..region.hi[k]);
        }
        p
    };

    // Several seeds so that thin or non-convex regions fill from more than one place.
    let mut tries = 0;
    while pts.len() < 8 && tries < 10_000 {
        tries += 1;
        let p = random_in_region(rng);
        if inside(&p) && fits(&p, &pts, &grid) {
            grid[flat(cell_of(&p))] = pts.len() as u32;
            active.push(pts.len());
            pts.push(p);
        }
    }

    while !active.is_empty() {
        let slot = rng.gen_range(0..active.len());
        let base = pts[active[slot]];
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let dir = random_direction(dim, rng);
            // uniform in the annulus [r, 2r] by volume
            let u: f64 = rng.gen();
            let rd = r * (1.0 + u * ((2f64).powi(dim as i32) - 1.0)).powf(1.0 / dim as f64);
            let cand = base + dir * rd;
            if in_region(&cand) && inside(&cand) && fits(&cand, &pts, &grid) {
                grid[flat(cell_of(&cand))] = pts.len() as u32;
                active.push(pts.len());
                pts.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(slot);
        }
    }
    pts
}

fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Vector3<f64> {
    loop {
        let mut v = Vector3::zeros();
        for k in 0..dim {
            v[k] = rng.gen_range(-1.0..1.0);
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Poisson-disk sample whose size is close to `target`: the separation is
/// rescaled from the count of a first pass. Each pass uses a fresh clone of
/// `rng`'s state so the result is a deterministic function of it.
pub fn poisson_disk_count<R: Rng + Clone>(
    region: &Region,
    target: usize,
    inside: &dyn Fn(&Point) -> bool,
    rng: &mut R,
) -> Vec<Point> {
    let d = region.dim as f64;
    // packing density of maximal Poisson-disk sets, empirical
    let density = if region.dim == 2 { 0.68 } else { 0.58 };
    let mut r = (density * region.volume() / target as f64).powf(1.0 / d);
    let mut best = Vec::new();
    for _ in 0..4 {
        let mut pass = rng.clone();
        let pts = poisson_disk(region, r, inside, &mut pass);
        let ratio = pts.len() as f64 / target as f64;
        best = pts;
        if (ratio - 1.0).abs() < 0.02 {
            break;
        }
        r *= ratio.powf(1.0 / d);
    }
    // advance the caller's generator past this draw
    let _: u64 = rng.gen();
    best
}
