//! Analytic test problems: potentials, exact fields, domains, and node sets.
//!
//! * `Star2D`: div-free field `L psi1` on a star-shaped planar region.
//! * `SphereJet`: div-free zonal jet with six vortices on the unit sphere.
//! * `BallCharges`: curl-free field of 13 smoothed point charges in the unit ball.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Vector3;
use rand::Rng;

use crate::cover;
use crate::error::{Error, Result};
use crate::geometry::{q_matrix, Surface};
use crate::kernel::RadialKernel;
use crate::local::FitMode;
use crate::points::{self, Region};
use crate::Point;

/// `e^r / (1 + e^r)^2`, evaluated without overflow.
pub fn logistic_bump(r: f64) -> f64 {
    let t = (-r.abs()).exp();
    t / ((1.0 + t) * (1.0 + t))
}

fn logistic_bump_d1(r: f64) -> f64 {
    -logistic_bump(r) * (0.5 * r).tanh()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

// ---------------------------------------------------------------------------
// Star domain

pub const STAR_LEVEL: f64 = -0.1;

/// Bounding box that contains the star domain.
pub const STAR_BOX: (f64, f64) = (-1.6, 1.6);

pub fn star_centers() -> [Point; 5] {
    std::array::from_fn(|j| {
        let a = 2.0 * PI * j as f64 / 5.0;
        Point::new((a + 0.1).cos(), (a + 0.5).sin(), 0.0)
    })
}

pub fn psi1(x: &Point) -> f64 {
    let r2 = x.x * x.x + x.y * x.y;
    let mut s = -2.0 * logistic_bump(13.5 * r2 * r2) - 0.5 * logistic_bump(27.0 * r2);
    for c in star_centers() {
        let d = Point::new(x.x - c.x, x.y - c.y, 0.0);
        s -= 2.0 * logistic_bump(9.0 * d.norm_squared());
    }
    s
}

pub fn grad_psi1(x: &Point) -> Vector3<f64> {
    let p = Point::new(x.x, x.y, 0.0);
    let r2 = p.norm_squared();
    let mut g = p * (-2.0 * logistic_bump_d1(13.5 * r2 * r2) * 54.0 * r2);
    g += p * (-0.5 * logistic_bump_d1(27.0 * r2) * 54.0);
    for c in star_centers() {
        let d = p - c;
        g += d * (-2.0 * logistic_bump_d1(9.0 * d.norm_squared()) * 18.0);
    }
    g
}

/// `L psi1 = (-d_y psi1, d_x psi1, 0)`.
pub fn u1(x: &Point) -> Vector3<f64> {
    let g = grad_psi1(x);
    Vector3::new(-g.y, g.x, 0.0)
}

pub fn inside_star(x: &Point) -> bool {
    psi1(x) <= STAR_LEVEL
}

// ---------------------------------------------------------------------------
// Sphere jet

const JET_LON: [f64; 6] = [0.05, 1.1, 2.12, 3.18, 4.22, 5.26];
const JET_LAT: [f64; 6] = [0.79, -0.82, 0.76, -0.81, 0.8, -0.77];

pub fn jet_centers() -> [Point; 6] {
    std::array::from_fn(|j| {
        let (l, t) = (JET_LON[j], JET_LAT[j]);
        Point::new(l.cos() * t.cos(), l.sin() * t.cos(), t.sin())
    })
}

fn jet_amplitude(j: usize) -> f64 {
    4.0 + j as f64 / 2.0
}

/// Jet potential extended to all of R^3 by the same formula.
pub fn psi2_ambient(x: &Point) -> f64 {
    let s = FRAC_1_SQRT_2;
    let mut v = -sigmoid(20.0 * (x.z + s)) - sigmoid(20.0 * (x.z - s));
    for (j, c) in jet_centers().iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        v -= 3.0 * sign * logistic_bump(jet_amplitude(j) * (x - c).norm_squared());
    }
    v
}

pub fn grad_psi2_ambient(x: &Point) -> Vector3<f64> {
    let s = FRAC_1_SQRT_2;
    let mut g = Vector3::zeros();
    for shift in [s, -s] {
        let sg = sigmoid(20.0 * (x.z + shift));
        g.z -= 20.0 * sg * (1.0 - sg);
    }
    for (j, c) in jet_centers().iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let a = jet_amplitude(j);
        let d = x - c;
        g -= d * (3.0 * sign * logistic_bump_d1(a * d.norm_squared()) * 2.0 * a);
    }
    g
}

fn check_sphere(x: &Point) -> Result<()> {
    let n = x.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("point is off the unit sphere (|x| = {n})")));
    }
    Ok(())
}

pub fn psi2(x: &Point) -> Result<f64> {
    check_sphere(x)?;
    Ok(psi2_ambient(x))
}

/// `L psi2 = Q_x grad psi2`.
pub fn u2(x: &Point) -> Result<Vector3<f64>> {
    check_sphere(x)?;
    Ok(q_matrix(&x.normalize()) * grad_psi2_ambient(x))
}

// ---------------------------------------------------------------------------
// Ball charges

pub fn icosahedron_vertices() -> [Point; 12] {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (0.0, 1.0, g),
        (0.0, -1.0, g),
        (0.0, 1.0, -g),
        (0.0, -1.0, -g),
        (1.0, g, 0.0),
        (-1.0, g, 0.0),
        (1.0, -g, 0.0),
        (-1.0, -g, 0.0),
        (g, 0.0, 1.0),
        (-g, 0.0, 1.0),
        (g, 0.0, -1.0),
        (-g, 0.0, -1.0),
    ];
    std::array::from_fn(|j| {
        let (a, b, c) = raw[j];
        Point::new(a, b, c).normalize() * (2.0 / 3.0)
    })
}

/// Smoothed charge `(a + r^2)^{-1/2}`.
pub fn charge(r: f64, a: f64) -> f64 {
    1.0 / (a + r * r).sqrt()
}

pub fn psi3(x: &Point) -> f64 {
    let mut v = -0.25 * charge(x.norm(), 0.1);
    for c in icosahedron_vertices() {
        v += 0.125 * charge((x - c).norm(), 0.04);
    }
    v
}

fn grad_charge(d: &Vector3<f64>, a: f64) -> Vector3<f64> {
    -d * (a + d.norm_squared()).powf(-1.5)
}

/// `-grad psi3`.
pub fn u3(x: &Point) -> Vector3<f64> {
    let mut g = grad_charge(x, 0.1) * -0.25;
    for c in icosahedron_vertices() {
        g += grad_charge(&(x - c), 0.04) * 0.125;
    }
    -g
}

pub fn inside_ball(x: &Point) -> bool {
    x.norm() <= 1.0
}

// ---------------------------------------------------------------------------
// Node sets

/// Poisson-disk nodes in the star domain.
pub fn nodes_star<R: Rng + Clone>(target: usize, rng: &mut R) -> Vec<Point> {
    let (lo, hi) = STAR_BOX;
    let region = Region {
        dim: 2,
        lo: Point::new(lo, lo, 0.0),
        hi: Point::new(hi, hi, 0.0),
    };
    points::poisson_disk_count(&region, target, &inside_star, rng)
}

/// Exactly `n` jittered, randomly rotated spherical Fibonacci nodes.
pub fn nodes_sphere<R: Rng>(n: usize, rng: &mut R) -> Vec<Point> {
    points::jittered_sphere(n, 0.2, rng)
}

/// Poisson-disk nodes in the closed unit ball.
pub fn nodes_ball<R: Rng + Clone>(target: usize, rng: &mut R) -> Vec<Point> {
    let region = Region {
        dim: 3,
        lo: Point::new(-1.0, -1.0, -1.0),
        hi: Point::new(1.0, 1.0, 1.0),
    };
    points::poisson_disk_count(&region, target, &inside_ball, rng)
}

// ---------------------------------------------------------------------------

/// Which analytic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Star2D,
    SphereJet,
    BallCharges,
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemId::Star2D => "star2d",
            ProblemId::SphereJet => "sphere",
            ProblemId::BallCharges => "ball",
        })
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "star2d" | "star" => Ok(ProblemId::Star2D),
            "sphere" => Ok(ProblemId::SphereJet),
            "ball" => Ok(ProblemId::BallCharges),
            _ => Err(Error::Config(format!("unknown problem '{s}' (expected star2d, sphere, or ball)"))),
        }
    }
}

/// An analytic test problem together with its default method parameters.
#[derive(Debug, Clone, Copy)]
pub struct TestProblem {
    pub id: ProblemId,
}

impl TestProblem {
    pub fn new(id: ProblemId) -> Self {
        TestProblem { id }
    }

    pub fn surface(&self) -> Surface {
        match self.id {
            ProblemId::Star2D => Surface::Plane2D,
            ProblemId::SphereJet => Surface::Sphere2,
            ProblemId::BallCharges => Surface::Euclidean(3),
        }
    }

    pub fn mode(&self) -> FitMode {
        match self.id {
            ProblemId::Star2D | ProblemId::SphereJet => FitMode::DivFreeSurface,
            ProblemId::BallCharges => FitMode::CurlFreeEuclidean,
        }
    }

    pub fn default_kernel(&self) -> RadialKernel {
        match self.id {
            ProblemId::Star2D => RadialKernel::imq(13.0),
            ProblemId::SphereJet => RadialKernel::matern4(7.5),
            ProblemId::BallCharges => RadialKernel::imq(4.0),
        }
        .expect("positive shape parameter")
    }

    pub fn default_delta(&self) -> f64 {
        match self.id {
            ProblemId::Star2D => 0.5,
            ProblemId::SphereJet => 9.0 / 16.0,
            ProblemId::BallCharges => 0.25,
        }
    }

    pub fn default_qs(&self) -> [f64; 3] {
        match self.id {
            ProblemId::Star2D => [6.0, 8.0, 10.0],
            ProblemId::SphereJet => [6.0, 9.0, 12.0],
            ProblemId::BallCharges => [2.0, 3.0, 4.0],
        }
    }

    /// Area / volume estimate used in the patch-spacing heuristic.
    pub fn area(&self) -> f64 {
        match self.id {
            ProblemId::Star2D => 6.0,
            ProblemId::SphereJet => 4.0 * PI,
            ProblemId::BallCharges => 4.0 * PI / 3.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self.id {
            ProblemId::Star2D | ProblemId::SphereJet => 2,
            ProblemId::BallCharges => 3,
        }
    }

    /// Potential whose surface curl (div-free) or gradient (curl-free) is
    /// the exact field. For the ball this is `-psi3`, since the field is
    /// `-grad psi3`.
    pub fn potential(&self, x: &Point) -> f64 {
        match self.id {
            ProblemId::Star2D => psi1(x),
            ProblemId::SphereJet => psi2_ambient(x),
            ProblemId::BallCharges => -psi3(x),
        }
    }

    pub fn field(&self, x: &Point) -> Vector3<f64> {
        match self.id {
            ProblemId::Star2D => u1(x),
            ProblemId::SphereJet => q_matrix(&x.normalize()) * grad_psi2_ambient(x),
            ProblemId::BallCharges => u3(x),
        }
    }

    pub fn inside(&self, x: &Point) -> bool {
        match self.id {
            ProblemId::Star2D => inside_star(x),
            ProblemId::SphereJet => (x.norm() - 1.0).abs() <= 1e-9,
            ProblemId::BallCharges => inside_ball(x),
        }
    }

    pub fn nodes<R: Rng + Clone>(&self, target: usize, rng: &mut R) -> Vec<Point> {
        match self.id {
            ProblemId::Star2D => nodes_star(target, rng),
            ProblemId::SphereJet => nodes_sphere(target, rng),
            ProblemId::BallCharges => nodes_ball(target, rng),
        }
    }

    /// Patch centers for spacing `h`.
    pub fn centers(&self, h: f64) -> Result<Vec<Point>> {
        match self.id {
            ProblemId::Star2D => {
                let (lo, hi) = STAR_BOX;
                cover::centers_plane(&|p| psi1(p) <= STAR_LEVEL, (lo, lo), (hi, hi), h)
            }
            ProblemId::SphereJet => cover::centers_sphere(h),
            ProblemId::BallCharges => cover::centers_ball(h),
        }
    }
}
