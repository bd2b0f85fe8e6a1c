//! Finite-difference oracles shared by the unit tests.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::spatial::KdTree;
use crate::Point;

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

fn axis(i: usize, h: f64) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    v[i] = h;
    v
}

/// Fourth-order central difference gradient.
pub fn fd_gradient(f: impl Fn(Vector3<f64>) -> f64, x: Vector3<f64>, h: f64) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for i in 0..3 {
        let e = axis(i, h);
        g[i] = STENCIL.iter().map(|&(o, c)| c * f(x + e * o)).sum::<f64>() / (12.0 * h);
    }
    g
}

/// Fourth-order central difference Hessian (nested 1D stencils).
pub fn fd_hessian(f: impl Fn(Vector3<f64>) -> f64, x: Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (ei, ej) = (axis(i, h), axis(j, h));
            let mut acc = 0.0;
            for &(oi, ci) in &STENCIL {
                for &(oj, cj) in &STENCIL {
                    acc += ci * cj * f(x + ei * oi + ej * oj);
                }
            }
            m[(i, j)] = acc / (144.0 * h * h);
        }
    }
    m
}

/// Fourth-order central difference Jacobian `J[i][j] = d v_i / d x_j`.
pub fn fd_jacobian(
    f: impl Fn(Vector3<f64>) -> Vector3<f64>,
    x: Vector3<f64>,
    h: f64,
) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let e = axis(j, h);
        let col = STENCIL
            .iter()
            .fold(Vector3::zeros(), |acc, &(o, c)| acc + f(x + e * o) * c)
            / (12.0 * h);
        m.set_column(j, &col);
    }
    m
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn nn_ratio(pts: &[Point]) -> f64 {
    let tree = KdTree::new(pts);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut rad = 1e-3;
        while best.is_infinite() {
            tree.for_each_within(p, rad, |j, d| {
                if j != i {
                    best = best.min(d);
                }
            });
            rad *= 2.0;
        }
        lo = lo.min(best);
        hi = hi.max(best);
    }
    hi / lo
}
