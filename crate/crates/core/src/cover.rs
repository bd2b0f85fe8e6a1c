//! Overlapping patch covers and Shepard partition-of-unity weights.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Surface;
use crate::points::fibonacci_sphere;
use crate::spatial::KdTree;
use crate::Point;

/// Margin applied when a radius is enlarged to reach an uncovered node.
pub const INFLATE_MARGIN: f64 = 1e-6;

/// Patch spacing `H = q (A / N)^{1/d}`.
pub fn spacing_from_q(q: f64, area: f64, n: usize, d: usize) -> Result<f64> {
    if !(q > 0.0 && area > 0.0 && n > 0 && d > 0) {
        return Err(Error::Config(format!(
            "spacing needs positive inputs (q = {q}, A = {area}, N = {n}, d = {d})"
        )));
    }
    Ok(q * (area / n as f64).powf(1.0 / d as f64))
}

/// Hexagonal lattice of spacing `h` anchored at `lo`, rows along x, keeping
/// the points accepted by `inside`.
pub fn centers_plane(
    inside: &dyn Fn(&Point) -> bool,
    lo: (f64, f64),
    hi: (f64, f64),
    h: f64,
) -> Result<Vec<Point>> {
    check_spacing(h)?;
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((hi.1 - lo.1) / dy).floor() as usize;
    let cols = ((hi.0 - lo.0) / h).floor() as usize;
    let mut out = Vec::new();
    for k in 0..=rows {
        let shift = if k % 2 == 1 { h / 2.0 } else { 0.0 };
        let y = lo.1 + k as f64 * dy;
        for i in 0..=cols {
            let x = lo.0 + shift + i as f64 * h;
            if x > hi.0 {
                break;
            }
            let p = Point::new(x, y, 0.0);
            if inside(&p) {
                out.push(p);
            }
        }
    }
    nonempty(out, h)
}

/// Cartesian lattice `h Z^3` restricted to the closed unit ball.
pub fn centers_ball(h: f64) -> Result<Vec<Point>> {
    check_spacing(h)?;
    let k = (1.0 / h).floor() as i64;
    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            for l in -k..=k {
                let p = Point::new(i as f64, j as f64, l as f64) * h;
                if p.norm() <= 1.0 {
                    out.push(p);
                }
            }
        }
    }
    nonempty(out, h)
}

/// Cartesian lattice of spacing `h` anchored at `lo`, filling the box `[lo, hi]`.
pub fn centers_box(lo: &Point, hi: &Point, h: f64) -> Result<Vec<Point>> {
    check_spacing(h)?;
    let count = |k: usize| ((hi[k] - lo[k]) / h).floor().max(0.0) as usize;
    let (nx, ny, nz) = (count(0), count(1), count(2));
    let mut out = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            for l in 0..=nz {
                out.push(lo + Point::new(i as f64, j as f64, l as f64) * h);
            }
        }
    }
    Ok(out)
}

/// `ceil(4 pi / h^2)` quasi-uniform points on the unit sphere.
pub fn centers_sphere(h: f64) -> Result<Vec<Point>> {
    check_spacing(h)?;
    // shave rounding noise so that h = sqrt(4 pi / m) gives exactly m
    let m = (4.0 * PI / (h * h) * (1.0 - 1e-12)).ceil() as usize;
    Ok(fibonacci_sphere(m.max(1)))
}

fn check_spacing(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("patch spacing must be positive, got {h}")))
    }
}

fn nonempty(centers: Vec<Point>, h: f64) -> Result<Vec<Point>> {
    if centers.is_empty() {
        Err(Error::Config(format!("no patch centers survive at spacing H = {h}")))
    } else {
        Ok(centers)
    }
}

/// Initial patch radius for spacing `h`: `(1 + delta) H / 2`, with an extra
/// `sqrt 3` for the 3D Cartesian lattice.
pub fn initial_radius(surface: Surface, delta: f64, h: f64) -> f64 {
    let base = (1.0 + delta) * h / 2.0;
    match surface {
        Surface::Euclidean(3) => base * 3f64.sqrt(),
        _ => base,
    }
}

/// Enlarges the radius of the nearest center for every node that no patch
/// covers. Returns the number of nodes that triggered an enlargement.
pub fn inflate_radii(centers: &[Point], radii: &mut [f64], nodes: &[Point]) -> usize {
    let tree = KdTree::new(centers);
    let mut reach = radii.iter().cloned().fold(0.0, f64::max);
    let mut count = 0;
    for x in nodes {
        let mut covered = false;
        tree.for_each_within(x, reach, |j, d| covered |= d < radii[j]);
        if !covered {
            if let Some((j, d)) = tree.nearest(x) {
                radii[j] = d * (1.0 + INFLATE_MARGIN);
                reach = reach.max(radii[j]);
                count += 1;
            }
        }
    }
    count
}

/// `kappa(s) = 1 - 3 s^2` on `[0, 1/3]`, `3/2 (1 - s)^2` on `[1/3, 1]`, zero beyond.
pub fn kappa(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 / 3.0 {
        1.0 - 3.0 * s * s
    } else if s < 1.0 {
        1.5 * (1.0 - s) * (1.0 - s)
    } else {
        0.0
    }
}

pub fn kappa_prime(s: f64) -> f64 {
    let a = s.abs();
    let d = if a <= 1.0 / 3.0 {
        -6.0 * a
    } else if a < 1.0 {
        -3.0 * (1.0 - a)
    } else {
        0.0
    };
    d * s.signum()
}

/// `kappa'(s) / s`, regular at `s = 0`.
fn kappa_prime_over_s(s: f64) -> f64 {
    if s <= 1.0 / 3.0 {
        -6.0
    } else if s < 1.0 {
        -3.0 * (1.0 - s) / s
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: Point,
    pub radius: f64,
    /// Indices into the node set, ascending.
    pub members: Vec<usize>,
}

/// Weight and Euclidean weight gradient of one active patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTerm {
    pub patch: usize,
    pub w: f64,
    pub grad: Vector3<f64>,
}

/// Shepard weights at a point, over the patches that contain it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightEval {
    pub terms: Vec<WeightTerm>,
}

impl WeightEval {
    pub fn sum(&self) -> f64 {
        self.terms.iter().map(|t| t.w).sum()
    }

    pub fn grad_sum(&self) -> Vector3<f64> {
        self.terms.iter().map(|t| t.grad).sum()
    }
}

/// Patch cover of a node set.
#[derive(Debug, Clone)]
pub struct Cover {
    patches: Vec<Patch>,
    tree: KdTree,
    max_radius: f64,
    surface: Surface,
    delta: Option<f64>,
    spacing: Option<f64>,
}

impl Cover {
    /// Cover with the standard radius rule for `surface`, inflated so every
    /// node is covered.
    pub fn build(
        centers: &[Point],
        nodes: &[Point],
        delta: f64,
        h: f64,
        surface: Surface,
    ) -> Result<Cover> {
        if !(delta > 0.0) {
            return Err(Error::Config(format!("overlap delta must be positive, got {delta}")));
        }
        check_spacing(h)?;
        let mut radii = vec![initial_radius(surface, delta, h); centers.len()];
        inflate_radii(centers, &mut radii, nodes);
        let mut cover = Cover::from_radii(centers, &radii, nodes, surface)?;
        cover.delta = Some(delta);
        cover.spacing = Some(h);
        Ok(cover)
    }

    /// Cover with explicit radii. Patches without member nodes are dropped;
    /// every node must be covered and the overlap graph must be connected.
    pub fn from_radii(
        centers: &[Point],
        radii: &[f64],
        nodes: &[Point],
        surface: Surface,
    ) -> Result<Cover> {
        surface.validate()?;
        if centers.len() != radii.len() {
            return Err(Error::Config(format!(
                "{} centers but {} radii",
                centers.len(),
                radii.len()
            )));
        }
        if nodes.is_empty() {
            return Err(Error::Config("cover needs at least one node".into()));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("patch radius must be positive, got {r}")));
        }
        let node_tree = KdTree::new(nodes);
        let mut patches = Vec::with_capacity(centers.len());
        let mut seen = vec![false; nodes.len()];
        for (c, &r) in centers.iter().zip(radii) {
            let members = node_tree.within(c, r);
            if members.is_empty() {
                continue;
            }
            for &i in &members {
                seen[i] = true;
            }
            patches.push(Patch {
                center: *c,
                radius: r,
                members,
            });
        }
        let missing: Vec<usize> = (0..nodes.len()).filter(|&i| !seen[i]).collect();
        if !missing.is_empty() {
            return Err(Error::UncoveredPoints { indices: missing });
        }
        let cover = Cover::assemble(patches, surface);
        let components = cover.components();
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(cover)
    }

    /// A single patch containing every node.
    pub fn single_patch(nodes: &[Point], surface: Surface) -> Result<Cover> {
        if nodes.is_empty() {
            return Err(Error::Config("cover needs at least one node".into()));
        }
        let center = nodes.iter().sum::<Point>() / nodes.len() as f64;
        let reach = nodes.iter().map(|x| (x - center).norm()).fold(0.0, f64::max);
        Cover::from_radii(&[center], &[reach * 1.01 + 1e-12], nodes, surface)
    }

    fn assemble(patches: Vec<Patch>, surface: Surface) -> Cover {
        let centers: Vec<Point> = patches.iter().map(|p| p.center).collect();
        let max_radius = patches.iter().map(|p| p.radius).fold(0.0, f64::max);
        Cover {
            tree: KdTree::new(&centers),
            patches,
            max_radius,
            surface,
            delta: None,
            spacing: None,
        }
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn mean_members(&self) -> f64 {
        let total: usize = self.patches.iter().map(|p| p.members.len()).sum();
        total as f64 / self.patches.len() as f64
    }

    /// Patches whose open ball contains `x`, ascending.
    pub fn active(&self, x: &Point) -> Vec<usize> {
        let mut out = Vec::new();
        self.tree.for_each_within(x, self.max_radius, |l, d| {
            if d < self.patches[l].radius {
                out.push(l);
            }
        });
        out.sort_unstable();
        out
    }

    pub fn covers(&self, x: &Point) -> bool {
        let mut hit = false;
        self.tree.for_each_within(x, self.max_radius, |l, d| {
            hit |= d < self.patches[l].radius;
        });
        hit
    }

    /// Pairs `(l, k)`, `l < k`, with `|xi_l - xi_k| < rho_l + rho_k`.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (l, p) in self.patches.iter().enumerate() {
            self.tree
                .for_each_within(&p.center, p.radius + self.max_radius, |k, d| {
                    if k > l && d < p.radius + self.patches[k].radius {
                        out.push((l, k));
                    }
                });
        }
        out.sort_unstable();
        out
    }

    /// Number of connected components of the overlap graph.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.patches.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut count = self.patches.len();
        for (l, k) in self.overlaps() {
            let (a, b) = (find(&mut parent, l), find(&mut parent, k));
            if a != b {
                parent[a.max(b)] = a.min(b);
                count -= 1;
            }
        }
        count
    }

    /// Shepard weights `w_l = kappa_l / sum kappa_j` and their gradients.
    pub fn weights_at(&self, x: &Point) -> Result<WeightEval> {
        let mut terms = Vec::new();
        let mut total = 0.0;
        let mut total_grad = Vector3::zeros();
        self.tree.for_each_within(x, self.max_radius, |l, d| {
            let p = &self.patches[l];
            if d < p.radius {
                let s = d / p.radius;
                let k = kappa(s);
                let g = (x - p.center) * (kappa_prime_over_s(s) / (p.radius * p.radius));
                total += k;
                total_grad += g;
                terms.push(WeightTerm {
                    patch: l,
                    w: k,
                    grad: g,
                });
            }
        });
        if terms.is_empty() || total <= 0.0 {
            return Err(Error::NotCovered {
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        terms.sort_unstable_by_key(|t| t.patch);
        for t in &mut terms {
            t.w /= total;
            t.grad = (t.grad - total_grad * t.w) / total;
        }
        Ok(WeightEval { terms })
    }
}
