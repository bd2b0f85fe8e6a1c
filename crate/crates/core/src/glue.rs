//! Glue points between overlapping patches and the least-squares potential
//! shifts that reconcile the per-patch potentials.

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::geometry::Surface;
use crate::Point;

/// Default weighting parameter of the shift least-squares problem.
pub const DEFAULT_GAMMA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlueEdge {
    pub l: usize,
    pub k: usize,
    /// Glue point `(rho_k xi_l + rho_l xi_k) / (rho_l + rho_k)`.
    pub point: Point,
    /// Distance from the glue point to the nearer of the two centers.
    pub r: f64,
}

/// One glue point per overlapping patch pair `l < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueGraph {
    pub edges: Vec<GlueEdge>,
    pub patches: usize,
}

impl GlueGraph {
    pub fn build(cover: &Cover) -> Result<GlueGraph> {
        let components = cover.components();
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        let p = cover.patches();
        let edges = cover
            .overlaps()
            .into_iter()
            .map(|(l, k)| {
                let (a, b) = (&p[l], &p[k]);
                let mut x = (a.center * b.radius + b.center * a.radius) / (a.radius + b.radius);
                if cover.surface() == Surface::Sphere2 {
                    x = x.normalize();
                }
                let r = (x - a.center).norm().min((x - b.center).norm());
                GlueEdge { l, k, point: x, r }
            })
            .collect();
        Ok(GlueGraph {
            edges,
            patches: cover.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Sparse system `P b = c`.
#[derive(Debug, Clone)]
pub struct ShiftSystem {
    /// `L x M` incidence matrix: `+1` at `l`, `-1` at `k` in each row.
    pub p: CsrMatrix<f64>,
    /// `c_i = psi_k(x_i) - psi_l(x_i)`.
    pub c: DVector<f64>,
}

impl ShiftSystem {
    /// Evaluates each patch potential at the glue points it shares.
    pub fn build<F>(graph: &GlueGraph, potential: F) -> ShiftSystem
    where
        F: Fn(usize, &Point) -> f64 + Sync,
    {
        let mut coo = CooMatrix::new(graph.len(), graph.patches);
        for (i, e) in graph.edges.iter().enumerate() {
            coo.push(i, e.l, 1.0);
            coo.push(i, e.k, -1.0);
        }
        let c: Vec<f64> = graph
            .edges
            .par_iter()
            .map(|e| potential(e.k, &e.point) - potential(e.l, &e.point))
            .collect();
        ShiftSystem {
            p: CsrMatrix::from(&coo),
            c: DVector::from_vec(c),
        }
    }
}

/// Shifts `b` with `b[anchor] = 0` and the residual `P b - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSolution {
    pub b: DVector<f64>,
    pub residual: DVector<f64>,
    pub anchor: usize,
}

impl ShiftSolution {
    /// Zero shifts for a single patch.
    pub fn trivial(patches: usize) -> ShiftSolution {
        ShiftSolution {
            b: DVector::zeros(patches),
            residual: DVector::zeros(0),
            anchor: 0,
        }
    }

    pub fn residual_inf(&self) -> f64 {
        self.residual.amax()
    }
}

/// Row weights `W_ii = exp(-gamma (1 - r_i / r_min)^2)`.
pub fn edge_weights(graph: &GlueGraph, gamma: f64) -> Vec<f64> {
    let r_min = graph.edges.iter().map(|e| e.r).fold(f64::INFINITY, f64::min);
    graph
        .edges
        .iter()
        .map(|e| {
            let t = 1.0 - e.r / r_min;
            (-gamma * t * t).exp()
        })
        .collect()
}

/// Patch with the most members; ties go to the lowest index.
pub fn default_anchor(cover: &Cover) -> usize {
    let mut best = 0;
    for (l, p) in cover.patches().iter().enumerate() {
        if p.members.len() > cover.patches()[best].members.len() {
            best = l;
        }
    }
    best
}

/// Solves the weighted normal equations `P^T W P b = P^T W c` with
/// `b[anchor] = 0`.
pub fn solve_shifts(
    sys: &ShiftSystem,
    graph: &GlueGraph,
    gamma: f64,
    anchor: usize,
) -> Result<ShiftSolution> {
    let m = graph.patches;
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("gamma must be nonnegative, got {gamma}")));
    }
    if anchor >= m {
        return Err(Error::Config(format!("anchor {anchor} out of range for {m} patches")));
    }
    if m == 1 {
        return Ok(ShiftSolution::trivial(1));
    }
    let w = edge_weights(graph, gamma);
    // reduced index: patches other than the anchor
    let red = |j: usize| if j < anchor { Some(j) } else if j > anchor { Some(j - 1) } else { None };

    let mut lap = CooMatrix::new(m - 1, m - 1);
    let mut rhs = DVector::zeros(m - 1);
    for (i, e) in graph.edges.iter().enumerate() {
        let wi = w[i];
        let (a, b) = (red(e.l), red(e.k));
        // row contributes wi * (b_l - b_k - c_i)^2
        if let Some(a) = a {
            lap.push(a, a, wi);
            rhs[a] += wi * sys.c[i];
        }
        if let Some(b) = b {
            lap.push(b, b, wi);
            rhs[b] -= wi * sys.c[i];
        }
        if let (Some(a), Some(b)) = (a, b) {
            lap.push(a, b, -wi);
            lap.push(b, a, -wi);
        }
    }
    let lap = CscMatrix::from(&lap);
    let chol = CscCholesky::factor(&lap).map_err(|e| Error::ShiftSolve(e.to_string()))?;
    let sol = chol.solve(&rhs);

    let mut b = DVector::zeros(m);
    for j in 0..m {
        if let Some(r) = red(j) {
            b[j] = sol[(r, 0)];
        }
    }
    let residual = &sys.p * &b - &sys.c;
    Ok(ShiftSolution {
        b,
        residual,
        anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn edge(l: usize, k: usize, r: f64) -> GlueEdge {
        GlueEdge {
            l,
            k,
            point: Point::zeros(),
            r,
        }
    }

    fn chain() -> GlueGraph {
        GlueGraph {
            edges: vec![edge(0, 1, 1.0), edge(1, 2, 1.0)],
            patches: 3,
        }
    }

    /// Dense weighted least squares via the pseudo-inverse, pinned afterwards.
    fn brute(sys: &ShiftSystem, w: &[f64], anchor: usize) -> DVector<f64> {
        let p = DMatrix::from(&sys.p);
        let sw = DMatrix::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|v| v.sqrt())));
        let a = &sw * &p;
        let rhs = &sw * &sys.c;
        let b = a.pseudo_inverse(1e-12).unwrap() * rhs;
        b.add_scalar(-b[anchor])
    }

    #[test]
    fn glue_points() {
        let nodes = vec![Point::new(0.5, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)];
        let centers = vec![Point::zeros(), Point::new(2.0, 0.0, 0.0)];
        let cover = Cover::from_radii(&centers, &[1.0, 3.0], &nodes, Surface::Plane2D).unwrap();
        let g = GlueGraph::build(&cover).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g.edges[0].point - Point::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(g.edges[0].r, 0.5);

        let cover = Cover::from_radii(&centers, &[1.5, 1.5], &nodes, Surface::Plane2D).unwrap();
        let g = GlueGraph::build(&cover).unwrap();
        assert_eq!(g.edges[0].point, Point::new(1.0, 0.0, 0.0));

        let s = vec![Point::x(), Point::new(0.6, 0.8, 0.0)];
        let cover = Cover::from_radii(&s, &[0.8, 0.8], &s, Surface::Sphere2).unwrap();
        let g = GlueGraph::build(&cover).unwrap();
        assert!((g.edges[0].point.norm() - 1.0).abs() < 1e-15);
        for e in &g.edges {
            for j in [e.l, e.k] {
                let p = &cover.patches()[j];
                assert!((e.point - p.center).norm() < p.radius);
            }
        }
    }

    #[test]
    fn chain_offsets() {
        let offsets = [0.0, 1.0, 3.0];
        let sys = ShiftSystem::build(&chain(), |l, _| 7.0 + offsets[l]);
        assert_eq!(sys.c.as_slice(), &[1.0, 2.0]);
        assert_eq!(sys.p.nnz(), 4);
        let ones = DVector::from_element(3, 1.0);
        assert_eq!((&sys.p * &ones).amax(), 0.0);

        let flat = ShiftSystem::build(&chain(), |_, _| 2.5);
        assert_eq!(flat.c.amax(), 0.0);
    }

    #[test]
    fn chain_solution() {
        let sys = ShiftSystem::build(&chain(), |l, _| [0.0, 1.0, 3.0][l]);
        let sol = solve_shifts(&sys, &chain(), 0.0, 0).unwrap();
        // b_l - b_k = c_i along the chain
        assert!((&sol.b - DVector::from_vec(vec![0.0, -1.0, -3.0])).amax() < 1e-12);
        assert!(sol.residual_inf() < 1e-12);
        assert_eq!(sol.anchor, 0);

        let zero = ShiftSystem::build(&chain(), |_, _| 0.0);
        let sol = solve_shifts(&zero, &chain(), 4.0, 1).unwrap();
        assert_eq!(sol.b.amax(), 0.0);
        assert_eq!(sol.residual_inf(), 0.0);
    }

    #[test]
    fn weights_range() {
        let g = GlueGraph {
            edges: vec![edge(0, 1, 0.5), edge(1, 2, 0.7), edge(0, 2, 1.4)],
            patches: 3,
        };
        let w = edge_weights(&g, 4.0);
        assert_eq!(w[0], 1.0);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!(edge_weights(&g, 0.0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn cycle_matches_dense_least_squares() {
        let g = GlueGraph {
            edges: vec![
                edge(0, 1, 0.5),
                edge(1, 2, 0.6),
                edge(0, 2, 0.9),
                edge(2, 3, 0.55),
                edge(1, 3, 0.8),
            ],
            patches: 4,
        };
        let mut sys = ShiftSystem::build(&g, |_, _| 0.0);
        sys.c = DVector::from_vec(vec![0.3, -1.2, 0.7, 2.0, -0.4]);
        for anchor in 0..4 {
            let sol = solve_shifts(&sys, &g, 4.0, anchor).unwrap();
            let want = brute(&sys, &edge_weights(&g, 4.0), anchor);
            assert!((&sol.b - want).amax() < 1e-12);
            assert!(sol.residual_inf() > 0.0);
        }
        let a = solve_shifts(&sys, &g, 4.0, 0).unwrap();
        let b = solve_shifts(&sys, &g, 4.0, 3).unwrap();
        let diff = &a.b - &b.b;
        assert!((diff.add_scalar(-diff[0])).amax() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let sys = ShiftSystem::build(&chain(), |_, _| 0.0);
        assert!(solve_shifts(&sys, &chain(), -1.0, 0).is_err());
        assert!(solve_shifts(&sys, &chain(), 1.0, 3).is_err());
        let nodes = vec![Point::zeros(), Point::new(5.0, 0.0, 0.0)];
        assert!(Cover::from_radii(&nodes, &[1.0, 1.0], &nodes, Surface::Plane2D).is_err());
    }
}
