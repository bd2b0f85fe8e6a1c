//! Per-patch div-free and curl-free kernel interpolants and the scalar
//! potentials they are derived from.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{p_matrix, q_matrix, Surface, TangentFrame};
use crate::kernel::RadialKernel;
use crate::spatial::KdTree;
use crate::Point;

/// Largest node count accepted by [`fit_global`].
pub const GLOBAL_FIT_LIMIT: usize = 5000;

const TANGENCY_TOL: f64 = 1e-10;

/// Which kind of field is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMode {
    /// Surface curl of a potential: `s = Q_x grad psi`.
    DivFreeSurface,
    /// Surface gradient of a potential: `s = P_x grad phi`.
    CurlFreeSurface,
    /// Gradient of a potential in R^2 or R^3.
    CurlFreeEuclidean,
}

impl FitMode {
    /// Fails unless the mode makes sense on `surface`.
    pub fn check(&self, surface: Surface) -> Result<()> {
        surface.validate()?;
        let ok = match self {
            FitMode::DivFreeSurface | FitMode::CurlFreeSurface => surface.is_embedded_surface(),
            FitMode::CurlFreeEuclidean => !surface.is_embedded_surface(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("mode {self} is not available on {surface}")))
        }
    }

    pub fn is_div_free(&self) -> bool {
        matches!(self, FitMode::DivFreeSurface)
    }
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::DivFreeSurface => "div",
            FitMode::CurlFreeSurface => "curl-surface",
            FitMode::CurlFreeEuclidean => "curl",
        })
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "div" | "div-free" => Ok(FitMode::DivFreeSurface),
            "curl-surface" | "curl-free-surface" => Ok(FitMode::CurlFreeSurface),
            "curl" | "curl-free" => Ok(FitMode::CurlFreeEuclidean),
            other => Err(Error::Config(format!("unknown fit mode '{other}'"))),
        }
    }
}

/// Validated nodes and vector samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    nodes: Vec<Point>,
    values: Vec<Vector3<f64>>,
}

impl SampleSet {
    /// Checks lengths, finiteness, distinctness, that nodes lie on `surface`,
    /// and that values are tangent there.
    pub fn new(nodes: Vec<Point>, values: Vec<Vector3<f64>>, surface: Surface) -> Result<Self> {
        surface.validate()?;
        if nodes.len() != values.len() {
            return Err(Error::Config(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        for (i, (x, u)) in nodes.iter().zip(&values).enumerate() {
            if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
                return Err(Error::Domain(format!("sample {i} is not finite")));
            }
            let flat = matches!(surface, Surface::Plane2D | Surface::Euclidean(2));
            if flat && (x.z != 0.0 || u.z != 0.0) {
                return Err(Error::Domain(format!(
                    "sample {i} has a nonzero third component in a planar problem"
                )));
            }
            if surface == Surface::Sphere2 {
                let n = surface
                    .normal(x)
                    .map_err(|e| Error::Domain(format!("sample {i}: {e}")))?;
                if n.dot(u).abs() > TANGENCY_TOL * u.norm().max(1.0) {
                    return Err(Error::Domain(format!("sample {i} is not tangent to the sphere")));
                }
            }
        }
        let tree = KdTree::new(&nodes);
        for (i, x) in nodes.iter().enumerate() {
            let mut dup = None;
            tree.for_each_within(x, 1e-150, |j, _| {
                if j != i {
                    dup = Some(j);
                }
            });
            if let Some(j) = dup {
                return Err(Error::Domain(format!("nodes {i} and {j} coincide")));
            }
        }
        Ok(SampleSet { nodes, values })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn hessian(kernel: &RadialKernel, r: &Vector3<f64>) -> Matrix3<f64> {
    let (f, s) = kernel.hessian_coeffs_unchecked(r.norm());
    Matrix3::identity() * f + r * r.transpose() * s
}

/// `Phi_div(x, y) = Q_x (grad grad^T phi) Q_y`.
pub fn phi_div_block(kernel: &RadialKernel, surface: Surface, x: &Point, y: &Point) -> Result<Matrix3<f64>> {
    let (nx, ny) = (surface.normal(x)?, surface.normal(y)?);
    Ok(q_matrix(&nx) * hessian(kernel, &(x - y)) * q_matrix(&ny))
}

/// `Phi_curl(x, y) = -P_x (grad grad^T phi) P_y` on a surface, and
/// `-grad grad^T phi` (d x d) in Euclidean space.
pub fn phi_curl_block(kernel: &RadialKernel, surface: Surface, x: &Point, y: &Point) -> Result<DMatrix<f64>> {
    let h = hessian(kernel, &(x - y));
    match surface {
        Surface::Euclidean(d) => {
            surface.validate()?;
            Ok(DMatrix::from_fn(d, d, |i, j| -h[(i, j)]))
        }
        _ => {
            let (nx, ny) = (surface.normal(x)?, surface.normal(y)?);
            let m = -(p_matrix(&nx) * h * p_matrix(&ny));
            Ok(DMatrix::from_column_slice(3, 3, m.as_slice()))
        }
    }
}

/// Unknowns per node.
fn block_size(surface: Surface) -> usize {
    match surface {
        Surface::Euclidean(d) => d,
        _ => 2,
    }
}

/// Columns `T_i` with `A^{ij} = -T_i^T H T_j`: `Q_i^T [d e]` for div-free
/// (using `Q^T = -Q`), `[d e]` for curl-free on a surface, and the leading
/// unit vectors in R^d.
fn test_columns(mode: FitMode, frame: Option<&TangentFrame>, d: usize) -> [Vector3<f64>; 3] {
    match (mode, frame) {
        (FitMode::DivFreeSurface, Some(f)) => {
            let qt = q_matrix(&f.n).transpose();
            [qt * f.d, qt * f.e, Vector3::zeros()]
        }
        (FitMode::CurlFreeSurface, Some(f)) => [f.d, f.e, Vector3::zeros()],
        _ => {
            let mut c = [Vector3::x(), Vector3::y(), Vector3::z()];
            if d == 2 {
                c[2] = Vector3::zeros();
            }
            c
        }
    }
}

/// Symmetric interpolation matrix for `nodes` with the given frames
/// (empty for Euclidean mode).
pub fn system_matrix(
    nodes: &[Point],
    frames: &[TangentFrame],
    kernel: &RadialKernel,
    surface: Surface,
    mode: FitMode,
) -> DMatrix<f64> {
    let b = block_size(surface);
    let n = nodes.len();
    let cols: Vec<[Vector3<f64>; 3]> = (0..n)
        .map(|i| test_columns(mode, frames.get(i), b))
        .collect();
    let mut a = DMatrix::zeros(n * b, n * b);
    for i in 0..n {
        for j in i..n {
            let r = nodes[i] - nodes[j];
            let (f, s) = kernel.hessian_coeffs_unchecked(r.norm());
            let ti: Vec<f64> = (0..b).map(|p| cols[i][p].dot(&r)).collect();
            let tj: Vec<f64> = (0..b).map(|q| cols[j][q].dot(&r)).collect();
            for p in 0..b {
                for q in 0..b {
                    let v = -(f * cols[i][p].dot(&cols[j][q]) + s * ti[p] * tj[q]);
                    a[(i * b + p, j * b + q)] = v;
                    a[(j * b + q, i * b + p)] = v;
                }
            }
        }
    }
    a
}

/// Default frames for `nodes` (empty in Euclidean space).
pub fn default_frames(nodes: &[Point], surface: Surface) -> Result<Vec<TangentFrame>> {
    if surface.is_embedded_surface() {
        nodes.iter().map(|x| surface.tangent_frame(x)).collect()
    } else {
        Ok(Vec::new())
    }
}

/// A fitted kernel interpolant on one patch (or on all nodes).
#[derive(Debug, Clone)]
pub struct LocalFit {
    mode: FitMode,
    kernel: RadialKernel,
    surface: Surface,
    nodes: Vec<Point>,
    frames: Vec<TangentFrame>,
    /// Raw solution: `(alpha_j, beta_j)` or `c_j`, `block_size` per node.
    raw: Vec<f64>,
    /// Ambient coefficient vectors `c_j`.
    coeffs: Vec<Vector3<f64>>,
    /// `Q_j c_j` (div-free) or `c_j`, the vector contracted with `grad phi`.
    g: Vec<Vector3<f64>>,
    residual: f64,
}

impl LocalFit {
    /// Fits with the default frames of `surface`; `patch` labels errors.
    pub fn fit(
        nodes: &[Point],
        values: &[Vector3<f64>],
        kernel: &RadialKernel,
        surface: Surface,
        mode: FitMode,
        patch: usize,
    ) -> Result<LocalFit> {
        let frames = default_frames(nodes, surface)?;
        LocalFit::fit_with_frames(nodes, values, frames, kernel, surface, mode, patch)
    }

    /// Fits with caller-supplied tangent frames.
    pub fn fit_with_frames(
        nodes: &[Point],
        values: &[Vector3<f64>],
        frames: Vec<TangentFrame>,
        kernel: &RadialKernel,
        surface: Surface,
        mode: FitMode,
        patch: usize,
    ) -> Result<LocalFit> {
        mode.check(surface)?;
        if nodes.is_empty() {
            return Err(Error::Config(format!("patch {patch} has no nodes")));
        }
        if nodes.len() != values.len() || (surface.is_embedded_surface() && frames.len() != nodes.len()) {
            return Err(Error::Config(format!("patch {patch}: inconsistent input lengths")));
        }
        let b = block_size(surface);
        let n = nodes.len();
        let a = system_matrix(nodes, &frames, kernel, surface, mode);
        let mut rhs = DVector::zeros(n * b);
        for (j, u) in values.iter().enumerate() {
            match frames.get(j) {
                Some(f) => {
                    rhs[j * b] = f.d.dot(u);
                    rhs[j * b + 1] = f.e.dot(u);
                }
                None => {
                    for p in 0..b {
                        rhs[j * b + p] = u[p];
                    }
                }
            }
        }

        let chol = match a.clone().cholesky() {
            Some(c) => c,
            None => {
                let eig = a.symmetric_eigenvalues();
                return Err(Error::Factorization {
                    patch,
                    size: n * b,
                    min_eig: eig.min(),
                    max_eig: eig.max(),
                });
            }
        };
        let mut sol = chol.solve(&rhs);
        // one step of iterative refinement
        let r = &rhs - &a * &sol;
        sol += chol.solve(&r);
        let r = &rhs - &a * &sol;

        let scale = (0..n)
            .map(|j| rhs.rows(j * b, b).norm())
            .fold(0.0, f64::max);
        let worst = (0..n).map(|j| r.rows(j * b, b).norm()).fold(0.0, f64::max);
        let residual = if scale > 0.0 { worst / scale } else { worst };

        Ok(LocalFit::from_raw(
            nodes.to_vec(),
            frames,
            sol.as_slice().to_vec(),
            *kernel,
            surface,
            mode,
            residual,
        ))
    }

    fn from_raw(
        nodes: Vec<Point>,
        frames: Vec<TangentFrame>,
        raw: Vec<f64>,
        kernel: RadialKernel,
        surface: Surface,
        mode: FitMode,
        residual: f64,
    ) -> LocalFit {
        let b = block_size(surface);
        let coeffs: Vec<Vector3<f64>> = (0..nodes.len())
            .map(|j| match frames.get(j) {
                Some(f) => f.d * raw[j * b] + f.e * raw[j * b + 1],
                None => {
                    let mut c = Vector3::zeros();
                    for p in 0..b {
                        c[p] = raw[j * b + p];
                    }
                    c
                }
            })
            .collect();
        let g = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| match mode {
                FitMode::DivFreeSurface => q_matrix(&frames[j].n) * c,
                _ => *c,
            })
            .collect();
        LocalFit {
            mode,
            kernel,
            surface,
            nodes,
            frames,
            raw,
            coeffs,
            g,
            residual,
        }
    }

    pub fn mode(&self) -> FitMode {
        self.mode
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn frames(&self) -> &[TangentFrame] {
        &self.frames
    }

    /// Solution of the linear system: `(alpha_j, beta_j)` pairs on a
    /// surface, `c_j` components in Euclidean space.
    pub fn raw_coefficients(&self) -> &[f64] {
        &self.raw
    }

    /// Ambient coefficient vectors `c_j`.
    pub fn coefficients(&self) -> &[Vector3<f64>] {
        &self.coeffs
    }

    /// Largest linear-system residual at a node relative to the largest sample.
    pub fn max_residual(&self) -> f64 {
        self.residual
    }

    fn flatten(&self, x: &Point) -> Point {
        match self.surface {
            Surface::Plane2D | Surface::Euclidean(2) => Point::new(x.x, x.y, 0.0),
            _ => *x,
        }
    }

    /// Potential and field at `x` in one pass.
    pub fn eval(&self, x: &Point) -> (f64, Vector3<f64>) {
        let x = self.flatten(x);
        let mut acc = Vector3::zeros();
        let mut pot = 0.0;
        for (xj, g) in self.nodes.iter().zip(&self.g) {
            let r = x - xj;
            let (f, s) = self.kernel.hessian_coeffs_unchecked(r.norm());
            let rg = r.dot(g);
            pot += f * rg;
            acc += g * f + r * (s * rg);
        }
        match self.mode {
            FitMode::DivFreeSurface => (pot, q_matrix(&self.surface.normal_unchecked(&x)) * acc),
            FitMode::CurlFreeSurface => (-pot, -(p_matrix(&self.surface.normal_unchecked(&x)) * acc)),
            FitMode::CurlFreeEuclidean => (-pot, -acc),
        }
    }

    pub fn eval_field(&self, x: &Point) -> Vector3<f64> {
        self.eval(x).1
    }

    pub fn eval_potential(&self, x: &Point) -> f64 {
        let x = self.flatten(x);
        let pot: f64 = self
            .nodes
            .iter()
            .zip(&self.g)
            .map(|(xj, g)| {
                let r = x - xj;
                self.kernel.hessian_coeffs_unchecked(r.norm()).0 * r.dot(g)
            })
            .sum();
        if self.mode.is_div_free() {
            pot
        } else {
            -pot
        }
    }
}

/// Single interpolant over all samples, the dense reference for small problems.
pub fn fit_global(
    samples: &SampleSet,
    kernel: &RadialKernel,
    surface: Surface,
    mode: FitMode,
) -> Result<LocalFit> {
    if samples.len() > GLOBAL_FIT_LIMIT {
        return Err(Error::TooLarge {
            n: samples.len(),
            limit: GLOBAL_FIT_LIMIT,
        });
    }
    LocalFit::fit(samples.nodes(), samples.values(), kernel, surface, mode, 0)
}
