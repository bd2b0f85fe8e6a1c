//! Python bindings: fit approximants to user data, evaluate them, and run
//! the built-in convergence experiments.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rbf_pum::experiment::{self, RateModel, RunConfig};
use rbf_pum::testbed::{ProblemId, TestProblem};
use rbf_pum::{Error, FitMode, KernelFamily, Point, PumApproximant, RadialKernel, SampleSet, Surface};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Accepts rows of 2 or 3 numbers; 2-component rows get `z = 0`.
pub fn rows_to_points(rows: &[Vec<f64>]) -> Result<Vec<Point>, Error> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.len() {
            2 => Ok(Point::new(r[0], r[1], 0.0)),
            3 => Ok(Point::new(r[0], r[1], r[2])),
            n => Err(Error::Config(format!("row {i} has {n} components, expected 2 or 3"))),
        })
        .collect()
}

pub fn points_to_rows(pts: &[Point], dim: usize) -> Vec<Vec<f64>> {
    pts.iter().map(|p| p.iter().take(dim).copied().collect()).collect()
}

/// Fills in the fit mode a surface usually wants.
pub fn default_mode(surface: Surface) -> FitMode {
    match surface {
        Surface::Euclidean(_) => FitMode::CurlFreeEuclidean,
        _ => FitMode::DivFreeSurface,
    }
}

/// A fitted partition-of-unity approximant.
#[pyclass(name = "Approximant", frozen)]
struct PyApproximant {
    inner: PumApproximant,
    dim: usize,
}

#[pymethods]
impl PyApproximant {
    /// Fit samples `values` at `nodes` on an automatic patch cover.
    #[new]
    #[pyo3(signature = (nodes, values, surface="plane", mode=None, kernel="imq", eps=1.0, q=8.0, delta=0.5, gamma=4.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        py: Python<'_>,
        nodes: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
        surface: &str,
        mode: Option<&str>,
        kernel: &str,
        eps: f64,
        q: f64,
        delta: f64,
        gamma: f64,
    ) -> PyResult<Self> {
        let surface: Surface = surface.parse().map_err(to_py)?;
        let mode = match mode {
            Some(m) => m.parse().map_err(to_py)?,
            None => default_mode(surface),
        };
        let family: KernelFamily = kernel.parse().map_err(to_py)?;
        let kernel = RadialKernel::new(family, eps).map_err(to_py)?;
        let nodes = rows_to_points(&nodes).map_err(to_py)?;
        let values = rows_to_points(&values).map_err(to_py)?;
        let samples = SampleSet::new(nodes, values, surface).map_err(to_py)?;
        let inner = py
            .detach(|| experiment::fit_custom(&samples, kernel, surface, mode, q, delta, gamma))
            .map_err(to_py)?;
        Ok(PyApproximant {
            inner,
            dim: surface.dim(),
        })
    }

    /// Potentials and fields at `points`; raises if any point is uncovered.
    fn eval(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let pts = rows_to_points(&points).map_err(to_py)?;
        let (p, f) = py.detach(|| self.inner.batch_eval(&pts)).map_err(to_py)?;
        Ok((p, points_to_rows(&f, self.dim)))
    }

    fn field(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.eval(py, points)?.1)
    }

    fn potential(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.eval(py, points)?.0)
    }

    /// Whether each point lies inside some patch.
    fn covers(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<bool>> {
        let pts = rows_to_points(&points).map_err(to_py)?;
        Ok(pts.iter().map(|x| self.inner.cover().covers(x)).collect())
    }

    /// `(center, radius, members)` for every patch.
    fn patches(&self) -> Vec<(Vec<f64>, f64, usize)> {
        self.inner
            .cover()
            .patches()
            .iter()
            .map(|p| (p.center.iter().copied().collect(), p.radius, p.members.len()))
            .collect()
    }

    #[getter]
    fn num_patches(&self) -> usize {
        self.inner.cover().len()
    }

    #[getter]
    fn mean_members(&self) -> f64 {
        self.inner.cover().mean_members()
    }

    #[getter]
    fn shifts(&self) -> Vec<f64> {
        self.inner.shifts().b.iter().copied().collect()
    }

    #[getter]
    fn glue_residual(&self) -> f64 {
        self.inner.shifts().residual_inf()
    }

    #[getter]
    fn max_local_residual(&self) -> f64 {
        self.inner.max_local_residual()
    }

    fn __repr__(&self) -> String {
        format!(
            "Approximant({} patches, mode {}, kernel {} eps={})",
            self.inner.cover().len(),
            self.inner.config().mode,
            self.inner.config().kernel.family(),
            self.inner.config().kernel.eps()
        )
    }
}

fn problem(name: &str) -> PyResult<TestProblem> {
    Ok(TestProblem::new(name.parse::<ProblemId>().map_err(to_py)?))
}

/// Nodes of a built-in problem ("star2d", "sphere", "ball").
#[pyfunction]
#[pyo3(signature = (name, n, seed=0))]
fn problem_nodes(name: &str, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    use rand::SeedableRng;
    let p = problem(name)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Ok(points_to_rows(&p.nodes(n, &mut rng), p.surface().dim()))
}

/// Exact field of a built-in problem.
#[pyfunction]
fn problem_field(name: &str, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let p = problem(name)?;
    let pts = rows_to_points(&points).map_err(to_py)?;
    let f: Vec<Point> = pts.iter().map(|x| p.field(x)).collect();
    Ok(points_to_rows(&f, p.surface().dim()))
}

/// Exact potential of a built-in problem, with the sign convention of the
/// approximant's potential.
#[pyfunction]
fn problem_potential(name: &str, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let p = problem(name)?;
    let pts = rows_to_points(&points).map_err(to_py)?;
    Ok(pts.iter().map(|x| p.potential(x)).collect())
}

/// Runs a convergence experiment; returns one dict per (N, trial).
#[pyfunction]
#[pyo3(signature = (name, ns, trials=5, seed=0, eval_n=20000, kernel=None, eps=None, q=None, delta=None, gamma=4.0))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    ns: Vec<usize>,
    trials: usize,
    seed: u64,
    eval_n: usize,
    kernel: Option<&str>,
    eps: Option<f64>,
    q: Option<f64>,
    delta: Option<f64>,
    gamma: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let id: ProblemId = name.parse().map_err(to_py)?;
    let mut cfg = RunConfig::for_problem(id);
    let def = cfg.kernel;
    let family = match kernel {
        Some(k) => k.parse().map_err(to_py)?,
        None => def.family(),
    };
    let eps = eps.unwrap_or(if family == def.family() { def.eps() } else { 1.0 });
    cfg.kernel = RadialKernel::new(family, eps).map_err(to_py)?;
    cfg.q = q.unwrap_or(cfg.q);
    cfg.delta = delta.unwrap_or(cfg.delta);
    cfg.gamma = gamma;
    cfg.ns = ns;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.eval_n = eval_n;
    let res = py.detach(|| experiment::run_experiment(&cfg)).map_err(to_py)?;
    res.trials
        .iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("n", t.n)?;
            d.set_item("n_target", t.n_target)?;
            d.set_item("trial", t.trial)?;
            d.set_item("err_field_inf", t.err_field_inf)?;
            d.set_item("err_field_2", t.err_field_2)?;
            d.set_item("err_pot_inf", t.err_pot_inf)?;
            d.set_item("err_pot_2", t.err_pot_2)?;
            d.set_item("glue_res_inf", t.glue_res_inf)?;
            d.set_item("t_fit_ms", t.t_fit_ms)?;
            d.set_item("t_eval_ms", t.t_eval_ms)?;
            d.set_item("patches", t.patches)?;
            d.set_item("mean_members", t.mean_members)?;
            Ok(d)
        })
        .collect()
}

/// Least-squares rate fit. `model` is "algebraic" (slope against log sqrt N)
/// or "superalgebraic" (decay constant C against log(N) N^(1/(2 dim))).
#[pyfunction]
#[pyo3(signature = (ns, errors, model="algebraic", dim=2))]
fn fit_rate(ns: Vec<f64>, errors: Vec<f64>, model: &str, dim: usize) -> PyResult<(f64, f64)> {
    let m = match model {
        "algebraic" => RateModel::Algebraic,
        "superalgebraic" => RateModel::SuperAlgebraic(dim),
        other => return Err(PyValueError::new_err(format!("unknown rate model '{other}'"))),
    };
    let f = experiment::fit_rate(&ns, &errors, m).map_err(to_py)?;
    Ok((f.rate, f.r2))
}

#[pymodule]
fn rbf_pum_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyApproximant>()?;
    m.add_function(wrap_pyfunction!(problem_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(problem_field, m)?)?;
    m.add_function(wrap_pyfunction!(problem_potential, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_conversion() {
        let pts = rows_to_points(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(pts[1], Point::new(3.0, 4.0, 0.0));
        assert_eq!(points_to_rows(&pts, 2), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(rows_to_points(&[vec![1.0]]).is_err());
    }

    #[test]
    fn modes_follow_surface() {
        assert_eq!(default_mode(Surface::Sphere2), FitMode::DivFreeSurface);
        assert_eq!(default_mode(Surface::Euclidean(3)), FitMode::CurlFreeEuclidean);
    }
}
