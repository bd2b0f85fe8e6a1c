//! Convergence experiments on the analytic test problems: error norms,
//! timing, rate fits, and CSV output.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cover::{self, Cover};
use crate::error::{Error, Result};
use crate::geometry::Surface;
use crate::kernel::{KernelFamily, RadialKernel};
use crate::local::{FitMode, SampleSet};
use crate::pum::{PumApproximant, PumConfig};
use crate::testbed::{ProblemId, TestProblem};
use crate::Point;

pub const CSV_HEADER: &str = "problem,kernel,eps,q,delta,gamma,N,trial,err_field_inf,err_field_2,err_pot_inf,err_pot_2,glue_res_inf,t_fit_ms,t_eval_ms";

/// Stream offset that keeps evaluation sets disjoint from training sets.
const EVAL_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub kernel: RadialKernel,
    pub q: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Target node counts.
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub eval_n: usize,
    /// Run trials concurrently (patch fits are parallel either way).
    pub parallel_trials: bool,
}

impl RunConfig {
    /// Defaults for `problem`: its kernel and overlap, the middle `q`.
    pub fn for_problem(problem: ProblemId) -> Self {
        let p = TestProblem::new(problem);
        RunConfig {
            problem,
            kernel: p.default_kernel(),
            q: p.default_qs()[1],
            delta: p.default_delta(),
            gamma: crate::glue::DEFAULT_GAMMA,
            ns: Vec::new(),
            trials: 5,
            seed: 0,
            eval_n: 20_000,
            parallel_trials: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.q > 0.0) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 10) {
            return bad(format!("node counts must be at least 10, got {n}"));
        }
        if self.eval_n < 10 {
            return bad(format!("evaluation set needs at least 10 points, got {}", self.eval_n));
        }
        Ok(())
    }
}

/// Outcome of one (N, trial) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub n_target: usize,
    pub n: usize,
    pub trial: usize,
    pub err_field_inf: f64,
    pub err_field_2: f64,
    pub err_pot_inf: f64,
    pub err_pot_2: f64,
    pub glue_res_inf: f64,
    pub t_fit_ms: f64,
    pub t_eval_ms: f64,
    pub patches: usize,
    pub mean_members: f64,
    pub max_local_residual: f64,
    /// Evaluation points outside the cover, left out of the error norms.
    pub uncovered_eval: usize,
}

/// Trial means for one target N.
#[derive(Debug, Clone, PartialEq)]
pub struct NSummary {
    pub n_target: usize,
    pub n_mean: f64,
    pub err_field_inf: f64,
    pub err_field_2: f64,
    pub err_pot_inf: f64,
    pub err_pot_2: f64,
    pub glue_res_inf: f64,
    pub t_fit_ms: f64,
    pub t_eval_ms: f64,
    pub mean_members: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub trials: Vec<TrialResult>,
}

impl RunResult {
    /// Per-N means over trials, in the order of `config.ns`.
    pub fn summary(&self) -> Vec<NSummary> {
        self.config
            .ns
            .iter()
            .filter_map(|&nt| {
                let rows: Vec<&TrialResult> = self.trials.iter().filter(|t| t.n_target == nt).collect();
                if rows.is_empty() {
                    return None;
                }
                let mean = |f: &dyn Fn(&TrialResult) -> f64| rows.iter().map(|t| f(t)).sum::<f64>() / rows.len() as f64;
                Some(NSummary {
                    n_target: nt,
                    n_mean: mean(&|t| t.n as f64),
                    err_field_inf: mean(&|t| t.err_field_inf),
                    err_field_2: mean(&|t| t.err_field_2),
                    err_pot_inf: mean(&|t| t.err_pot_inf),
                    err_pot_2: mean(&|t| t.err_pot_2),
                    glue_res_inf: mean(&|t| t.glue_res_inf),
                    t_fit_ms: mean(&|t| t.t_fit_ms),
                    t_eval_ms: mean(&|t| t.t_eval_ms),
                    mean_members: mean(&|t| t.mean_members),
                })
            })
            .collect()
    }

    /// Rate fit of one error column of the summary.
    pub fn rate(&self, model: RateModel, column: fn(&NSummary) -> f64) -> Result<RateFit> {
        let s = self.summary();
        let ns: Vec<f64> = s.iter().map(|r| r.n_mean).collect();
        let errs: Vec<f64> = s.iter().map(column).collect();
        fit_rate(&ns, &errs, model)
    }

    /// Model matching the kernel: algebraic for Matern, super-algebraic for IMQ.
    pub fn default_model(&self) -> RateModel {
        match self.config.kernel.family() {
            KernelFamily::Matern4 => RateModel::Algebraic,
            KernelFamily::Imq => RateModel::SuperAlgebraic(TestProblem::new(self.config.problem).dim()),
        }
    }
}

/// Relative max-norm and 2-norm errors of vector values.
pub fn field_errors(approx: &[Vector3<f64>], exact: &[Vector3<f64>]) -> (f64, f64) {
    let mut num_inf: f64 = 0.0;
    let mut den_inf: f64 = 0.0;
    let (mut num2, mut den2) = (0.0, 0.0);
    for (s, u) in approx.iter().zip(exact) {
        let e = (s - u).norm();
        num_inf = num_inf.max(e);
        den_inf = den_inf.max(u.norm());
        num2 += e * e;
        den2 += u.norm_squared();
    }
    (num_inf / den_inf, (num2 / den2).sqrt())
}

/// Relative errors of scalar potentials after removing the mean of each.
pub fn potential_errors(approx: &[f64], exact: &[f64]) -> (f64, f64) {
    let n = approx.len() as f64;
    let ma = approx.iter().sum::<f64>() / n;
    let me = exact.iter().sum::<f64>() / n;
    let mut num_inf: f64 = 0.0;
    let mut den_inf: f64 = 0.0;
    let (mut num2, mut den2) = (0.0, 0.0);
    for (a, e) in approx.iter().zip(exact) {
        let (a, e) = (a - ma, e - me);
        num_inf = num_inf.max((a - e).abs());
        den_inf = den_inf.max(e.abs());
        num2 += (a - e) * (a - e);
        den2 += e * e;
    }
    (num_inf / den_inf, (num2 / den2).sqrt())
}

fn trial_rngs(seed: u64, n: usize, trial: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let stream = ((n as u64) << 20) ^ trial as u64;
    let mut train = ChaCha8Rng::seed_from_u64(seed);
    train.set_stream(stream);
    let mut eval = ChaCha8Rng::seed_from_u64(seed);
    eval.set_stream(stream | EVAL_STREAM);
    (train, eval)
}

/// Nodes, samples, and cover for one trial; exposed for timing studies.
pub fn prepare_trial(cfg: &RunConfig, n: usize, trial: usize) -> Result<(SampleSet, Vec<Point>)> {
    let prob = TestProblem::new(cfg.problem);
    let (mut train, _) = trial_rngs(cfg.seed, n, trial);
    let nodes = prob.nodes(n, &mut train);
    let values = nodes.iter().map(|x| prob.field(x)).collect();
    let samples = SampleSet::new(nodes, values, prob.surface()).map_err(|e| e.at("sampling"))?;
    let h = cover::spacing_from_q(cfg.q, prob.area(), samples.len(), prob.dim())?;
    let centers = prob.centers(h).map_err(|e| e.at("patch centers"))?;
    Ok((samples, centers))
}

/// Builds the cover and fits the approximant for prepared data.
pub fn fit_prepared(cfg: &RunConfig, samples: &SampleSet, centers: &[Point]) -> Result<PumApproximant> {
    let prob = TestProblem::new(cfg.problem);
    let h = cover::spacing_from_q(cfg.q, prob.area(), samples.len(), prob.dim())?;
    let cover = Cover::build(centers, samples.nodes(), cfg.delta, h, prob.surface()).map_err(|e| e.at("cover"))?;
    let mut pc = PumConfig::new(cfg.kernel, prob.surface(), prob.mode());
    pc.gamma = cfg.gamma;
    PumApproximant::fit(samples, cover, pc)
}

pub fn run_trial(cfg: &RunConfig, n: usize, trial: usize) -> Result<TrialResult> {
    let prob = TestProblem::new(cfg.problem);
    let (samples, centers) = prepare_trial(cfg, n, trial)?;

    let t0 = Instant::now();
    let pum = fit_prepared(cfg, &samples, &centers)?;
    let t_fit = t0.elapsed().as_secs_f64() * 1e3;

    let (_, mut eval_rng) = trial_rngs(cfg.seed, n, trial);
    let all = prob.nodes(cfg.eval_n, &mut eval_rng);
    let (pts, outside): (Vec<Point>, Vec<Point>) = all.into_iter().partition(|x| pum.cover().covers(x));

    let t1 = Instant::now();
    let (pots, fields) = pum.batch_eval(&pts).map_err(|e| e.at("evaluation"))?;
    let t_eval = t1.elapsed().as_secs_f64() * 1e3;

    let exact_f: Vec<Vector3<f64>> = pts.iter().map(|x| prob.field(x)).collect();
    let exact_p: Vec<f64> = pts.iter().map(|x| prob.potential(x)).collect();
    let (efi, ef2) = field_errors(&fields, &exact_f);
    let (epi, ep2) = potential_errors(&pots, &exact_p);
    Ok(TrialResult {
        n_target: n,
        n: samples.len(),
        trial,
        err_field_inf: efi,
        err_field_2: ef2,
        err_pot_inf: epi,
        err_pot_2: ep2,
        glue_res_inf: pum.shifts().residual_inf(),
        t_fit_ms: t_fit,
        t_eval_ms: t_eval,
        patches: pum.cover().len(),
        mean_members: pum.cover().mean_members(),
        max_local_residual: pum.max_local_residual(),
        uncovered_eval: outside.len(),
    })
}

/// Runs every (N, trial) pair; deterministic given the seed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let run = |&(n, t): &(usize, usize)| run_trial(cfg, n, t).map_err(|e| e.at(format!("N = {n}, trial {t}")));
    let trials = if cfg.parallel_trials {
        jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        jobs.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(RunResult {
        config: cfg.clone(),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `log err` against `log sqrt N`; the slope is reported.
    Algebraic,
    /// `log err` against `log(N) N^{1/(2d)}`; `C = -slope` is reported.
    SuperAlgebraic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Slope (algebraic) or decay constant `C` (super-algebraic).
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x(N), log err)`.
pub fn fit_rate(ns: &[f64], errs: &[f64], model: RateModel) -> Result<RateFit> {
    if ns.len() != errs.len() {
        return Err(Error::Config("rate fit needs one error per N".into()));
    }
    let mut distinct: Vec<f64> = ns.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewPoints(distinct.len()));
    }
    if let Some(e) = errs.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Domain(format!("errors must be positive and finite, got {e}")));
    }
    let x: Vec<f64> = ns
        .iter()
        .map(|&n| match model {
            RateModel::Algebraic => n.sqrt().ln(),
            RateModel::SuperAlgebraic(d) => n.ln() * n.powf(1.0 / (2.0 * d as f64)),
        })
        .collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let rate = match model {
        RateModel::Algebraic => slope,
        RateModel::SuperAlgebraic(_) => -slope,
    };
    Ok(RateFit { rate, intercept, r2 })
}

pub fn emit_csv<W: Write>(result: &RunResult, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let c = &result.config;
    for t in &result.trials {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.problem,
            c.kernel.family(),
            c.kernel.eps(),
            c.q,
            c.delta,
            c.gamma,
            t.n,
            t.trial,
            t.err_field_inf,
            t.err_field_2,
            t.err_pot_inf,
            t.err_pot_2,
            t.glue_res_inf,
            t.t_fit_ms,
            t.t_eval_ms
        )?;
    }
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub problem: String,
    pub kernel: String,
    pub eps: f64,
    pub q: f64,
    pub delta: f64,
    pub gamma: f64,
    pub n: usize,
    pub trial: usize,
    /// `err_field_inf` through `t_eval_ms`, in header order.
    pub values: [f64; 7],
}

pub fn parse_csv<R: BufRead>(reader: R) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(err(format!("expected 15 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("'{s}': {e}")));
        let mut values = [0.0; 7];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(f[8 + k])?;
        }
        rows.push(CsvRow {
            problem: f[0].to_string(),
            kernel: f[1].to_string(),
            eps: num(f[2])?,
            q: num(f[3])?,
            delta: num(f[4])?,
            gamma: num(f[5])?,
            n: int(f[6])?,
            trial: int(f[7])?,
            values,
        });
    }
    Ok(rows)
}

/// Human-readable per-N means followed by rate fits where possible.
pub fn emit_summary(result: &RunResult) -> String {
    let mut s = String::new();
    let c = &result.config;
    let _ = writeln!(
        s,
        "{} kernel={} eps={} q={} delta={} gamma={} trials={}",
        c.problem,
        c.kernel.family(),
        c.kernel.eps(),
        c.q,
        c.delta,
        c.gamma,
        c.trials
    );
    let _ = writeln!(
        s,
        "{:>8} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10} {:>8}",
        "N", "N_mean", "field_inf", "field_2", "pot_inf", "pot_2", "glue_res", "fit_ms", "eval_ms", "members"
    );
    for r in result.summary() {
        let _ = writeln!(
            s,
            "{:>8} {:>10.1} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.1} {:>10.1} {:>8.1}",
            r.n_target,
            r.n_mean,
            r.err_field_inf,
            r.err_field_2,
            r.err_pot_inf,
            r.err_pot_2,
            r.glue_res_inf,
            r.t_fit_ms,
            r.t_eval_ms,
            r.mean_members
        );
    }
    let model = result.default_model();
    let label = match model {
        RateModel::Algebraic => "slope vs log sqrt(N)".to_string(),
        RateModel::SuperAlgebraic(d) => format!("C in exp(-C log(N) N^(1/{}))", 2 * d),
    };
    let columns: [(&str, fn(&NSummary) -> f64); 4] = [
        ("field_inf", |r| r.err_field_inf),
        ("field_2", |r| r.err_field_2),
        ("pot_inf", |r| r.err_pot_inf),
        ("pot_2", |r| r.err_pot_2),
    ];
    for (name, col) in columns {
        match result.rate(model, col) {
            Ok(f) => {
                let _ = writeln!(s, "rate {name}: {label} = {:.4} (R^2 = {:.4})", f.rate, f.r2);
            }
            Err(e) => {
                let _ = writeln!(s, "rate {name}: not available ({e})");
            }
        }
    }
    s
}

/// Patch cover for user-supplied nodes: lattice centers over the bounding
/// box (Fibonacci points on the sphere) with spacing from `q`.
pub fn auto_cover(nodes: &[Point], surface: Surface, q: f64, delta: f64) -> Result<Cover> {
    surface.validate()?;
    if nodes.is_empty() {
        return Err(Error::Config("no nodes".into()));
    }
    let (mut lo, mut hi) = (nodes[0], nodes[0]);
    for x in nodes {
        lo = lo.inf(x);
        hi = hi.sup(x);
    }
    let ext = hi - lo;
    let (area, dim) = match surface {
        Surface::Sphere2 => (4.0 * std::f64::consts::PI, 2),
        Surface::Plane2D | Surface::Euclidean(2) => (ext.x * ext.y, 2),
        _ => (ext.x * ext.y * ext.z, 3),
    };
    if !(area > 0.0) {
        return Err(Error::Config("nodes span a degenerate bounding box".into()));
    }
    let h = cover::spacing_from_q(q, area, nodes.len(), dim)?;
    let centers = match surface {
        Surface::Sphere2 => cover::centers_sphere(h)?,
        Surface::Plane2D | Surface::Euclidean(2) => cover::centers_plane(&|_| true, (lo.x, lo.y), (hi.x, hi.y), h)?,
        _ => cover::centers_box(&lo, &hi, h)?,
    };
    Cover::build(&centers, nodes, delta, h, surface)
}

/// Fits user data on an automatic cover.
pub fn fit_custom(
    samples: &SampleSet,
    kernel: RadialKernel,
    surface: Surface,
    mode: FitMode,
    q: f64,
    delta: f64,
    gamma: f64,
) -> Result<PumApproximant> {
    mode.check(surface)?;
    let cover = auto_cover(samples.nodes(), surface, q, delta).map_err(|e| e.at("cover"))?;
    let mut pc = PumConfig::new(kernel, surface, mode);
    pc.gamma = gamma;
    PumApproximant::fit(samples, cover, pc)
}
