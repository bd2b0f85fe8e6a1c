//! The global approximant: shifted patch potentials blended with Shepard
//! weights, and the field obtained by differentiating that blend.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::cover::{Cover, WeightEval};
use crate::error::{Error, Result};
use crate::geometry::{p_matrix, q_matrix, Surface};
use crate::glue::{self, GlueGraph, ShiftSolution, ShiftSystem};
use crate::kernel::RadialKernel;
use crate::local::{FitMode, LocalFit, SampleSet};
use crate::Point;

/// Method parameters that do not depend on the cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumConfig {
    pub kernel: RadialKernel,
    pub surface: Surface,
    pub mode: FitMode,
    /// Weighting of the shift least-squares problem; 0 gives plain least squares.
    pub gamma: f64,
    /// Patch whose shift is pinned to zero; defaults to the best-populated patch.
    pub anchor: Option<usize>,
}

impl PumConfig {
    pub fn new(kernel: RadialKernel, surface: Surface, mode: FitMode) -> Self {
        PumConfig {
            kernel,
            surface,
            mode,
            gamma: glue::DEFAULT_GAMMA,
            anchor: None,
        }
    }
}

/// Both parts of the blended field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldTerms {
    /// `sum w_l s_l`, the naive blend.
    pub blend: Vector3<f64>,
    /// `sum (psi_l + b_l) D(w_l)`.
    pub correction: Vector3<f64>,
    /// Blended shifted potential.
    pub potential: f64,
}

impl FieldTerms {
    pub fn field(&self) -> Vector3<f64> {
        self.blend + self.correction
    }
}

#[derive(Debug, Clone)]
pub struct PumApproximant {
    cover: Cover,
    fits: Vec<LocalFit>,
    graph: GlueGraph,
    shifts: ShiftSolution,
    config: PumConfig,
}

impl PumApproximant {
    /// Fits every patch of `cover` in parallel, then solves for the shifts.
    pub fn fit(samples: &SampleSet, cover: Cover, config: PumConfig) -> Result<Self> {
        config.mode.check(config.surface)?;
        if cover.surface() != config.surface {
            return Err(Error::Config(format!(
                "cover is on {} but the fit is on {}",
                cover.surface(),
                config.surface
            )));
        }
        let fits = cover
            .patches()
            .par_iter()
            .enumerate()
            .map(|(l, p)| {
                let x: Vec<Point> = p.members.iter().map(|&i| samples.nodes()[i]).collect();
                let u: Vec<Vector3<f64>> = p.members.iter().map(|&i| samples.values()[i]).collect();
                LocalFit::fit(&x, &u, &config.kernel, config.surface, config.mode, l)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at("local fit"))?;

        let graph = GlueGraph::build(&cover).map_err(|e| e.at("glue"))?;
        let sys = ShiftSystem::build(&graph, |l, x| fits[l].eval_potential(x));
        let anchor = config.anchor.unwrap_or_else(|| glue::default_anchor(&cover));
        let shifts = glue::solve_shifts(&sys, &graph, config.gamma, anchor).map_err(|e| e.at("shift solve"))?;
        PumApproximant::from_parts(cover, fits, graph, shifts, config)
    }

    /// Assembles an approximant from precomputed pieces.
    pub fn from_parts(
        cover: Cover,
        fits: Vec<LocalFit>,
        graph: GlueGraph,
        shifts: ShiftSolution,
        config: PumConfig,
    ) -> Result<Self> {
        let m = cover.len();
        if fits.len() != m || shifts.b.len() != m || graph.patches != m {
            return Err(Error::Config(format!(
                "inconsistent patch counts: cover {m}, fits {}, shifts {}, glue {}",
                fits.len(),
                shifts.b.len(),
                graph.patches
            )));
        }
        Ok(PumApproximant {
            cover,
            fits,
            graph,
            shifts,
            config,
        })
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn fits(&self) -> &[LocalFit] {
        &self.fits
    }

    pub fn graph(&self) -> &GlueGraph {
        &self.graph
    }

    pub fn shifts(&self) -> &ShiftSolution {
        &self.shifts
    }

    pub fn config(&self) -> &PumConfig {
        &self.config
    }

    /// Largest relative linear-system residual over all patches.
    pub fn max_local_residual(&self) -> f64 {
        self.fits.iter().map(|f| f.max_residual()).fold(0.0, f64::max)
    }

    /// Shifted potential `psi_l + b_l` of patch `l`.
    pub fn patch_potential(&self, l: usize, x: &Point) -> f64 {
        self.fits[l].eval_potential(x) + self.shifts.b[l]
    }

    pub fn weights_at(&self, x: &Point) -> Result<WeightEval> {
        self.cover.weights_at(x)
    }

    /// Applies `Q_x`, `P_x`, or the identity to a Euclidean gradient.
    fn apply_operator(&self, x: &Point, g: &Vector3<f64>) -> Vector3<f64> {
        match self.config.mode {
            FitMode::DivFreeSurface => q_matrix(&self.config.surface.normal_unchecked(x)) * g,
            FitMode::CurlFreeSurface => p_matrix(&self.config.surface.normal_unchecked(x)) * g,
            FitMode::CurlFreeEuclidean => *g,
        }
    }

    pub fn eval_terms(&self, x: &Point) -> Result<FieldTerms> {
        let w = self.cover.weights_at(x)?;
        let mut blend = Vector3::zeros();
        let mut grad = Vector3::zeros();
        let mut potential = 0.0;
        for t in &w.terms {
            let (psi, s) = self.fits[t.patch].eval(x);
            let shifted = psi + self.shifts.b[t.patch];
            blend += s * t.w;
            grad += t.grad * shifted;
            potential += t.w * shifted;
        }
        Ok(FieldTerms {
            blend,
            correction: self.apply_operator(x, &grad),
            potential,
        })
    }

    pub fn eval_potential(&self, x: &Point) -> Result<f64> {
        let w = self.cover.weights_at(x)?;
        Ok(w.terms
            .iter()
            .map(|t| t.w * self.patch_potential(t.patch, x))
            .sum())
    }

    pub fn eval_field(&self, x: &Point) -> Result<Vector3<f64>> {
        Ok(self.eval_terms(x)?.field())
    }

    /// `sum w_l s_l` without the weight-gradient correction.
    pub fn eval_field_naive(&self, x: &Point) -> Result<Vector3<f64>> {
        let w = self.cover.weights_at(x)?;
        Ok(w.terms
            .iter()
            .map(|t| self.fits[t.patch].eval_field(x) * t.w)
            .sum())
    }

    /// Potentials and fields at `points`, in order, evaluated in parallel.
    pub fn batch_eval(&self, points: &[Point]) -> Result<(Vec<f64>, Vec<Vector3<f64>>)> {
        let out: Vec<Option<FieldTerms>> = points
            .par_iter()
            .map(|x| self.eval_terms(x).ok())
            .collect();
        let missing: Vec<usize> = out
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.is_none().then_some(i))
            .collect();
        if !missing.is_empty() {
            return Err(Error::UncoveredPoints { indices: missing });
        }
        Ok(out
            .into_iter()
            .flatten()
            .map(|t| (t.potential, t.field()))
            .unzip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{kappa, spacing_from_q};
    use crate::glue::solve_shifts;
    use crate::local::fit_global;
    use crate::testbed::{ProblemId, TestProblem};
    use crate::testutil::{fd_gradient, fd_jacobian, random_unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Case {
        prob: TestProblem,
        samples: SampleSet,
        cover: Cover,
        config: PumConfig,
    }

    fn case(id: ProblemId, n: usize, q: f64, seed: u64) -> Case {
        let prob = TestProblem::new(id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = prob.nodes(n, &mut rng);
        let values = nodes.iter().map(|x| prob.field(x)).collect();
        let samples = SampleSet::new(nodes, values, prob.surface()).unwrap();
        let h = spacing_from_q(q, prob.area(), samples.len(), prob.dim()).unwrap();
        let cover = Cover::build(&prob.centers(h).unwrap(), samples.nodes(), prob.default_delta(), h, prob.surface()).unwrap();
        let config = PumConfig::new(prob.default_kernel(), prob.surface(), prob.mode());
        Case {
            prob,
            samples,
            cover,
            config,
        }
    }

    fn random_inside(prob: &TestProblem, rng: &mut ChaCha8Rng) -> Point {
        match prob.id {
            ProblemId::SphereJet => random_unit(rng),
            _ => loop {
                let mut p = Point::new(rng.gen_range(-1.6..1.6), rng.gen_range(-1.6..1.6), 0.0);
                if prob.dim() == 3 {
                    p.z = rng.gen_range(-1.0..1.0);
                }
                if prob.inside(&p) {
                    return p;
                }
            },
        }
    }

    #[test]
    fn single_patch_matches_local_fit() {
        let c = case(ProblemId::Star2D, 300, 8.0, 1);
        let cover = Cover::single_patch(c.samples.nodes(), c.config.surface).unwrap();
        let pum = PumApproximant::fit(&c.samples, cover, c.config).unwrap();
        let global = fit_global(&c.samples, &c.config.kernel, c.config.surface, c.config.mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = random_inside(&c.prob, &mut rng);
            let f = pum.eval_field(&x).unwrap();
            assert_eq!(f, pum.fits()[0].eval_field(&x));
            assert_eq!(f, pum.eval_field_naive(&x).unwrap());
            assert!((f - global.eval_field(&x)).norm() <= 1e-10 * f.norm().max(1.0));
            assert_eq!(pum.eval_potential(&x).unwrap(), pum.fits()[0].eval_potential(&x) + pum.shifts().b[0]);
        }
    }

    #[test]
    fn potential_matches_unpruned_sum() {
        let c = case(ProblemId::Star2D, 1500, 8.0, 3);
        let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = random_inside(&c.prob, &mut rng);
            if !pum.cover().covers(&x) {
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for (l, p) in pum.cover().patches().iter().enumerate() {
                let k = kappa((x - p.center).norm() / p.radius);
                num += k * pum.patch_potential(l, &x);
                den += k;
            }
            let got = pum.eval_potential(&x).unwrap();
            assert!((got - num / den).abs() <= 1e-14 * got.abs().max(1.0));
        }
    }

    #[test]
    fn common_shift_moves_potential() {
        let c = case(ProblemId::SphereJet, 1500, 6.0, 5);
        let a = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let mut shifted = a.shifts().clone();
        shifted.b.add_scalar_mut(2.5);
        let b = PumApproximant::from_parts(a.cover().clone(), a.fits().to_vec(), a.graph().clone(), shifted, c.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let x = random_unit(&mut rng);
            let (pa, pb) = (a.eval_potential(&x).unwrap(), b.eval_potential(&x).unwrap());
            assert!((pb - pa - 2.5).abs() < 1e-12);
            assert!((a.eval_field(&x).unwrap() - b.eval_field(&x).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn anchor_only_changes_a_constant() {
        let c = case(ProblemId::Star2D, 1500, 8.0, 7);
        let a = PumApproximant::fit(&c.samples, c.cover.clone(), c.config).unwrap();
        let mut cfg = c.config;
        cfg.anchor = Some(a.cover().len() - 1);
        let b = PumApproximant::fit(&c.samples, c.cover, cfg).unwrap();
        let d = &a.shifts().b - &b.shifts().b;
        assert!(d.add_scalar(-d[0]).amax() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = random_inside(&c.prob, &mut rng);
            if let (Ok(fa), Ok(fb)) = (a.eval_field(&x), b.eval_field(&x)) {
                assert!((fa - fb).norm() <= 1e-10 * fa.norm().max(1.0));
            }
        }
    }

    #[test]
    fn identical_potentials_need_no_correction() {
        let c = case(ProblemId::Star2D, 400, 6.0, 9);
        let global = fit_global(&c.samples, &c.config.kernel, c.config.surface, c.config.mode).unwrap();
        let m = c.cover.len();
        let graph = GlueGraph::build(&c.cover).unwrap();
        let sys = ShiftSystem::build(&graph, |_, x| global.eval_potential(x));
        let shifts = solve_shifts(&sys, &graph, 4.0, 0).unwrap();
        assert!(shifts.b.amax() == 0.0 && sys.c.amax() == 0.0);
        let pum = PumApproximant::from_parts(c.cover, vec![global.clone(); m], graph, shifts, c.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let x = random_inside(&c.prob, &mut rng);
            if let Ok(t) = pum.eval_terms(&x) {
                let scale = t.blend.norm().max(1.0) * t.potential.abs().max(1.0);
                assert!(t.correction.norm() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn field_is_derivative_of_potential() {
        for (id, n, q) in [
            (ProblemId::Star2D, 2000, 8.0),
            (ProblemId::SphereJet, 2000, 6.0),
            (ProblemId::BallCharges, 2000, 3.0),
        ] {
            let c = case(id, n, q, 11);
            let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let mut checked = 0;
            for _ in 0..100 {
                let x = random_inside(&c.prob, &mut rng);
                let Ok(f) = pum.eval_field(&x) else { continue };
                let g = fd_gradient(|p| pum.eval_potential(&p).unwrap_or(f64::NAN), x, 1e-5);
                if !g.iter().all(|v| v.is_finite()) {
                    continue;
                }
                let d = pum.apply_operator(&x, &g);
                assert!((d - f).norm() <= 1e-5 * f.norm().max(1.0), "{id}: {d:?} vs {f:?}");
                if c.config.surface.is_embedded_surface() {
                    let n = c.config.surface.normal_unchecked(&x);
                    assert!(n.dot(&f).abs() <= 1e-10 * f.norm());
                }
                checked += 1;
            }
            assert!(checked > 80, "{id}: {checked}");
        }
    }

    #[test]
    fn conserved_field_beats_naive_blend() {
        let c = case(ProblemId::Star2D, 3000, 8.0, 13);
        let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (mut worst, mut naive) = (0.0f64, 0.0f64);
        let scale = c.samples.values().iter().map(|u| u.norm()).fold(0.0, f64::max);
        for _ in 0..100 {
            let x = random_inside(&c.prob, &mut rng);
            let h = 1e-4;
            let ok = |p: Point| pum.cover().covers(&p);
            if ![(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
                .iter()
                .all(|&(a, b)| ok(x + Point::new(2.0 * a, 2.0 * b, 0.0)))
            {
                continue;
            }
            let j = fd_jacobian(|p| pum.eval_field(&p).unwrap(), x, h);
            let jn = fd_jacobian(|p| pum.eval_field_naive(&p).unwrap(), x, h);
            worst = worst.max((j[(0, 0)] + j[(1, 1)]).abs());
            naive = naive.max((jn[(0, 0)] + jn[(1, 1)]).abs());
        }
        assert!(worst <= 1e-4 * scale, "{worst}");
        assert!(naive >= 1e2 * worst.max(1e-12));
    }

    #[test]
    fn naive_blend_interpolates_and_field_is_near() {
        let c = case(ProblemId::SphereJet, 2000, 6.0, 15);
        let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let scale = c.samples.values().iter().map(|u| u.norm()).fold(0.0, f64::max);
        let mut multi = 0;
        for (x, u) in c.samples.nodes().iter().zip(c.samples.values()).take(300) {
            let w = pum.weights_at(x).unwrap();
            if w.terms.len() > 1 {
                multi += 1;
            }
            let naive = pum.eval_field_naive(x).unwrap();
            assert!((naive - u).norm() <= 1e-8 * scale);
            let terms = pum.eval_terms(x).unwrap();
            assert_eq!(terms.field() - terms.correction, terms.blend);
            // the correction is bounded by potential mismatch times weight gradients
            let base = pum.patch_potential(w.terms[0].patch, x);
            let bound: f64 = w
                .terms
                .iter()
                .map(|t| (pum.patch_potential(t.patch, x) - base).abs() * t.grad.norm())
                .sum();
            assert!((terms.field() - u).norm() <= bound + 1e-8 * scale);
        }
        assert!(multi > 100);
    }

    #[test]
    fn batch_matches_pointwise() {
        let c = case(ProblemId::BallCharges, 1500, 3.0, 16);
        let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Point> = (0..1000).map(|_| random_inside(&c.prob, &mut rng)).filter(|p| pum.cover().covers(p)).collect();
        let (pots, fields) = pum.batch_eval(&pts).unwrap();
        for (i, x) in pts.iter().enumerate() {
            assert_eq!(pots[i], pum.eval_potential(x).unwrap());
            assert_eq!(fields[i], pum.eval_field(x).unwrap());
        }
        let (p0, f0) = pum.batch_eval(&[]).unwrap();
        assert!(p0.is_empty() && f0.is_empty());
        let bad = vec![pts[0], Point::new(5.0, 0.0, 0.0), pts[1], Point::new(0.0, 9.0, 0.0)];
        match pum.batch_eval(&bad) {
            Err(Error::UncoveredPoints { indices }) => assert_eq!(indices, vec![1, 3]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(pum.eval_field(&bad[1]), Err(Error::NotCovered { .. })));
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        let c = case(ProblemId::Star2D, 500, 8.0, 18);
        let pum = PumApproximant::fit(&c.samples, c.cover, c.config).unwrap();
        let fits = pum.fits()[1..].to_vec();
        assert!(PumApproximant::from_parts(pum.cover().clone(), fits, pum.graph().clone(), pum.shifts().clone(), c.config).is_err());
        let mut cfg = c.config;
        cfg.surface = Surface::Sphere2;
        assert!(PumApproximant::fit(&c.samples, pum.cover().clone(), cfg).is_err());
    }
}
