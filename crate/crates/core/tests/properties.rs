use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbf_pum::experiment::{self, RunConfig};
use rbf_pum::testbed::ProblemId;
use rbf_pum::{Point, PumApproximant, ShiftSolution};

fn fit(id: ProblemId, n: usize) -> PumApproximant {
    let cfg = RunConfig::for_problem(id);
    let (s, c) = experiment::prepare_trial(&cfg, n, 0).unwrap();
    experiment::fit_prepared(&cfg, &s, &c).unwrap()
}

fn sphere() -> &'static PumApproximant {
    static P: OnceLock<PumApproximant> = OnceLock::new();
    P.get_or_init(|| fit(ProblemId::SphereJet, 600))
}

fn ball() -> &'static PumApproximant {
    static P: OnceLock<PumApproximant> = OnceLock::new();
    P.get_or_init(|| fit(ProblemId::BallCharges, 800))
}

fn sphere_point(a: f64, b: f64) -> Point {
    let z = 2.0 * a - 1.0;
    let r = (1.0 - z * z).sqrt();
    let t = 2.0 * std::f64::consts::PI * b;
    Point::new(r * t.cos(), r * t.sin(), z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn common_shift_moves_potential_only(shift in -100.0..100.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let pum = sphere();
        let mut sol: ShiftSolution = pum.shifts().clone();
        sol.b.add_scalar_mut(shift);
        let moved = PumApproximant::from_parts(
            pum.cover().clone(),
            pum.fits().to_vec(),
            pum.graph().clone(),
            sol,
            *pum.config(),
        )
        .unwrap();
        let x = sphere_point(a, b);
        let dp = moved.eval_potential(&x).unwrap() - pum.eval_potential(&x).unwrap();
        prop_assert!((dp - shift).abs() <= 1e-12 * (1.0 + shift.abs()));
        let df = (moved.eval_field(&x).unwrap() - pum.eval_field(&x).unwrap()).norm();
        prop_assert!(df <= 1e-10 * (1.0 + shift.abs()));
    }

    #[test]
    fn sphere_field_is_tangent(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let pum = sphere();
        let x = sphere_point(a, b);
        let s = pum.eval_field(&x).unwrap();
        prop_assert!(s.dot(&x).abs() <= 1e-10 * s.norm().max(1e-300));
    }

    #[test]
    fn weights_form_partition(seed in 0u64..1000) {
        let pum = ball();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rbf_pum::points::random_rotation(&mut rng) * Point::new(0.0, 0.0, (seed as f64 / 1000.0).cbrt() * 0.99);
        let w = pum.weights_at(&x).unwrap();
        prop_assert!((w.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(w.grad_sum().norm() <= 1e-10);
        prop_assert!(w.terms.iter().all(|t| t.w >= 0.0 && t.w <= 1.0 + 1e-15));
    }
}
