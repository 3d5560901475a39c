mod common;

use common::rng;
use proptest::prelude::*;
use rescale::instances::gen_unit_ball_start;
use rescale::linalg::{random_unit_vector, standard_normal_vector};
use rescale::oracles::FiniteSetOracle;
use rescale::separators::{
    bfgs_separate_hull, cholesky_bfgs_separate, ellipsoid_separate, randomized_shor_separate,
    segment_gamma, segment_iteration_bound, segment_separate, shor_separate, unit_ball_iteration,
    SeparatorConfig,
};
use rescale::{Outcome, SpdMatrix, Vector};

/// `m` Gaussian points in `R^n` shifted by `offset` along a random unit
/// direction; large offsets make `0` separable.
fn shifted_points(n: usize, m: usize, offset: f64, seed: u64) -> Vec<Vector> {
    let mut r = rng(seed);
    let u = random_unit_vector(n, &mut r);
    (0..m)
        .map(|_| standard_normal_vector(n, &mut r) + &u * offset)
        .collect()
}

fn assert_certificate(points: &[Vector], outcome: &Outcome) -> Result<(), TestCaseError> {
    if let Some(z) = outcome.normal() {
        let worst = points.iter().map(|p| p.dot(z)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst < 0.0, "certificate margin {worst}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn separated_outcomes_carry_valid_certificates(
        n in 2usize..5,
        m in 2usize..8,
        offset in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let pts = shifted_points(n, m, offset, seed);
        let set = FiniteSetOracle::new(pts.clone()).unwrap();
        let cfg = SeparatorConfig::default().with_max_iterations(500).with_seed(seed);
        let runs = [
            shor_separate(&set, &pts[0], &cfg).unwrap(),
            randomized_shor_separate(&set, &cfg).unwrap(),
            bfgs_separate_hull(&set, 0, &SpdMatrix::identity(n), &cfg).unwrap(),
            cholesky_bfgs_separate(&pts, 0, &cfg).unwrap(),
            ellipsoid_separate(&set, &cfg).unwrap(),
        ];
        for run in &runs {
            assert_certificate(&pts, &run.outcome)?;
        }
    }

    #[test]
    fn cholesky_and_hull_forms_stop_together(
        n in 2usize..=4,
        m in 2usize..=6,
        offset in 0.0f64..3.0,
        start in 0usize..6,
        seed in any::<u64>(),
    ) {
        let pts = shifted_points(n, m, offset, seed);
        let start = start % m;
        let cfg = SeparatorConfig::default().with_max_iterations(2000);
        let set = FiniteSetOracle::new(pts.clone()).unwrap();
        let hull = bfgs_separate_hull(&set, start, &SpdMatrix::identity(n), &cfg).unwrap();
        let chol = cholesky_bfgs_separate(&pts, start, &cfg).unwrap();
        prop_assert_eq!(hull.outcome.label(), chol.outcome.label());
        prop_assert_eq!(hull.updates, chol.updates);
    }

    #[test]
    fn symmetric_sets_halve_the_determinant(n in 2usize..6, m in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut pts = Vec::new();
        for _ in 0..m {
            let a = standard_normal_vector(n, &mut r);
            pts.push(-&a);
            pts.push(a);
        }
        let set = FiniteSetOracle::new(pts).unwrap();
        let cfg = SeparatorConfig::default().with_max_iterations(20);
        let run = bfgs_separate_hull(&set, 0, &SpdMatrix::identity(n), &cfg).unwrap();
        prop_assert!(!run.outcome.is_separated());
        let dets: Vec<f64> = run.rows.iter().filter_map(|row| row.det_h).collect();
        for w in dets.windows(2) {
            // equality holds in exact arithmetic; the condition number of H doubles
            // per step, so the cap keeps the determinants accurate
            prop_assert!(w[1] <= 0.5 * w[0] * (1.0 + 1e-8), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn unit_ball_metric_shrinks(n in 2usize..8, seed in any::<u64>()) {
        let (g0, h0) = gen_unit_ball_start(n, seed).unwrap();
        let cfg = SeparatorConfig::default().with_max_iterations(60).with_step_tol(1e-300);
        let run = unit_ball_iteration(&g0, &h0, &cfg).unwrap();
        for w in run.rows.windows(2) {
            let (d0, d1) = (w[0].det_h.unwrap(), w[1].det_h.unwrap());
            let (l0, l1) = (w[0].lambda_max.unwrap(), w[1].lambda_max.unwrap());
            prop_assert!(d1 <= 0.5 * d0 * (1.0 + 1e-10));
            prop_assert!(l1 <= l0 * (1.0 + 1e-10));
        }
    }

    #[test]
    fn segment_conditioning_grows(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = standard_normal_vector(2, &mut r);
        let d = standard_normal_vector(2, &mut r);
        let run = segment_separate(&c, &d, &SeparatorConfig::default()).unwrap();
        prop_assert!(run.outcome.is_separated());
        prop_assert!(run.updates as f64 <= segment_iteration_bound(&c, &d));
        let gammas: Vec<f64> = run.rows.iter().filter_map(|row| row.gamma).collect();
        prop_assert!((gammas[0] - segment_gamma(&c, &d)).abs() <= 1e-12);
        for w in gammas.windows(2) {
            prop_assert!(w[1] >= w[0] + w[0].powi(3) - 1e-12);
        }
    }
}

#[test]
fn segment_gamma_is_at_most_half_for_obtuse_pairs() {
    let mut r = rng(5);
    for _ in 0..1000 {
        let c = standard_normal_vector(2, &mut r);
        let d = standard_normal_vector(2, &mut r);
        if c.dot(&d) <= 0.0 {
            assert!(segment_gamma(&c, &d) <= 0.5 + 1e-12);
        }
    }
}
