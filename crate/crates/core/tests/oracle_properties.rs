mod common;

use common::rng;
use proptest::prelude::*;
use rescale::instances::gen_max_quadratics;
use rescale::linalg::{random_unit_vector, standard_normal_matrix, standard_normal_vector};
use rescale::oracles::{
    transformed_argmin, EllipsoidOracle, FiniteSetOracle, MaxQuadSubdiff, SupportOracle,
};
use rescale::updates::{RescalingTransform, TransformKind};
use rescale::{Matrix, Vector};

fn random_points(n: usize, m: usize, seed: u64) -> Vec<Vector> {
    let mut r = rng(seed);
    (0..m).map(|_| standard_normal_vector(n, &mut r)).collect()
}

/// A max-quadratic whose first `ties` pieces share the maximal value at `x`.
fn kinked(n: usize, m: usize, ties: usize, seed: u64) -> (MaxQuadSubdiff, Vector) {
    let f = gen_max_quadratics(n, m, seed).unwrap();
    let x = standard_normal_vector(n, &mut rng(seed ^ 0xabc));
    let top = f.value(&x) + 1.0;
    let mut pieces = f.pieces().to_vec();
    for piece in pieces.iter_mut().take(ties) {
        let shift = top - piece.value(&x);
        piece.c += shift;
    }
    (MaxQuadSubdiff::new(pieces).unwrap(), x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn finite_argmax_dominates_every_point(n in 1usize..6, m in 1usize..10, seed in any::<u64>()) {
        let pts = random_points(n, m, seed);
        let set = FiniteSetOracle::new(pts.clone()).unwrap();
        let s = standard_normal_vector(n, &mut rng(!seed));
        let (p, value) = set.argmax_linear(&s).unwrap();
        prop_assert_eq!(p.dot(&s), value);
        for q in &pts {
            prop_assert!(value >= q.dot(&s));
        }
        let (pmin, vmin) = set.argmin_linear(&s).unwrap();
        prop_assert_eq!(pmin.dot(&s), vmin);
        for q in &pts {
            prop_assert!(vmin <= q.dot(&s));
        }
    }

    #[test]
    fn transformed_argmin_matches_the_mapped_set(n in 1usize..6, m in 1usize..10, seed in any::<u64>()) {
        let pts = random_points(n, m, seed);
        let mut r = rng(seed.wrapping_add(1));
        let v = standard_normal_matrix(n, n, &mut r) + Matrix::identity(n, n) * 3.0;
        let h = standard_normal_vector(n, &mut r);
        let transform = RescalingTransform::from_matrix(v.clone(), TransformKind::BfgsFactor).unwrap();
        let (p, value) = transformed_argmin(&FiniteSetOracle::new(pts.clone()).unwrap(), &transform, &h).unwrap();
        let mapped = FiniteSetOracle::new(pts.iter().map(|q| &v * q).collect()).unwrap();
        let (p2, value2) = mapped.argmin_linear(&h).unwrap();
        prop_assert!((&p - &p2).norm() <= 1e-10 * (1.0 + p2.norm()));
        prop_assert!((value - value2).abs() <= 1e-10 * (1.0 + value2.abs()));
    }

    #[test]
    fn ellipsoid_argmax_is_the_support_point(n in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = standard_normal_matrix(n, n, &mut r) + Matrix::identity(n, n) * 4.0;
        let c = standard_normal_vector(n, &mut r);
        let oracle = EllipsoidOracle::new(a.clone(), c.clone()).unwrap();
        let dir = standard_normal_vector(n, &mut r);
        let (p, value) = oracle.argmax_linear(&dir).unwrap();
        let expected = (a.transpose() * &dir).norm() - c.dot(&dir);
        prop_assert!((value - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        let pre = a.clone().try_inverse().unwrap() * (&p + &c);
        prop_assert!((pre.norm() - 1.0).abs() <= 1e-10);
        for _ in 0..20 {
            let u = random_unit_vector(n, &mut r);
            prop_assert!((&a * u - &c).dot(&dir) <= value + 1e-10 * (1.0 + value.abs()));
        }
    }

    #[test]
    fn subdifferential_support_is_the_directional_derivative(
        n in 2usize..6,
        m in 1usize..5,
        ties in 1usize..5,
        seed in any::<u64>(),
    ) {
        let (f, x) = kinked(n, m, ties.min(m), seed);
        let s = random_unit_vector(n, &mut rng(seed ^ 0xdef));
        let (_, support) = f.subdifferential_at(x.clone()).argmax_linear(&s).unwrap();
        let t = 1e-7;
        let fd = (f.value(&(&x + &s * t)) - f.value(&x)) / t;
        prop_assert!((fd - support).abs() <= 1e-5 * support.abs().max(1.0), "{fd} vs {support}");
    }
}
