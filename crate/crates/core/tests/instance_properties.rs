mod common;

use common::rng;
use proptest::prelude::*;
use rescale::instances::{
    gen_max_quadratics, gen_simplex, min_norm_point, reference_optimum, run_experiment,
    ExperimentConfig, FactorSource, Family, Figure, InstanceSpec,
};
use rescale::linalg::standard_normal_vector;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
    ]
}

fn family() -> impl Strategy<Value = Family> {
    let positive = prop_oneof![1e-12f64..1e3, (1e-300f64..1e300)];
    prop_oneof![
        positive.clone().prop_map(|eps| Family::Simplex { eps }),
        (prop::collection::vec(-20i32..20, 1..10), positive.clone())
            .prop_map(|(exponents, d)| Family::Ellipsoid { exponents, d }),
        Just(Family::FailureR2 {}),
        (1usize..50, 1usize..20).prop_map(|(n, m)| Family::MaxQuadratics { n, m }),
        (1usize..100).prop_map(|n| Family::UnitBall { n }),
        (1usize..6).prop_flat_map(|n| {
            (prop::collection::vec(finite(), n), prop::collection::vec(finite(), n))
                .prop_map(|(c, d)| Family::Segment { c, d })
        }),
        (1usize..5, 1usize..6).prop_flat_map(|(n, m)| {
            prop::collection::vec(prop::collection::vec(finite(), n), m)
                .prop_map(|points| Family::Points { points })
        }),
        (1usize..10, 1f64..1e8).prop_map(|(n, condition)| Family::Quadratic {
            n,
            condition,
            factor: FactorSource::default(),
        }),
        (1usize..4).prop_flat_map(|k| {
            prop::collection::vec(prop::collection::vec(finite(), k), k).prop_map(|rows| {
                Family::Quadratic {
                    n: rows.len(),
                    condition: 1.0,
                    factor: FactorSource::Explicit(rows),
                }
            })
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn json_round_trip_is_lossless(family in family(), seed in any::<u64>()) {
        let spec = InstanceSpec::new(family, seed);
        let json = spec.to_json().unwrap();
        let back = InstanceSpec::from_json(&json).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn max_of_quadratics_is_midpoint_convex(seed in any::<u64>()) {
        let f = gen_max_quadratics(5, 4, seed).unwrap();
        let mut r = rng(!seed);
        for _ in 0..20 {
            let x = standard_normal_vector(5, &mut r) * 3.0;
            let z = standard_normal_vector(5, &mut r) * 3.0;
            let mid = f.value(&((&x + &z) * 0.5));
            let avg = 0.5 * (f.value(&x) + f.value(&z));
            prop_assert!(mid <= avg + 1e-12 * avg.abs().max(1.0));
        }
    }
}

#[test]
fn small_simplex_offset_still_excludes_the_origin() {
    let set = gen_simplex(1e-3).unwrap();
    let mn = min_norm_point(set.points(), 100_000, 1e-14).unwrap();
    assert!(mn.lower > 0.0, "lower bound {}", mn.lower);
    assert!(mn.upper >= mn.lower);
}

#[test]
fn single_quadratic_optimum_is_closed_form() {
    for seed in 0..10 {
        let f = gen_max_quadratics(5, 1, seed).unwrap();
        let piece = &f.pieces()[0];
        let p_inv = piece.p.inverse().unwrap();
        let expected = -0.5 * piece.b.dot(&(&p_inv * &piece.b)) + piece.c;
        let opt = reference_optimum(&f).unwrap();
        assert!((opt.f_star - expected).abs() <= 1e-8 * (1.0 + expected.abs()));
    }
}

fn csv_bytes(figure: Figure, cfg: &ExperimentConfig) -> Vec<Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    let paths = run_experiment(figure, cfg).unwrap().write_csv(dir.path()).unwrap();
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn experiments_are_byte_deterministic() {
    let cfg = ExperimentConfig {
        runs: Some(6),
        seed: 11,
        eps_grid: vec![0.1, 0.01],
        ..Default::default()
    };
    for figure in [Figure::Fig1, Figure::Fig2, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7] {
        assert_eq!(csv_bytes(figure, &cfg), csv_bytes(figure, &cfg), "{figure}");
    }
    let other = ExperimentConfig { seed: 12, ..cfg.clone() };
    assert_ne!(csv_bytes(Figure::Fig4, &cfg), csv_bytes(Figure::Fig4, &other));
}

#[test]
fn experiment_rows_match_requested_runs() {
    let cfg = ExperimentConfig { runs: Some(7), dims: vec![2, 3], ..Default::default() };
    let fig4 = run_experiment(Figure::Fig4, &cfg).unwrap();
    assert_eq!(fig4.runs.len(), 2 * 2 * 7);
    assert_eq!(fig4.data.rows.len(), fig4.runs.len());
    let fig8 = run_experiment(Figure::Fig8, &cfg).unwrap();
    assert_eq!(fig8.runs.len(), 2 * 7);
    assert_eq!(fig8.data.values("kind").iter().filter(|k| **k == "run").count(), 14);
    assert!(fig8.aggregate("", "unit_ball", "loglog_slope").is_some());
}
