use opsys_core::linalg::{rayleigh, CVector};
use opsys_core::numerical_range::{
    ball_margin_report, farthest_point_iteration, random_unit_vector, sphere_directions,
    support_function, sweep_max_support, write_sweep_csv, Direction, Lemma, SweepConfig,
};
use opsys_core::operator_models::{build_tuple, plain_operator, OperatorTuple, TupleVariant};
use opsys_core::poly_basis::build_basis;
use opsys_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn small_sweep(budget: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        budget,
        refine: 20,
        refine_starts: 3,
        seed,
    }
}

#[test]
fn degree_one_support_is_one_half_in_every_direction() {
    let basis = build_basis(1).unwrap();
    let tuple = build_tuple(&basis, TupleVariant::Plain).unwrap();
    let mut dirs = sphere_directions(4, 50, 3);
    dirs.push(Direction::new(vec![-1.0, 0.0, 0.0, 0.0]).unwrap());
    for theta in &dirs {
        let h = support_function(&tuple, theta).unwrap().value;
        assert!((h - 0.5).abs() <= 1e-14, "{:?}: {h}", theta.components());
    }
    let sweep = sweep_max_support(&tuple, &small_sweep(200, 1)).unwrap();
    assert!((sweep.report.max_support - 0.5).abs() <= 1e-14);
    assert!((sweep.report.margin - 0.5).abs() <= 1e-14);
}

#[test]
fn plain_support_matches_chebyshev_root_and_grows_with_degree() {
    let mut previous = 0.0;
    for n in [2usize, 4, 6] {
        let basis = build_basis(n).unwrap();
        let tuple = build_tuple(&basis, TupleVariant::Plain).unwrap();
        let h = support_function(&tuple, &Direction::axis(4, 0))
            .unwrap()
            .value;
        let oracle = (PI / (n as f64 + 2.0)).cos();
        assert!((h - oracle).abs() <= 1e-13, "N = {n}: {h} vs {oracle}");
        assert!(h > previous && h < 1.0);
        previous = h;
    }
}

#[test]
fn support_is_subadditive_on_the_coupled_tuple() {
    let basis = build_basis(3).unwrap();
    let tuple = build_tuple(&basis, TupleVariant::Coupled(0.4)).unwrap();
    let dirs = sphere_directions(4, 40, 11);
    for pair in dirs.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let sum: Vec<f64> = a
            .components()
            .iter()
            .zip(b.components())
            .map(|(x, y)| x + y)
            .collect();
        let len = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        let Some(u) = Direction::normalized(&sum) else {
            continue;
        };
        let lhs = len * support_function(&tuple, &u).unwrap().value;
        let rhs =
            support_function(&tuple, a).unwrap().value + support_function(&tuple, b).unwrap().value;
        assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }
}

#[test]
fn witnesses_reproduce_their_support_values() {
    let basis = build_basis(4).unwrap();
    for variant in [
        TupleVariant::Plain,
        TupleVariant::Coupled(0.3),
        TupleVariant::Tilde(0.8),
    ] {
        let tuple = build_tuple(&basis, variant).unwrap();
        let sweep = sweep_max_support(&tuple, &small_sweep(100, 5)).unwrap();
        assert_eq!(
            sweep.records.len(),
            sweep.report.samples + sweep.report.refinement_steps
        );
        for r in &sweep.records {
            let q = rayleigh(&tuple.combination(r.direction.components()), &r.witness);
            assert!((q - r.value).abs() <= 1e-9, "{q} vs {}", r.value);
            assert!((r.witness.norm() - 1.0).abs() <= 1e-12);
            assert!(r.value <= sweep.report.max_support);
        }
    }
}

#[test]
fn farthest_point_iteration_never_decreases() {
    let basis = build_basis(3).unwrap();
    let tuple = build_tuple(&basis, TupleVariant::Coupled(0.45)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x0 = random_unit_vector(&mut rng, tuple.dim());
        let fp = farthest_point_iteration(&tuple, &x0, 50, 1e-14).unwrap();
        for w in fp.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", fp.history);
        }
        // ‖z(x)‖ is the support value in the direction of z(x) attained at x.
        let theta = Direction::normalized(&tuple.point(&fp.witness)).unwrap();
        let h = support_function(&tuple, &theta).unwrap().value;
        assert!(fp.norm <= h + 1e-12);
    }
}

#[test]
fn farthest_point_on_single_operator_and_low_degree() {
    let basis = build_basis(1).unwrap();
    let single = OperatorTuple::new(vec![plain_operator(&basis, 1).unwrap()]).unwrap();
    let plain = build_tuple(&basis, TupleVariant::Plain).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let x0 = random_unit_vector(&mut rng, single.dim());
        let one = farthest_point_iteration(&single, &x0, 20, 1e-15).unwrap();
        assert!((one.norm - 0.5).abs() <= 1e-14 || one.stationary);
        let four = farthest_point_iteration(&plain, &x0, 20, 1e-15).unwrap();
        assert!((four.norm - 0.5).abs() <= 1e-14 || four.stationary);
    }
    let wrong = CVector::zeros(single.dim() + 1);
    assert!(matches!(
        farthest_point_iteration(&single, &wrong, 5, 0.0),
        Err(Error::Domain(_))
    ));
}

#[test]
fn ball_margin_at_degree_one_is_one_half() {
    let basis = build_basis(1).unwrap();
    let report = ball_margin_report(Lemma::Lemma0, &basis, &small_sweep(100, 9), false).unwrap();
    assert!(report.contained);
    assert!((report.range.margin - 0.5).abs() <= 1e-14);
    assert_eq!(report.audit.chain_violations, 0);
    assert_eq!(report.audit.bound_violations, 0);
}

#[test]
fn lemma_ranges_are_enforced_unless_overridden() {
    let basis = build_basis(2).unwrap();
    let cfg = small_sweep(50, 1);
    for lemma in [Lemma::Lemma1 { c: 0.5 }, Lemma::Lemma2 { c: 1.2 }] {
        assert!(matches!(
            ball_margin_report(lemma, &basis, &cfg, false),
            Err(Error::Usage(_))
        ));
        assert!(ball_margin_report(lemma, &basis, &cfg, true).is_ok());
    }
    let negative = Lemma::Lemma1 { c: -0.1 };
    assert!(matches!(
        ball_margin_report(negative, &basis, &cfg, false),
        Err(Error::Usage(_))
    ));
    assert!(matches!(
        ball_margin_report(negative, &basis, &cfg, true),
        Err(Error::Domain(_))
    ));
}

#[test]
fn csv_has_one_row_per_record() {
    let basis = build_basis(2).unwrap();
    let tuple = build_tuple(&basis, TupleVariant::Plain).unwrap();
    let sweep = sweep_max_support(&tuple, &small_sweep(30, 8)).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&sweep.records, 4, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta_1,theta_2,theta_3,theta_4,h,margin"
    );
    assert_eq!(lines.count(), sweep.records.len());
}
