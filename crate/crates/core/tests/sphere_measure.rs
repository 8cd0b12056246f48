use nalgebra::{Matrix4, Vector4};
use num_traits::Zero;
use opsys_core::sphere_measure::{
    coordinate_density, exact_moment, inverse_linear_integral, inverse_linear_integral_quadrature,
    mc_integral, moment_f64, McConfig, MomentKey, QuadratureRule1D,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn moments_are_permutation_invariant(a in prop::array::uniform4(0u32..7), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let permuted = MomentKey([a[perm[0]], a[perm[1]], a[perm[2]], a[perm[3]]]);
        prop_assert_eq!(exact_moment(MomentKey(a)), exact_moment(permuted));
    }

    #[test]
    fn odd_exponents_vanish(a in prop::array::uniform4(0u32..7), i in 0usize..4) {
        let mut a = a;
        if a[i] % 2 == 0 {
            a[i] += 1;
        }
        prop_assert!(exact_moment(MomentKey(a)).is_zero());
    }

    #[test]
    fn closed_form_agrees_with_quadrature(alpha in 0.5f64..4.0, ratio in 0.0f64..=1.0) {
        let rule = QuadratureRule1D::angular_gauss_legendre(64);
        let w = ratio * alpha;
        let closed = inverse_linear_integral(alpha, w).unwrap();
        let quad = inverse_linear_integral_quadrature(alpha, w, &rule).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-10, "{} vs {}", closed, quad);
    }
}

#[test]
fn sphere_relation_up_to_degree_twelve() {
    for a in 0..=6u32 {
        for b in 0..=6 - a {
            for c in 0..=6 - a - b {
                for d in 0..=6 - a - b - c {
                    let key = MomentKey::new(2 * a, 2 * b, 2 * c, 2 * d);
                    if key.degree() + 2 > 12 {
                        continue;
                    }
                    let sum = (0..4).fold(num_rational::BigRational::zero(), |acc, i| {
                        let mut e = key.0;
                        e[i] += 2;
                        acc + exact_moment(MomentKey(e))
                    });
                    assert_eq!(sum, exact_moment(key), "at {key}");
                }
            }
        }
    }
}

#[test]
fn pushforward_density_matches_monte_carlo() {
    // P(t₁ ≤ 0.3) from the density against the sample fraction.
    let rule = QuadratureRule1D::angular_gauss_legendre(200);
    let density_mass = {
        let (x, w) = opsys_core::sphere_measure::gauss_legendre(200);
        x.iter()
            .zip(&w)
            .map(|(&x, &w)| {
                let t = -1.0 + (x + 1.0) * 0.65;
                0.65 * w * coordinate_density(t)
            })
            .sum::<f64>()
    };
    let mc = mc_integral(
        |z| if z[0] <= 0.3 { 1.0 } else { 0.0 },
        &McConfig::new(400_000, 9).unwrap(),
    )
    .unwrap();
    assert!((mc.estimate - density_mass).abs() <= 5.0 * mc.std_error);
    assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
}

fn random_orthogonal(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let g = Matrix4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

#[test]
fn integrals_are_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let keys: Vec<MomentKey> = (0..=4u32)
        .flat_map(|a| (0..=4 - a).map(move |b| MomentKey::new(a, b, 0, 0)))
        .chain([
            MomentKey::new(0, 0, 2, 1),
            MomentKey::new(1, 0, 0, 3),
            MomentKey::new(0, 1, 1, 2),
        ])
        .collect();
    for trial in 0..10 {
        let u = random_orthogonal(&mut rng);
        let coeffs: Vec<f64> = keys.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = |z: &[f64; 4]| {
            keys.iter()
                .zip(&coeffs)
                .map(|(k, c)| c * k.eval(z))
                .sum::<f64>()
        };
        let exact: f64 = keys
            .iter()
            .zip(&coeffs)
            .map(|(k, c)| c * moment_f64(*k))
            .sum();
        let plain = mc_integral(h, &McConfig::new(100_000, 500 + trial).unwrap()).unwrap();
        let rotated = mc_integral(
            |z| {
                let y = u * Vector4::from_column_slice(z);
                h(&[y[0], y[1], y[2], y[3]])
            },
            &McConfig::new(100_000, 900 + trial).unwrap(),
        )
        .unwrap();
        let combined = (plain.std_error.powi(2) + rotated.std_error.powi(2)).sqrt();
        assert!(
            (plain.estimate - rotated.estimate).abs() <= 5.0 * combined,
            "trial {trial}"
        );
        assert!(
            (rotated.estimate - exact).abs() <= 5.0 * rotated.std_error,
            "trial {trial}"
        );
    }
}

#[test]
fn boundary_case_and_domain_errors() {
    assert_eq!(inverse_linear_integral(2.0, 2.0).unwrap(), 1.0);
    assert_eq!(inverse_linear_integral(1.0, 0.0).unwrap(), 1.0);
    assert!(inverse_linear_integral(0.5, 1.0).is_err());
    assert!(inverse_linear_integral(0.0, 0.0).is_err());
    assert!(inverse_linear_integral(1.0, -0.1).is_err());
    assert!(McConfig::new(0, 1).is_err());
}
