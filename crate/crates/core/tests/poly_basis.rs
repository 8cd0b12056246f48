use nalgebra::{DMatrix, DVector};
use opsys_core::poly_basis::{basis_dimension, build_basis, mult_matrix, GradedBasis};
use opsys_core::sphere_measure::{moment_f64, MomentKey};

/// Monomials of degree ≤ n with t₄-exponent ≤ 1, counted directly.
fn enumerated_dimension(n: u32) -> usize {
    let mut count = 0;
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                // t₄-exponent 0, and 1 when the degree allows it.
                count += 1 + (n - a - b - c).min(1) as usize;
            }
        }
    }
    count
}

fn multiplication_oracle(basis: &GradedBasis, i: usize) -> DMatrix<f64> {
    let n = basis.dim();
    let expansions: Vec<_> = (0..n).map(|j| basis.expansion(j)).collect();
    let coord = MomentKey::coordinate(i);
    DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for (a, x) in &expansions[j] {
            for (b, y) in &expansions[k] {
                s += x * y * moment_f64(a.times(b).times(&coord));
            }
        }
        s
    })
}

#[test]
fn dimension_formula_matches_enumeration() {
    for n in 0..=8usize {
        let formula = (n + 1) * (n + 2) * (2 * n + 3) / 6;
        assert_eq!(basis_dimension(n), formula);
        assert_eq!(enumerated_dimension(n as u32), formula);
        assert_eq!(build_basis(n).unwrap().dim(), formula);
    }
}

#[test]
fn gram_matrix_from_moments_is_identity() {
    let basis = build_basis(5).unwrap();
    let n = basis.dim();
    let expansions: Vec<_> = (0..n).map(|j| basis.expansion(j)).collect();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..=j {
            let mut s = 0.0;
            for (a, x) in &expansions[j] {
                for (b, y) in &expansions[k] {
                    s += x * y * moment_f64(a.times(b));
                }
            }
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    assert!(worst <= 1e-12, "Gram residual {worst:e}");
    assert!(basis.gram_residual() <= 1e-10);
}

#[test]
fn grades_are_orthogonal_to_lower_degrees() {
    let basis = build_basis(4).unwrap();
    let g = basis.grading().clone();
    for k in 1..=4 {
        for j in g.grade_range(k) {
            assert!(basis
                .expansion(j)
                .iter()
                .all(|(m, _)| m.degree() <= k as u32));
            for lower in basis.monomials().iter().filter(|m| m.degree() < k as u32) {
                let ip: f64 = basis
                    .expansion(j)
                    .iter()
                    .map(|(m, x)| x * moment_f64(m.times(lower)))
                    .sum();
                assert!(
                    ip.abs() < 1e-13,
                    "grade {k} element {j} against {lower}: {ip:e}"
                );
            }
        }
    }
}

#[test]
fn multiplication_matrices_match_moment_oracle() {
    let basis = build_basis(4).unwrap();
    for i in 1..=4 {
        let m = mult_matrix(&basis, i).unwrap().entries;
        let oracle = multiplication_oracle(&basis, i);
        assert!((&m - &oracle).amax() <= 1e-13, "coordinate {i}");
        assert_eq!(m, m.transpose());
    }
}

#[test]
fn squares_sum_to_identity_below_the_top_grade() {
    for n in [3, 6, 12] {
        let basis = build_basis(n).unwrap();
        let dim = basis.dim();
        let mut sum = DMatrix::<f64>::zeros(dim, dim);
        for i in 1..=4 {
            let m = mult_matrix(&basis, i).unwrap().entries;
            sum += &m * &m;
        }
        let low = basis.grading().grade_offsets()[n];
        for j in 0..low {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            let image = &sum * &e;
            assert!((image - e).amax() <= 1e-12, "N = {n}, column {j}");
        }
    }
}

#[test]
fn commutators_vanish_two_grades_below_the_top() {
    let n = 5;
    let basis = build_basis(n).unwrap();
    let ms: Vec<_> = (1..=4)
        .map(|i| mult_matrix(&basis, i).unwrap().entries)
        .collect();
    let safe = basis.grading().grade_offsets()[n - 1];
    for i in 0..4 {
        for j in 0..i {
            let comm = &ms[i] * &ms[j] - &ms[j] * &ms[i];
            assert!(
                comm.columns(0, safe).amax() <= 1e-12,
                "[M{}, M{}]",
                i + 1,
                j + 1
            );
        }
    }
}

#[test]
fn norms_grow_with_degree_and_stay_below_one() {
    for i in 1..=4 {
        let mut prev = 0.0;
        for n in 1..=7 {
            let basis = build_basis(n).unwrap();
            let m = mult_matrix(&basis, i).unwrap().entries;
            let norm = m.symmetric_eigenvalues().amax();
            assert!(
                norm >= prev - 1e-14 && norm <= 1.0 + 1e-14,
                "i = {i}, N = {n}: {norm}"
            );
            prev = norm;
        }
    }
}

#[test]
fn highest_degree_builds_within_tolerance() {
    let basis = build_basis(16).unwrap();
    assert_eq!(basis.dim(), 1785);
    assert!(basis.gram_residual() <= 1e-10);
    let m = mult_matrix(&basis, 1).unwrap().entries;
    assert!(m.amax() <= 0.5 + 1e-14);
}

#[test]
fn basis_functions_evaluate_consistently() {
    let basis = build_basis(3).unwrap();
    let z = [0.5, -0.5, 0.5, 0.5];
    assert_eq!(basis.evaluate(0, &z), 1.0);
    // Degree-one functions are 2tᵢ.
    for i in 0..4 {
        assert!((basis.evaluate(1 + i, &z) - 2.0 * z[i]).abs() < 1e-15);
    }
}
