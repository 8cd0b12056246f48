//! Operator identities that extract the compacts from the generated
//! C*-algebra, and the norm gap separating `Σ T_i*T_i` from its coupled
//! versions.
//!
//! A product of two truncated multiplications agrees with the true product
//! on grades `≤ N−1`, because multiplication by a degree-one polynomial
//! cannot leave degree `N` from there. Every identity is therefore compared
//! after compression to grades `≤ N−1` plus the `ℂ` coordinate, where it
//! holds to machine precision.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::operator_models::{compress_matrix, coupled_operator, plain_operator, tilde_operator};
use crate::poly_basis::GradedBasis;
use crate::sphere_measure::MomentKey;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    /// Max-norm of the compressed difference.
    pub residual: f64,
    pub grade_used: usize,
    pub scale: f64,
    pub passed: bool,
}

impl IdentityReport {
    fn new(identity: impl Into<String>, lhs: &CMatrix, rhs: &CMatrix, grade_used: usize) -> Self {
        let residual = linalg::max_abs_diff(lhs, rhs);
        let scale = linalg::max_abs(lhs).max(linalg::max_abs(rhs));
        IdentityReport {
            identity: identity.into(),
            residual,
            grade_used,
            scale,
            passed: residual <= 1e-12 * (1.0 + scale),
        }
    }
}

fn check_params(c: f64, basis: &GradedBasis) -> Result<usize> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("coupling c = {c} must be positive")));
    }
    let n = basis.degree_cap();
    if n == 0 {
        return Err(Error::domain("identities need degree cap N >= 1"));
    }
    Ok(n - 1)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `Q ⊕ 0` with `Q = P*P` the projection onto the constant.
fn constant_projection(basis: &GradedBasis) -> CMatrix {
    let n = basis.grading().total_dim();
    let mut q = CMatrix::zeros(n, n);
    q[(0, 0)] = real(1.0);
    q
}

/// `0 ⊕ 1`, i.e. `0 ⊕ PP*`.
fn extra_projection(basis: &GradedBasis) -> CMatrix {
    let n = basis.grading().total_dim();
    let e = basis.grading().extra_index();
    let mut m = CMatrix::zeros(n, n);
    m[(e, e)] = real(1.0);
    m
}

/// `( 0 0 ; P 0 )`: the row selecting the constant, placed in the `ℂ` row.
fn lower_selector(basis: &GradedBasis) -> CMatrix {
    let n = basis.grading().total_dim();
    let e = basis.grading().extra_index();
    let mut m = CMatrix::zeros(n, n);
    m[(e, 0)] = real(1.0);
    m
}

fn sum_plain_squares(basis: &GradedBasis, from: usize) -> Result<CMatrix> {
    let n = basis.grading().total_dim();
    let mut s = CMatrix::zeros(n, n);
    for i in from..=4 {
        let t = plain_operator(basis, i)?;
        s += t.entries().adjoint() * t.entries();
    }
    Ok(s)
}

/// `D = T̃T̃* + Σ_{i≥2} T_i*T_i − 1` at full truncation.
fn defect_matrix(c: f64, basis: &GradedBasis) -> Result<CMatrix> {
    let t = tilde_operator(basis, c)?;
    let n = basis.grading().total_dim();
    Ok(
        t.entries() * t.entries().adjoint() + sum_plain_squares(basis, 2)?
            - CMatrix::identity(n, n),
    )
}

/// `D = c²P*P ⊕ (−PP*)` on grades `≤ N−1` plus `ℂ`.
pub fn defect_check(c: f64, basis: &GradedBasis) -> Result<IdentityReport> {
    let k = check_params(c, basis)?;
    let g = basis.grading();
    let lhs = compress_matrix(&defect_matrix(c, basis)?, g, k);
    let rhs = constant_projection(basis) * real(c * c) - extra_projection(basis);
    Ok(IdentityReport::new(
        "defect",
        &lhs,
        &compress_matrix(&rhs, g, k),
        k,
    ))
}

/// The five identities, each side assembled from the truncated operators:
///
/// 1. `0⊕PP* = (c⁻²D² − D)/(c⁻² + 1)`
/// 2. `id⊕0 = 1 − 0⊕PP*`
/// 3. `P*P⊕0 = c⁻²(id⊕0)D`
/// 4. `M_{t₁}⊕0 = T̃(id⊕0)`
/// 5. `c·( 0 0 ; P 0 ) = T̃* − M_{t₁}⊕0`
///
/// `D` has no entries between grades `≤ N−1` and the top grade, so the
/// compression of `D²` equals the square of the compression of `D`.
pub fn lemma3_chain(c: f64, basis: &GradedBasis) -> Result<Vec<IdentityReport>> {
    let k = check_params(c, basis)?;
    let g = basis.grading();
    let n = g.total_dim();
    let cmp = |m: &CMatrix| compress_matrix(m, g, k);
    let d = defect_matrix(c, basis)?;
    let inv_c2 = 1.0 / (c * c);

    let extra = (&d * &d * real(inv_c2) - &d) * real(1.0 / (inv_c2 + 1.0));
    let poly_identity = CMatrix::identity(n, n) - &extra;
    let q = &poly_identity * &d * real(inv_c2);
    let tilde = tilde_operator(basis, c)?;
    let t1 = plain_operator(basis, 1)?;
    let m1 = tilde.entries() * &poly_identity;
    let lower = tilde.entries().adjoint() - t1.entries();

    let mut id_poly = CMatrix::identity(n, n);
    id_poly[(g.extra_index(), g.extra_index())] = real(0.0);

    Ok(vec![
        IdentityReport::new(
            "extra_projection",
            &cmp(&extra),
            &cmp(&extra_projection(basis)),
            k,
        ),
        IdentityReport::new(
            "polynomial_identity",
            &cmp(&poly_identity),
            &cmp(&id_poly),
            k,
        ),
        IdentityReport::new(
            "constant_projection",
            &cmp(&q),
            &cmp(&constant_projection(basis)),
            k,
        ),
        IdentityReport::new("multiplication_t1", &cmp(&m1), &cmp(t1.entries()), k),
        IdentityReport::new(
            "lower_selector",
            &cmp(&lower),
            &cmp(&(lower_selector(basis) * real(c))),
            k,
        ),
    ])
}

/// `T_{i₁}⋯T_{i_r}` for the factors of a monomial.
fn monomial_product(basis: &GradedBasis, key: MomentKey) -> Result<CMatrix> {
    let n = basis.grading().total_dim();
    let mut m = CMatrix::identity(n, n);
    for i in 1..=4 {
        if key.0[i - 1] == 0 {
            continue;
        }
        let t = plain_operator(basis, i)?;
        for _ in 0..key.0[i - 1] {
            m = t.entries() * m;
        }
    }
    Ok(m)
}

/// `P*P⊕0` and `( 0 0 ; P 0 )` as produced by the identity chain.
pub struct ChainGenerators {
    constant_projection: CMatrix,
    lower_selector: CMatrix,
}

/// The projection is exact once compressed to grades `≤ N−1`; the selector
/// `c⁻¹(T̃* − M_{t₁}⊕0)` is exact at full truncation.
pub fn chain_generators(c: f64, basis: &GradedBasis) -> Result<ChainGenerators> {
    let k = check_params(c, basis)?;
    let g = basis.grading();
    let n = g.total_dim();
    let d = defect_matrix(c, basis)?;
    let inv_c2 = 1.0 / (c * c);
    let extra = (&d * &d * real(inv_c2) - &d) * real(1.0 / (inv_c2 + 1.0));
    let poly_identity = CMatrix::identity(n, n) - extra;
    let constant_projection = compress_matrix(&(&poly_identity * &d * real(inv_c2)), g, k);
    let tilde = tilde_operator(basis, c)?;
    let lower_selector =
        (tilde.entries().adjoint() - plain_operator(basis, 1)?.entries()) * real(1.0 / c);
    Ok(ChainGenerators {
        constant_projection,
        lower_selector,
    })
}

fn check_degrees(p: MomentKey, q: MomentKey, basis: &GradedBasis) -> Result<()> {
    let cap = basis.degree_cap() as u32;
    if p.degree() > cap || q.degree() > cap {
        return Err(Error::domain(format!(
            "deg p = {}, deg q = {} must not exceed N = {cap}",
            p.degree(),
            q.degree()
        )));
    }
    Ok(())
}

/// Compares `M_p (P*P⊕0) M_q*` with `p⟨·,q⟩ ⊕ 0`, given `M_p (P*P⊕0)`.
fn rank_one_report(
    name: String,
    left: &CMatrix,
    mq: &CMatrix,
    gens: &ChainGenerators,
    pv: &DVector<f64>,
    qv: &DVector<f64>,
    basis: &GradedBasis,
) -> IdentityReport {
    let g = basis.grading();
    let n = g.total_dim();
    let e = g.extra_index();
    let mq_adj = mq.adjoint();
    let upper_lhs = left * &mq_adj;
    let lower_lhs = &gens.lower_selector * &mq_adj;
    let mut upper_rhs = CMatrix::zeros(n, n);
    let mut lower_rhs = CMatrix::zeros(n, n);
    for j in 0..g.poly_dim() {
        lower_rhs[(e, j)] = real(qv[j]);
        for i in 0..g.poly_dim() {
            upper_rhs[(i, j)] = real(pv[i] * qv[j]);
        }
    }
    let upper = IdentityReport::new(name.clone(), &upper_lhs, &upper_rhs, basis.degree_cap());
    let lower = IdentityReport::new(name, &lower_lhs, &lower_rhs, basis.degree_cap());
    let passed = upper.passed && lower.passed;
    let worst = if upper.residual >= lower.residual {
        upper
    } else {
        lower
    };
    IdentityReport { passed, ..worst }
}

/// `M_p (P*P⊕0) M_q* = p⟨·,q⟩ ⊕ 0` and `( 0 0 ; P 0 ) M_q* = ( 0 0 ; ⟨·,q⟩ 0 )`,
/// with both generators taken from the identity chain. `M_p` is the product
/// of the truncated `T_i` over the factors of `p`. The residual is the larger
/// of the two.
pub fn rank_one_generation(
    p: MomentKey,
    q: MomentKey,
    c: f64,
    basis: &GradedBasis,
) -> Result<IdentityReport> {
    check_degrees(p, q, basis)?;
    let gens = chain_generators(c, basis)?;
    let mp = monomial_product(basis, p)?;
    let mq = monomial_product(basis, q)?;
    let left = &mp * &gens.constant_projection;
    Ok(rank_one_report(
        format!("rank_one(p={p},q={q})"),
        &left,
        &mq,
        &gens,
        &basis.project_monomial(p),
        &basis.project_monomial(q),
        basis,
    ))
}

/// [`rank_one_generation`] over every pair of basis monomials of degree
/// `≤ max_degree`.
pub fn rank_one_sweep(c: f64, basis: &GradedBasis, max_degree: u32) -> Result<Vec<IdentityReport>> {
    let keys = monomials_up_to(basis, max_degree.min(basis.degree_cap() as u32));
    let gens = chain_generators(c, basis)?;
    let products: Vec<CMatrix> = keys
        .iter()
        .map(|&k| monomial_product(basis, k))
        .collect::<Result<_>>()?;
    let projections: Vec<DVector<f64>> = keys.iter().map(|&k| basis.project_monomial(k)).collect();
    let mut out = Vec::with_capacity(keys.len() * keys.len());
    for (i, p) in keys.iter().enumerate() {
        let left = &products[i] * &gens.constant_projection;
        for (j, q) in keys.iter().enumerate() {
            out.push(rank_one_report(
                format!("rank_one(p={p},q={q})"),
                &left,
                &products[j],
                &gens,
                &projections[i],
                &projections[j],
                basis,
            ));
        }
    }
    Ok(out)
}

/// Basis monomials of degree `≤ max_degree`.
pub fn monomials_up_to(basis: &GradedBasis, max_degree: u32) -> Vec<MomentKey> {
    basis
        .monomials()
        .iter()
        .copied()
        .filter(|m| m.degree() <= max_degree)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryNorms {
    pub c: f64,
    #[serde(rename = "N")]
    pub degree: usize,
    /// `‖Σ T_i*T_i‖` on grades `≤ N−1` plus `ℂ`.
    pub norm_plain: f64,
    /// `‖T̃*T̃ + Σ_{i≥2} T_i*T_i‖`.
    pub norm_tilde: f64,
    /// `‖T_{1,c}*T_{1,c} + Σ_{i≥2} T_i*T_i‖`.
    pub norm_hermitian: f64,
}

pub fn boundary_norms(c: f64, basis: &GradedBasis) -> Result<BoundaryNorms> {
    let k = check_params(c, basis)?;
    let g = basis.grading();
    let rest = sum_plain_squares(basis, 2)?;
    let t1 = plain_operator(basis, 1)?;
    let plain = compress_matrix(&(t1.entries() * t1.entries() + &rest), g, k);
    let tilde = tilde_operator(basis, c)?;
    let tilde_sum = tilde.entries().adjoint() * tilde.entries() + &rest;
    let coupled = coupled_operator(basis, c)?;
    let herm_sum = coupled.entries() * coupled.entries() + &rest;
    Ok(BoundaryNorms {
        c,
        degree: basis.degree_cap(),
        norm_plain: linalg::spectral_norm(&plain)?,
        norm_tilde: linalg::spectral_norm(&tilde_sum)?,
        norm_hermitian: linalg::spectral_norm(&herm_sum)?,
    })
}
