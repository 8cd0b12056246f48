//! Positivity of `Φ(f) = α + βT_{1,c} + γT₂ + δT₃ + εT₄` for affine `f`.
//!
//! `Φ(f)` has the block form `( M_f  cβP* ; cβP  α )`, so for `α > 0` it is
//! positive exactly when the Schur complement `αM_f − c²β²P*P` is. On the
//! truncation `P*P` is the rank-one projection `Q = e₀e₀ᵀ` onto the constant.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator_models::{OperatorLabel, TruncatedOperator};
use crate::poly_basis::{affine_mult_matrix, GradedBasis};
use crate::sphere_measure::{inverse_linear_integral, sphere_point};

/// Slack in the admissibility test `α ≥ ‖ω‖`.
pub const ADMISSIBILITY_SLACK: f64 = 1e-14;

/// Relative slack in the chain inequality.
pub const CHAIN_TOL: f64 = 1e-10;

/// `f(z) = α + ⟨z, ω⟩` on the closed unit ball of ℝ⁴.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFunction {
    pub alpha: f64,
    pub omega: [f64; 4],
}

impl AffineFunction {
    pub fn new(alpha: f64, omega: [f64; 4]) -> Self {
        AffineFunction { alpha, omega }
    }

    pub fn constant(alpha: f64) -> Self {
        AffineFunction::new(alpha, [0.0; 4])
    }

    /// `β`, the coefficient of `t₁`.
    pub fn beta(&self) -> f64 {
        self.omega[0]
    }

    pub fn omega_norm(&self) -> f64 {
        self.omega.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn eval(&self, z: &[f64; 4]) -> f64 {
        self.alpha
            + self
                .omega
                .iter()
                .zip(z.iter())
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    fn is_zero(&self) -> bool {
        self.alpha.abs() <= ADMISSIBILITY_SLACK && self.omega_norm() <= ADMISSIBILITY_SLACK
    }
}

/// Nonnegative on the closed ball: `α ≥ ‖ω‖`. Evaluating at `±e₁` then
/// gives `|β| ≤ α`.
pub fn is_admissible(f: &AffineFunction) -> bool {
    f.alpha >= f.omega_norm() - ADMISSIBILITY_SLACK
}

fn require_admissible(f: &AffineFunction) -> Result<()> {
    if !f.alpha.is_finite() || f.omega.iter().any(|w| !w.is_finite()) {
        return Err(Error::domain(format!("non-finite affine function {f:?}")));
    }
    if !is_admissible(f) {
        return Err(Error::domain(format!(
            "f is not admissible: alpha = {} < |omega| = {}",
            f.alpha,
            f.omega_norm()
        )));
    }
    Ok(())
}

/// Operator is accepted as positive when its minimum eigenvalue is at least
/// `−1e−10·(1 + ‖A‖)`.
pub fn psd_tolerance(norm: f64) -> f64 {
    1e-10 * (1.0 + norm)
}

/// A random admissible `f`: `α ~ U[0.2, 2]`, `ω` uniform on the sphere of
/// radius `uα`, `u ~ U[0, 1]`.
pub fn random_admissible<R: Rng>(rng: &mut R) -> AffineFunction {
    let alpha = rng.random_range(0.2..=2.0);
    let radius = rng.random_range(0.0..=1.0) * alpha;
    let dir = sphere_point(rng);
    AffineFunction::new(alpha, dir.map(|x| x * radius))
}

/// `Φ(f) = α·I + β·T_{1,c} + γ·T₂ + δ·T₃ + ε·T₄`.
pub fn phi_apply(f: &AffineFunction, c: f64, basis: &GradedBasis) -> Result<TruncatedOperator> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("coupling c = {c} must be positive")));
    }
    let grading = basis.grading();
    let n = grading.poly_dim();
    let e = grading.extra_index();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n))
        .copy_from(&affine_mult_matrix(basis, f));
    m[(e, e)] = f.alpha;
    m[(0, e)] = c * f.beta();
    m[(e, 0)] = c * f.beta();
    TruncatedOperator::from_real(&m, grading.clone(), OperatorLabel::Custom("Phi(f)".into()))
}

/// `αM_f − c²β²Q` on the polynomial part.
pub fn schur_matrix(f: &AffineFunction, c: f64, basis: &GradedBasis) -> DMatrix<f64> {
    let mut s = affine_mult_matrix(basis, f) * f.alpha;
    s[(0, 0)] -= c * c * f.beta() * f.beta();
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min_eig_phi: f64,
    pub min_eig_schur: f64,
    pub tol_phi: f64,
    pub tol_schur: f64,
    pub passed: bool,
    #[serde(rename = "N")]
    pub degree: usize,
    pub c: f64,
}

impl PositivityReport {
    pub fn phi_passed(&self) -> bool {
        self.min_eig_phi >= -self.tol_phi
    }

    pub fn schur_passed(&self) -> bool {
        self.min_eig_schur >= -self.tol_schur
    }
}

/// `(min, max |λ|)` of a real symmetric matrix.
fn spectrum_bounds(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let values = a.clone().symmetric_eigenvalues();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !min.is_finite() || !norm.is_finite() {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok((min, norm))
}

/// Minimum eigenvalues of `Φ(f)` and of its Schur complement.
pub fn schur_min_eig(f: &AffineFunction, c: f64, basis: &GradedBasis) -> Result<PositivityReport> {
    require_admissible(f)?;
    let degree = basis.degree_cap();
    if f.is_zero() {
        return Ok(PositivityReport {
            min_eig_phi: 0.0,
            min_eig_schur: 0.0,
            tol_phi: psd_tolerance(0.0),
            tol_schur: psd_tolerance(0.0),
            passed: true,
            degree,
            c,
        });
    }
    let phi = phi_apply(f, c, basis)?;
    let (min_phi, norm_phi) = spectrum_bounds(&phi.entries().map(|z| z.re))?;
    let (min_schur, norm_schur) = spectrum_bounds(&schur_matrix(f, c, basis))?;
    let (tol_phi, tol_schur) = (psd_tolerance(norm_phi), psd_tolerance(norm_schur));
    Ok(PositivityReport {
        min_eig_phi: min_phi,
        min_eig_schur: min_schur,
        tol_phi,
        tol_schur,
        passed: min_phi >= -tol_phi && min_schur >= -tol_schur,
        degree,
        c,
    })
}

/// `∫ f̃⁻¹ dm` for `f̃ = f/|β|`, reduced to the axis by rotation invariance.
pub fn normalized_inverse_integral(f: &AffineFunction) -> Result<f64> {
    require_admissible(f)?;
    let b = f.beta().abs();
    if b == 0.0 {
        return Err(Error::domain("beta = 0: f/|beta| is undefined"));
    }
    Ok(b * inverse_linear_integral(f.alpha, f.omega_norm())?)
}

/// Largest `c` with `c²β²Q ≤ αM_f` in infinite dimensions:
/// `c*² = α / (β² ∫ f⁻¹ dm)`. `None` when `β = 0`.
pub fn limiting_threshold(f: &AffineFunction) -> Result<Option<f64>> {
    require_admissible(f)?;
    let b = f.beta();
    if b == 0.0 {
        return Ok(None);
    }
    let integral = inverse_linear_integral(f.alpha, f.omega_norm())?;
    Ok(Some((f.alpha / (b * b * integral)).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|⟨g, 1⟩|² ≤ ⟨M_{f̃}g, g⟩ · ∫ f̃⁻¹ dm` for `g` given by its coefficients in
/// the orthonormal basis.
pub fn cs_chain_test(
    g: &DVector<f64>,
    f: &AffineFunction,
    basis: &GradedBasis,
) -> Result<ChainCheck> {
    if g.len() != basis.dim() {
        return Err(Error::domain(format!(
            "g has {} coefficients, basis has {}",
            g.len(),
            basis.dim()
        )));
    }
    let integral = normalized_inverse_integral(f)?;
    let b = f.beta().abs();
    let mf = affine_mult_matrix(basis, f) / b;
    let quad = g.dot(&(&mf * g));
    let lhs = g[0] * g[0];
    let rhs = quad * integral;
    let scale = g.norm_squared().max(lhs.abs()).max(rhs.abs());
    Ok(ChainCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + CHAIN_TOL * scale,
    })
}

/// Orthogonal `U` (a Householder reflection) with `Uᵀω = (‖ω‖, 0, 0, 0)`.
pub fn rotate_to_axis(omega: &[f64; 4]) -> Result<Matrix4<f64>> {
    let x = Vector4::from_column_slice(omega);
    let norm = x.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::domain("cannot rotate the zero vector"));
    }
    let tail = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    if tail == 0.0 && x[0] > 0.0 {
        return Ok(Matrix4::identity());
    }
    // v = x − ‖x‖e₁, with v₁ rewritten to avoid cancellation when x₁ > 0.
    let v1 = if x[0] <= 0.0 {
        x[0] - norm
    } else {
        -tail / (x[0] + norm)
    };
    let v = Vector4::new(v1, x[1], x[2], x[3]);
    let vv = v.norm_squared();
    Ok(Matrix4::identity() - v * v.transpose() * (2.0 / vv))
}

/// `min eig(A − ρe₀e₀ᵀ)` for a fixed symmetric `A`, from one
/// eigendecomposition of `A` and the secular equation
/// `1 = ρ Σ uᵢ²/(λᵢ − μ)`, `u = Vᵀe₀`.
pub struct RankOnePencil {
    values: Vec<f64>,
    weights: Vec<f64>,
    norm: f64,
}

impl RankOnePencil {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let eig = linalg::symmetric_eigen_real(a)?;
        let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        let weights: Vec<f64> = (0..values.len())
            .map(|i| eig.eigenvectors[(0, i)].powi(2))
            .collect();
        let norm = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !norm.is_finite() {
            return Err(Error::Eigensolver("non-finite eigenvalue".into()));
        }
        Ok(RankOnePencil {
            values,
            weights,
            norm,
        })
    }

    pub fn min_eig(&self, rho: f64) -> f64 {
        let lmin = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if rho <= 0.0 {
            return lmin;
        }
        // The root lies in [λ_min − ρ, λ_min]; at the left end the secular
        // function is nonnegative since Σuᵢ² = 1.
        let secular = |mu: f64| {
            let mut s = 0.0;
            for (l, w) in self.values.iter().zip(&self.weights) {
                let d = l - mu;
                if d <= 0.0 {
                    if *w > 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    continue;
                }
                s += w / d;
            }
            1.0 - rho * s
        };
        let (mut lo, mut hi) = (lmin - rho, lmin);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn tolerance(&self, rho: f64) -> f64 {
        psd_tolerance(self.norm + rho.abs())
    }

    pub fn passes(&self, rho: f64) -> bool {
        self.min_eig(rho) >= -self.tolerance(rho)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub f: AffineFunction,
    #[serde(rename = "N")]
    pub degree: usize,
    /// Largest passing `c` at this truncation, to within `tol_c`.
    pub c_star: f64,
    pub limiting_threshold: Option<f64>,
    pub iterations: usize,
    pub min_eig_lo: f64,
    pub min_eig_hi: f64,
}

/// Bisection on `c` for the sign of the Schur complement at the basis degree.
pub fn threshold_bisection(
    f: &AffineFunction,
    basis: &GradedBasis,
    c_lo: f64,
    c_hi: f64,
    tol_c: f64,
) -> Result<ThresholdReport> {
    require_admissible(f)?;
    if !(c_lo > 0.0 && c_lo < c_hi && c_hi.is_finite()) {
        return Err(Error::domain(format!(
            "need 0 < c_lo < c_hi, got c_lo = {c_lo}, c_hi = {c_hi}"
        )));
    }
    if tol_c.is_nan() || tol_c <= 0.0 {
        return Err(Error::domain(format!("tol_c = {tol_c} must be positive")));
    }
    let degree = basis.degree_cap();
    let limiting_threshold = limiting_threshold(f)?;
    let b2 = f.beta() * f.beta();
    if b2 == 0.0 {
        return Ok(ThresholdReport {
            f: *f,
            degree,
            c_star: c_hi,
            limiting_threshold,
            iterations: 0,
            min_eig_lo: f64::NAN,
            min_eig_hi: f64::NAN,
        });
    }
    let pencil = RankOnePencil::new(&(affine_mult_matrix(basis, f) * f.alpha))?;
    let (lo_eig, hi_eig) = (
        pencil.min_eig(c_lo * c_lo * b2),
        pencil.min_eig(c_hi * c_hi * b2),
    );
    if !pencil.passes(c_lo * c_lo * b2) || pencil.passes(c_hi * c_hi * b2) {
        return Err(Error::Bracket {
            c_lo,
            c_hi,
            lo_eig,
            hi_eig,
        });
    }
    let (mut lo, mut hi) = (c_lo, c_hi);
    let mut iterations = 0;
    while hi - lo > tol_c {
        let mid = 0.5 * (lo + hi);
        if pencil.passes(mid * mid * b2) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(ThresholdReport {
        f: *f,
        degree,
        c_star: lo,
        limiting_threshold,
        iterations,
        min_eig_lo: pencil.min_eig(lo * lo * b2),
        min_eig_hi: pencil.min_eig(hi * hi * b2),
    })
}
