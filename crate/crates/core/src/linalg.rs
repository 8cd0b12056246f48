//! Dense Hermitian eigen-helpers shared by the operator modules.
//!
//! Every solve goes through [`hermitian_eigen`]. When a diagonal unitary
//! similarity makes the input real (always the case for the tuples built
//! here, whose only complex entries couple the extra coordinate to the
//! constant function), the real symmetric solver is used and the
//! eigenvectors are rotated back.

use std::collections::VecDeque;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative residual allowed on the extreme eigenpairs.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Index of the largest eigenvalue; lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Phases `u` and the real matrix `B = D* A D`, `D = diag(u)`, if one exists.
fn real_gauge(a: &CMatrix) -> Option<(DMatrix<f64>, Vec<C64>)> {
    let n = a.nrows();
    if a.iter().all(|z| z.im == 0.0) {
        return Some((a.map(|z| z.re), vec![C64::new(1.0, 0.0); n]));
    }
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut phase: Vec<Option<C64>> = vec![None; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if phase[root].is_some() {
            continue;
        }
        phase[root] = Some(C64::new(1.0, 0.0));
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let pu = phase[u].expect("queued nodes have a phase");
            for v in 0..n {
                let z = a[(u, v)];
                if v == u || phase[v].is_some() || z == C64::new(0.0, 0.0) {
                    continue;
                }
                phase[v] = Some(if z.im == 0.0 {
                    pu
                } else {
                    pu * z.conj() / z.norm()
                });
                queue.push_back(v);
            }
        }
    }
    let phase: Vec<C64> = phase.into_iter().map(|p| p.expect("all visited")).collect();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let z = phase[i].conj() * a[(i, j)] * phase[j];
            if z.im.abs() > 1e-15 * scale.max(f64::MIN_POSITIVE) {
                return None;
            }
            b[(i, j)] = z.re;
        }
    }
    // Symmetrize away rounding in the phase products.
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = m;
            b[(j, i)] = m;
        }
    }
    Some((b, phase))
}

fn max_iterations(n: usize) -> usize {
    1000 * n.max(1)
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::Eigensolver(format!(
            "matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let eig = if let Some((b, phase)) = real_gauge(a) {
        let se = SymmetricEigen::try_new(b, f64::EPSILON, max_iterations(n))
            .ok_or_else(|| Error::Eigensolver("real symmetric QR did not converge".into()))?;
        let mut vectors = se.eigenvectors.map(|x| C64::new(x, 0.0));
        for (i, p) in phase.iter().enumerate() {
            if *p != C64::new(1.0, 0.0) {
                for k in 0..n {
                    vectors[(i, k)] *= *p;
                }
            }
        }
        HermitianEigen {
            values: se.eigenvalues,
            vectors,
        }
    } else {
        let se = SymmetricEigen::try_new(a.clone(), f64::EPSILON, max_iterations(n))
            .ok_or_else(|| Error::Eigensolver("Hermitian QR did not converge".into()))?;
        HermitianEigen {
            values: se.eigenvalues,
            vectors: se.eigenvectors,
        }
    };
    verify_pair(a, &eig, eig.argmax())?;
    verify_pair(a, &eig, eig.argmin())?;
    Ok(eig)
}

fn verify_pair(a: &CMatrix, eig: &HermitianEigen, k: usize) -> Result<()> {
    let v = eig.vectors.column(k);
    let lambda = eig.values[k];
    let resid = (a * v - v * C64::new(lambda, 0.0)).norm();
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1.0);
    if !resid.is_finite() || resid > EIGEN_RESIDUAL_TOL * scale {
        return Err(Error::Eigensolver(format!(
            "eigenpair residual {resid:e} exceeds {:e}",
            EIGEN_RESIDUAL_TOL * scale
        )));
    }
    Ok(())
}

/// Largest eigenvalue and a unit eigenvector.
pub fn top_eigenpair(a: &CMatrix) -> Result<(f64, CVector)> {
    let eig = hermitian_eigen(a)?;
    let k = eig.argmax();
    Ok((eig.values[k], eig.vectors.column(k).into_owned()))
}

pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    if let Some((b, _)) = real_gauge(a) {
        return min_eigenvalue_real(&b);
    }
    let eig = hermitian_eigen(a)?;
    Ok(eig.values[eig.argmin()])
}

pub fn min_eigenvalue_real(a: &DMatrix<f64>) -> Result<f64> {
    let values = a.clone().symmetric_eigenvalues();
    let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(m)
}

/// Eigen-decomposition of a real symmetric matrix.
pub fn symmetric_eigen_real(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    SymmetricEigen::try_new(a.clone(), f64::EPSILON, max_iterations(n))
        .ok_or_else(|| Error::Eigensolver("real symmetric QR did not converge".into()))
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    for j in 0..n {
        for i in 0..=j {
            if (a[(i, j)] - a[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    if is_hermitian(a, 0.0) {
        let eig = hermitian_eigen(a)?;
        return Ok(eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let gram = a.adjoint() * a;
    let (top, _) = top_eigenpair(&gram)?;
    Ok(top.max(0.0).sqrt())
}

/// `<A x, x>` for Hermitian `A`, real part only.
pub fn rayleigh(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.norm()))
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gauge_handles_leaf_phase() {
        // Real block plus an imaginary coupling to a leaf coordinate.
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 1)] = c(0.5, 0.0);
        a[(1, 0)] = c(0.5, 0.0);
        a[(0, 2)] = c(0.3, -0.2);
        a[(2, 0)] = c(0.3, 0.2);
        let (b, phase) = real_gauge(&a).expect("tree graph is gaugeable");
        assert!(b.iter().all(|x| x.is_finite()));
        let d = CMatrix::from_diagonal(&CVector::from_vec(phase));
        let back = &d * to_complex(&b) * d.adjoint();
        assert!(max_abs_diff(&back, &a) < 1e-15);
    }

    #[test]
    fn cycle_with_flux_is_not_gaugeable() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 1)] = c(1.0, 0.0);
        a[(1, 0)] = c(1.0, 0.0);
        a[(1, 2)] = c(1.0, 0.0);
        a[(2, 1)] = c(1.0, 0.0);
        a[(0, 2)] = c(0.0, 1.0);
        a[(2, 0)] = c(0.0, -1.0);
        assert!(real_gauge(&a).is_none());
        // Falls back to the complex solver; eigenvalues still sum to the trace.
        let eig = hermitian_eigen(&a).unwrap();
        assert!(eig.values.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn top_pair_and_norm() {
        let a = to_complex(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let (top, v) = top_eigenpair(&a).unwrap();
        assert!((top - 3.0).abs() < 1e-14);
        assert!((rayleigh(&a, &v) - 3.0).abs() < 1e-14);
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-14);
        let nilpotent = to_complex(&DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]));
        assert!((spectral_norm(&nilpotent).unwrap() - 2.0).abs() < 1e-14);
    }
}
