//! The operators `T_i = M_{t_i} ⊕ 0`, `T_{1,c}` and `T̃_{1,c}` as dense
//! matrices on `H_N ⊕ ℂ`. The last row and column are the `ℂ` summand.
//!
//! `P: L² → ℂ, g ↦ ⟨g, 1⟩` is the row selecting the constant-function
//! coordinate (index 0), since the constant is the first orthonormal
//! basis element.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::poly_basis::{mult_matrix, GradedBasis, Grading};

/// Hermitian tolerance for operators flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum OperatorLabel {
    T1,
    T2,
    T3,
    T4,
    T1c,
    T1cTilde,
    ReT1cTilde,
    ImT1cTilde,
    Custom(String),
}

impl fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorLabel::T1 => write!(f, "T1"),
            OperatorLabel::T2 => write!(f, "T2"),
            OperatorLabel::T3 => write!(f, "T3"),
            OperatorLabel::T4 => write!(f, "T4"),
            OperatorLabel::T1c => write!(f, "T1c"),
            OperatorLabel::T1cTilde => write!(f, "T1c_tilde"),
            OperatorLabel::ReT1cTilde => write!(f, "Re_T1c_tilde"),
            OperatorLabel::ImT1cTilde => write!(f, "Im_T1c_tilde"),
            OperatorLabel::Custom(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    entries: CMatrix,
    grading: Grading,
    label: OperatorLabel,
    hermitian: bool,
}

impl TruncatedOperator {
    pub fn new(entries: CMatrix, grading: Grading, label: OperatorLabel) -> Result<Self> {
        let n = grading.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::domain(format!(
                "operator is {}x{}, grading expects {n}x{n}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let hermitian = linalg::is_hermitian(&entries, HERMITIAN_TOL);
        Ok(TruncatedOperator {
            entries,
            grading,
            label,
            hermitian,
        })
    }

    pub fn from_real(
        entries: &DMatrix<f64>,
        grading: Grading,
        label: OperatorLabel,
    ) -> Result<Self> {
        Self::new(linalg::to_complex(entries), grading, label)
    }

    pub fn identity(grading: &Grading) -> Self {
        let n = grading.total_dim();
        TruncatedOperator {
            entries: CMatrix::identity(n, n),
            grading: grading.clone(),
            label: OperatorLabel::Custom("I".into()),
            hermitian: true,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn label(&self) -> &OperatorLabel {
        &self.label
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn with_label(mut self, label: OperatorLabel) -> Self {
        self.label = label;
        self
    }

    /// Same grading, new entries.
    pub fn derive(&self, entries: CMatrix, label: OperatorLabel) -> Result<Self> {
        Self::new(entries, self.grading.clone(), label)
    }

    pub fn adjoint(&self) -> Self {
        TruncatedOperator {
            entries: self.entries.adjoint(),
            grading: self.grading.clone(),
            label: OperatorLabel::Custom(format!("{}*", self.label)),
            hermitian: self.hermitian,
        }
    }

    /// Plain-text dump: label line, dimension line, then one row per line of
    /// `re im` pairs.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.dim();
        writeln!(out, "# {}", self.label)?;
        writeln!(out, "{n}")?;
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| {
                    let z = self.entries[(i, j)];
                    format!("{:.16e} {:.16e}", z.re, z.im)
                })
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Parse a matrix written by [`TruncatedOperator::write_dump`].
pub fn read_dump<R: BufRead>(input: R) -> Result<CMatrix> {
    let mut lines = input.lines().filter(|l| match l {
        Ok(s) => !s.starts_with('#') && !s.trim().is_empty(),
        Err(_) => true,
    });
    let header = lines.next().ok_or_else(|| Error::domain("empty dump"))??;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::domain(format!("bad dimension line {header:?}")))?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::domain(format!("dump ends before row {i}")))??;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::domain(format!("row {i}: {e}")))?;
        if vals.len() != 2 * n {
            return Err(Error::domain(format!("row {i} has {} numbers", vals.len())));
        }
        for j in 0..n {
            m[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}

/// Ordered Hermitian operators on one shared space.
#[derive(Clone, Debug)]
pub struct OperatorTuple {
    operators: Vec<TruncatedOperator>,
}

impl OperatorTuple {
    pub fn new(operators: Vec<TruncatedOperator>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::domain("empty operator tuple"))?;
        for op in &operators {
            if op.grading() != first.grading() {
                return Err(Error::domain(format!(
                    "{} does not share the grading of {}",
                    op.label(),
                    first.label()
                )));
            }
            if !op.is_hermitian() {
                return Err(Error::domain(format!("{} is not Hermitian", op.label())));
            }
        }
        Ok(OperatorTuple { operators })
    }

    pub fn arity(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[TruncatedOperator] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn grading(&self) -> &Grading {
        self.operators[0].grading()
    }

    /// `Σ θᵢ Aᵢ`.
    pub fn combination(&self, theta: &[f64]) -> CMatrix {
        assert_eq!(theta.len(), self.arity(), "direction arity mismatch");
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (op, &t) in self.operators.iter().zip(theta.iter()) {
            if t != 0.0 {
                out += op.entries() * C64::new(t, 0.0);
            }
        }
        out
    }

    /// The point `z(x) = (⟨Aᵢx, x⟩)ᵢ` of the joint numerical range.
    pub fn point(&self, x: &CVector) -> Vec<f64> {
        self.operators
            .iter()
            .map(|op| linalg::rayleigh(op.entries(), x))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TupleVariant {
    /// `(T₁, T₂, T₃, T₄)`
    Plain,
    /// `(T_{1,c}, T₂, T₃, T₄)`
    Coupled(f64),
    /// `(Re T̃_{1,c}, Im T̃_{1,c}, T₂, T₃, T₄)`
    Tilde(f64),
}

fn check_coupling(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("coupling c = {c} must be positive")));
    }
    Ok(())
}

fn padded_mult(basis: &GradedBasis, i: usize) -> Result<CMatrix> {
    let n = basis.dim();
    let m = mult_matrix(basis, i)?.entries;
    let mut out = CMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n))
        .copy_from(&linalg::to_complex(&m));
    Ok(out)
}

/// `T_i = M_{t_i} ⊕ 0`.
pub fn plain_operator(basis: &GradedBasis, i: usize) -> Result<TruncatedOperator> {
    let label = match i {
        1 => OperatorLabel::T1,
        2 => OperatorLabel::T2,
        3 => OperatorLabel::T3,
        4 => OperatorLabel::T4,
        _ => return Err(Error::domain(format!("coordinate index {i} outside 1..=4"))),
    };
    TruncatedOperator::new(padded_mult(basis, i)?, basis.grading().clone(), label)
}

/// `T_{1,c} = ( M_{t₁}  cP* ; cP  0 )`.
pub fn coupled_operator(basis: &GradedBasis, c: f64) -> Result<TruncatedOperator> {
    check_coupling(c)?;
    let mut m = padded_mult(basis, 1)?;
    let e = basis.grading().extra_index();
    m[(0, e)] = C64::new(c, 0.0);
    m[(e, 0)] = C64::new(c, 0.0);
    TruncatedOperator::new(m, basis.grading().clone(), OperatorLabel::T1c)
}

/// `T̃_{1,c} = ( M_{t₁}  cP* ; 0  0 )`; not Hermitian.
pub fn tilde_operator(basis: &GradedBasis, c: f64) -> Result<TruncatedOperator> {
    check_coupling(c)?;
    let mut m = padded_mult(basis, 1)?;
    let e = basis.grading().extra_index();
    m[(0, e)] = C64::new(c, 0.0);
    TruncatedOperator::new(m, basis.grading().clone(), OperatorLabel::T1cTilde)
}

pub fn build_tuple(basis: &GradedBasis, variant: TupleVariant) -> Result<OperatorTuple> {
    let mut ops = Vec::with_capacity(5);
    match variant {
        TupleVariant::Plain => ops.push(plain_operator(basis, 1)?),
        TupleVariant::Coupled(c) => ops.push(coupled_operator(basis, c)?),
        TupleVariant::Tilde(c) => {
            let (re, im) = hermitian_parts(&tilde_operator(basis, c)?)?;
            ops.push(re);
            ops.push(im);
        }
    }
    for i in 2..=4 {
        ops.push(plain_operator(basis, i)?);
    }
    OperatorTuple::new(ops)
}

/// `Re A = (A + A*)/2` and `Im A = (A − A*)/(2i)`.
pub fn hermitian_parts(a: &TruncatedOperator) -> Result<(TruncatedOperator, TruncatedOperator)> {
    let adj = a.entries().adjoint();
    let re = (a.entries() + &adj) * C64::new(0.5, 0.0);
    // 1/(2i) = −i/2
    let im = (a.entries() - &adj) * C64::new(0.0, -0.5);
    let (re_label, im_label) = match a.label() {
        OperatorLabel::T1cTilde => (OperatorLabel::ReT1cTilde, OperatorLabel::ImT1cTilde),
        other => (
            OperatorLabel::Custom(format!("Re({other})")),
            OperatorLabel::Custom(format!("Im({other})")),
        ),
    };
    Ok((a.derive(re, re_label)?, a.derive(im, im_label)?))
}

/// Largest singular value.
pub fn op_norm(a: &TruncatedOperator) -> Result<f64> {
    linalg::spectral_norm(a.entries())
}

/// Mask of the indices kept by `Π_k`: grades `≤ k` plus the `ℂ` coordinate.
pub fn compression_mask(grading: &Grading, k: usize) -> Vec<bool> {
    let cutoff = grading.grade_offsets()[k + 1];
    let e = grading.extra_index();
    (0..grading.total_dim())
        .map(|i| i < cutoff || i == e)
        .collect()
}

/// `Π_k A Π_k`, with `Π_k` the projection onto grades `≤ k` plus `ℂ`.
pub fn compress_to_degree(a: &TruncatedOperator, k: usize) -> Result<TruncatedOperator> {
    let cap = a.grading().degree_cap();
    if k > cap {
        return Err(Error::domain(format!(
            "grade {k} exceeds the degree cap {cap}"
        )));
    }
    let entries = compress_matrix(a.entries(), a.grading(), k);
    Ok(TruncatedOperator {
        entries,
        grading: a.grading().clone(),
        label: a.label().clone(),
        hermitian: a.hermitian,
    })
}

pub fn compress_matrix(m: &CMatrix, grading: &Grading, k: usize) -> CMatrix {
    let keep = compression_mask(grading, k);
    let mut out = m.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            if !(keep[i] && keep[j]) {
                out[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly_basis::build_basis;

    #[test]
    fn dimensions_and_extra_coordinate() {
        let b = build_basis(2).unwrap();
        let t = build_tuple(&b, TupleVariant::Plain).unwrap();
        assert_eq!(t.arity(), 4);
        for op in t.operators() {
            assert_eq!(op.dim(), 15);
            let e = op.grading().extra_index();
            assert!((0..15).all(|j| op.entries()[(e, j)].norm() == 0.0));
            assert!((0..15).all(|j| op.entries()[(j, e)].norm() == 0.0));
        }
        assert_eq!(
            build_tuple(&b, TupleVariant::Tilde(0.3)).unwrap().arity(),
            5
        );
    }

    #[test]
    fn invalid_coupling() {
        let b = build_basis(1).unwrap();
        assert!(build_tuple(&b, TupleVariant::Coupled(0.0)).is_err());
        assert!(build_tuple(&b, TupleVariant::Tilde(-1.0)).is_err());
        assert!(build_tuple(&b, TupleVariant::Coupled(f64::NAN)).is_err());
    }

    #[test]
    fn tilde_is_not_hermitian_and_rejected_by_tuple() {
        let b = build_basis(1).unwrap();
        let t = tilde_operator(&b, 0.4).unwrap();
        assert!(!t.is_hermitian());
        assert!(OperatorTuple::new(vec![t]).is_err());
    }

    #[test]
    fn hermitian_parts_of_hermitian() {
        let b = build_basis(2).unwrap();
        let (re, im) = hermitian_parts(&coupled_operator(&b, 0.3).unwrap()).unwrap();
        assert_eq!(linalg::max_abs(im.entries()), 0.0);
        assert_eq!(re.entries(), coupled_operator(&b, 0.3).unwrap().entries());
    }

    #[test]
    fn norms() {
        let b = build_basis(1).unwrap();
        let id = TruncatedOperator::identity(b.grading());
        assert!((op_norm(&id).unwrap() - 1.0).abs() < 1e-15);
        let t2 = plain_operator(&b, 2).unwrap();
        assert!((op_norm(&t2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn compression_bounds() {
        let b = build_basis(2).unwrap();
        let t1 = plain_operator(&b, 1).unwrap();
        assert!(compress_to_degree(&t1, 3).is_err());
        assert_eq!(compress_to_degree(&t1, 2).unwrap().entries(), t1.entries());
    }

    #[test]
    fn dump_round_trip() {
        let b = build_basis(1).unwrap();
        let (_, im) = hermitian_parts(&tilde_operator(&b, 0.7).unwrap()).unwrap();
        let mut buf = Vec::new();
        im.write_dump(&mut buf).unwrap();
        let back = read_dump(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(&back, im.entries());
        assert!(read_dump(std::io::Cursor::new("2\n1 0 0 0\n")).is_err());
    }
}
