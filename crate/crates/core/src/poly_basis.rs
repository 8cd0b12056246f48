//! Orthonormal graded polynomial basis of `L²(S³, m)` up to degree `N`, and
//! the matrices of the coordinate multiplication operators in that basis.
//!
//! Spanning set: monomials with `t₄`-exponent at most one (on the sphere
//! `t₄² = 1 − t₁² − t₂² − t₃²`), which gives exactly `(k+1)²` monomials of
//! degree `k`. Monomials split into sixteen parity classes by the parities of
//! their exponents; distinct classes are orthogonal under `m`, so
//! Gram–Schmidt runs per class against the exact moment Gram matrix, in
//! double-double arithmetic with one reorthogonalization pass.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::positivity::AffineFunction;
use crate::sphere_measure::{MomentKey, MomentTable};

/// Largest degree `build_basis` accepts.
pub const DEFAULT_DEGREE_CAP: usize = 16;

/// Bound on `‖CᵀGC − I‖_max`.
pub const GRAM_RESIDUAL_LIMIT: f64 = 1e-10;

/// `Σ_{k≤N} (k+1)² = (N+1)(N+2)(2N+3)/6`.
pub fn basis_dimension(degree_cap: usize) -> usize {
    (degree_cap + 1) * (degree_cap + 2) * (2 * degree_cap + 3) / 6
}

/// Degree-`k` monomials with `a₄ ≤ 1`, in basis order.
pub fn graded_monomials(k: usize) -> Vec<MomentKey> {
    let k = k as u32;
    let mut out = Vec::with_capacity(((k + 1) * (k + 1)) as usize);
    for a4 in 0..=1u32.min(k) {
        let d = k - a4;
        for a1 in (0..=d).rev() {
            for a2 in (0..=d - a1).rev() {
                out.push(MomentKey::new(a1, a2, d - a1 - a2, a4));
            }
        }
    }
    out
}

fn parity_class(key: &MomentKey) -> usize {
    let [a1, a2, a3, a4] = key.0;
    ((a1 & 1) | (a2 & 1) << 1 | (a3 & 1) << 2 | (a4 & 1) << 3) as usize
}

/// Index ranges of the polynomial grades plus the extra `ℂ` coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grading {
    offsets: Vec<usize>,
}

impl Grading {
    pub fn new(degree_cap: usize) -> Self {
        let offsets = (0..=degree_cap + 1)
            .map(|k| if k == 0 { 0 } else { basis_dimension(k - 1) })
            .collect();
        Grading { offsets }
    }

    pub fn degree_cap(&self) -> usize {
        self.offsets.len() - 2
    }

    /// Dimension of the polynomial part `H_N`.
    pub fn poly_dim(&self) -> usize {
        *self.offsets.last().expect("nonempty")
    }

    /// Dimension of `H_N ⊕ ℂ`.
    pub fn total_dim(&self) -> usize {
        self.poly_dim() + 1
    }

    /// Index of the `ℂ` summand (last coordinate).
    pub fn extra_index(&self) -> usize {
        self.poly_dim()
    }

    pub fn grade_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn grade_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Polynomial grade of a basis index; `None` for the `ℂ` coordinate.
    pub fn grade_of(&self, index: usize) -> Option<usize> {
        if index >= self.poly_dim() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= index) - 1)
    }
}

struct ParityClass {
    /// Global basis indices, increasing.
    members: Vec<usize>,
    /// `coeffs[j]`: coefficients of the `j`-th orthonormal function of the
    /// class over the class monomials `0..=j`.
    coeffs: Vec<Vec<Dd>>,
}

pub struct GradedBasis {
    grading: Grading,
    monomials: Vec<MomentKey>,
    classes: Vec<ParityClass>,
    /// Global index → (class, position within class).
    location: Vec<(usize, usize)>,
    gram_residual: f64,
    mult_cache: [OnceLock<DMatrix<f64>>; 4],
}

impl std::fmt::Debug for GradedBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradedBasis")
            .field("degree_cap", &self.degree_cap())
            .field("dim", &self.dim())
            .field("gram_residual", &self.gram_residual)
            .finish()
    }
}

/// Orthonormal basis of polynomials of degree `≤ degree_cap` on S³.
pub fn build_basis(degree_cap: usize) -> Result<GradedBasis> {
    build_basis_capped(degree_cap, DEFAULT_DEGREE_CAP)
}

pub fn build_basis_capped(degree_cap: usize, cap: usize) -> Result<GradedBasis> {
    if degree_cap > cap {
        return Err(Error::domain(format!(
            "degree {degree_cap} exceeds the cap {cap}"
        )));
    }
    let grading = Grading::new(degree_cap);
    let monomials: Vec<MomentKey> = (0..=degree_cap).flat_map(graded_monomials).collect();
    debug_assert_eq!(monomials.len(), grading.poly_dim());

    let mut classes: Vec<ParityClass> = (0..16)
        .map(|_| ParityClass {
            members: Vec::new(),
            coeffs: Vec::new(),
        })
        .collect();
    let mut location = Vec::with_capacity(monomials.len());
    for (idx, key) in monomials.iter().enumerate() {
        let c = parity_class(key);
        location.push((c, classes[c].members.len()));
        classes[c].members.push(idx);
    }

    let mut table = MomentTable::new();
    let mut worst = 0.0f64;
    for class in classes.iter_mut() {
        let keys: Vec<MomentKey> = class.members.iter().map(|&i| monomials[i]).collect();
        let s = keys.len();
        let gram: Vec<Vec<Dd>> = (0..s)
            .map(|a| (0..s).map(|b| table.get(keys[a].times(&keys[b]))).collect())
            .collect();
        let apply_gram = |v: &[Dd]| -> Vec<Dd> {
            (0..s)
                .map(|a| v.iter().enumerate().map(|(b, &x)| gram[a][b] * x).sum())
                .collect()
        };
        for j in 0..s {
            let mut v = vec![Dd::ZERO; j + 1];
            v[j] = Dd::ONE;
            for _pass in 0..2 {
                let gv = apply_gram(&v);
                let proj: Vec<Dd> = class.coeffs[..j]
                    .iter()
                    .map(|c| c.iter().zip(gv.iter()).map(|(&x, &y)| x * y).sum())
                    .collect();
                for (c, &h) in class.coeffs[..j].iter().zip(proj.iter()) {
                    for (vx, &cx) in v.iter_mut().zip(c.iter()) {
                        *vx -= h * cx;
                    }
                }
            }
            let gv = apply_gram(&v);
            let norm2: Dd = v.iter().zip(gv.iter()).map(|(&x, &y)| x * y).sum();
            if !norm2.is_finite() || norm2.hi() <= 0.0 {
                return Err(Error::Conditioning {
                    grade: keys[j].degree() as usize,
                    residual: f64::INFINITY,
                    limit: GRAM_RESIDUAL_LIMIT,
                });
            }
            let inv = Dd::ONE / norm2.sqrt();
            for x in v.iter_mut() {
                *x = *x * inv;
            }
            // Residual of the new column against the existing ones and itself.
            let gv = apply_gram(&v);
            let mut resid = 0.0f64;
            for c in &class.coeffs[..j] {
                let ip: Dd = c.iter().zip(gv.iter()).map(|(&x, &y)| x * y).sum();
                resid = resid.max(ip.to_f64().abs());
            }
            let self_ip: Dd = v.iter().zip(gv.iter()).map(|(&x, &y)| x * y).sum();
            resid = resid.max((self_ip - Dd::ONE).to_f64().abs());
            if resid.is_nan() || resid > GRAM_RESIDUAL_LIMIT {
                return Err(Error::Conditioning {
                    grade: keys[j].degree() as usize,
                    residual: resid,
                    limit: GRAM_RESIDUAL_LIMIT,
                });
            }
            worst = worst.max(resid);
            class.coeffs.push(v);
        }
    }

    Ok(GradedBasis {
        grading,
        monomials,
        classes,
        location,
        gram_residual: worst,
        mult_cache: Default::default(),
    })
}

impl GradedBasis {
    pub fn degree_cap(&self) -> usize {
        self.grading.degree_cap()
    }

    pub fn dim(&self) -> usize {
        self.grading.poly_dim()
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn monomials(&self) -> &[MomentKey] {
        &self.monomials
    }

    /// `‖CᵀGC − I‖_max` measured during construction.
    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Monomial coefficients of basis function `j` (nonzero terms only).
    pub fn expansion(&self, j: usize) -> Vec<(MomentKey, f64)> {
        let (c, pos) = self.location[j];
        let class = &self.classes[c];
        class.coeffs[pos]
            .iter()
            .enumerate()
            .map(|(a, x)| (self.monomials[class.members[a]], x.to_f64()))
            .filter(|(_, x)| *x != 0.0)
            .collect()
    }

    /// Square matrix `C` with `C[m, j]` = coefficient of monomial `m` in
    /// basis function `j`.
    pub fn coeff_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(n, n);
        for class in &self.classes {
            for (j, col) in class.coeffs.iter().enumerate() {
                for (a, x) in col.iter().enumerate() {
                    c[(class.members[a], class.members[j])] = x.to_f64();
                }
            }
        }
        c
    }

    /// Value of basis function `j` at a point of S³.
    pub fn evaluate(&self, j: usize, z: &[f64; 4]) -> f64 {
        self.expansion(j).iter().map(|(k, x)| x * k.eval(z)).sum()
    }

    /// Coefficients `⟨t^key, φ_j⟩` of the orthogonal projection of a monomial
    /// onto the basis span.
    pub fn project_monomial(&self, key: MomentKey) -> DVector<f64> {
        let mut table = MomentTable::new();
        let mut out = DVector::zeros(self.dim());
        for class in &self.classes {
            let moments: Vec<Dd> = class
                .members
                .iter()
                .map(|&i| table.get(key.times(&self.monomials[i])))
                .collect();
            if moments.iter().all(|m| *m == Dd::ZERO) {
                continue;
            }
            for (j, col) in class.coeffs.iter().enumerate() {
                let ip: Dd = col.iter().zip(moments.iter()).map(|(&x, &y)| x * y).sum();
                out[class.members[j]] = ip.to_f64();
            }
        }
        out
    }

    fn mult_entries(&self, i: usize) -> &DMatrix<f64> {
        self.mult_cache[i - 1].get_or_init(|| self.assemble_mult(i))
    }

    fn assemble_mult(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        let bit = 1usize << (i - 1);
        let coord = MomentKey::coordinate(i);
        let mut table = MomentTable::new();
        let mut out = DMatrix::zeros(n, n);
        let grade = |idx: usize| self.grading.grade_of(idx).expect("polynomial index");
        for p in 0..16 {
            let q = p ^ bit;
            if q < p {
                continue;
            }
            let (cp, cq) = (&self.classes[p], &self.classes[q]);
            if cp.members.is_empty() || cq.members.is_empty() {
                continue;
            }
            // K = H C_q with H[a][b] = ∫ t^(m_a + m_b + e_i) dm.
            let h: Vec<Vec<Dd>> = cp
                .members
                .iter()
                .map(|&a| {
                    cq.members
                        .iter()
                        .map(|&b| {
                            table.get(self.monomials[a].times(&self.monomials[b]).times(&coord))
                        })
                        .collect()
                })
                .collect();
            let k: Vec<Vec<Dd>> = h
                .iter()
                .map(|row| {
                    cq.coeffs
                        .iter()
                        .map(|col| col.iter().zip(row.iter()).map(|(&x, &y)| x * y).sum())
                        .collect()
                })
                .collect();
            for (jp, colp) in cp.coeffs.iter().enumerate() {
                let gj = grade(cp.members[jp]);
                for (kq, _) in cq.coeffs.iter().enumerate() {
                    let gk = grade(cq.members[kq]);
                    // t_i raises or lowers the grade by exactly one.
                    if gj.abs_diff(gk) != 1 {
                        continue;
                    }
                    let v: Dd = colp.iter().enumerate().map(|(a, &x)| x * k[a][kq]).sum();
                    let v = v.to_f64();
                    out[(cp.members[jp], cq.members[kq])] = v;
                    out[(cq.members[kq], cp.members[jp])] = v;
                }
            }
        }
        out
    }
}

/// Compression of `M_{t_i}` to the basis span.
#[derive(Clone, Debug)]
pub struct MultMatrix {
    pub index: usize,
    pub entries: DMatrix<f64>,
}

/// Matrix of `⟨t_i φ_j, φ_k⟩`, `i ∈ {1,2,3,4}`.
pub fn mult_matrix(basis: &GradedBasis, i: usize) -> Result<MultMatrix> {
    if !(1..=4).contains(&i) {
        return Err(Error::domain(format!("coordinate index {i} outside 1..=4")));
    }
    Ok(MultMatrix {
        index: i,
        entries: basis.mult_entries(i).clone(),
    })
}

/// Compression of `M_f`: `α·I + Σ ωᵢ·M_{t_i}`.
pub fn affine_mult_matrix(basis: &GradedBasis, f: &AffineFunction) -> DMatrix<f64> {
    let n = basis.dim();
    let mut out = DMatrix::identity(n, n) * f.alpha;
    for i in 1..=4 {
        let w = f.omega[i - 1];
        if w != 0.0 {
            out += basis.mult_entries(i) * w;
        }
    }
    out
}
