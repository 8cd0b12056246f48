//! Joint numerical ranges of Hermitian tuples through their support
//! functions `h(θ) = λ_max(Σ θᵢAᵢ)`.
//!
//! `max_θ h(θ) ≤ 1` certifies that the convex hull of the range, and hence
//! the range, lies in the closed unit ball. Margins are reported as
//! `1 − max h`; strict containment is never claimed from a truncation.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::operator_models::{build_tuple, OperatorTuple, TupleVariant};
use crate::poly_basis::GradedBasis;

/// Accepted overshoot of `max h` above 1.
pub const CONTAINMENT_TOL: f64 = 1e-9;
/// Slack in the Cauchy–Schwarz audit inequalities.
pub const AUDIT_TOL: f64 = 1e-12;
pub const DEFAULT_BUDGET: usize = 2000;
pub const DEFAULT_REFINE: usize = 50;
pub const DEFAULT_REFINE_STARTS: usize = 10;

/// Unit vector in ℝᵏ.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let n = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("direction has norm {n}, expected 1")));
        }
        Ok(Direction(components))
    }

    /// `v/‖v‖`, or `None` for the zero vector.
    pub fn normalized(v: &[f64]) -> Option<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return None;
        }
        Some(Direction(v.iter().map(|x| x / n).collect()))
    }

    pub fn axis(k: usize, i: usize) -> Self {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        Direction(v)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplePhase {
    Sweep,
    Refine,
}

#[derive(Clone, Debug)]
pub struct SupportSample {
    pub direction: Direction,
    pub value: f64,
    pub witness: CVector,
    pub phase: SamplePhase,
}

/// `h(θ)` with its top eigenvector as witness.
pub fn support_function(tuple: &OperatorTuple, theta: &Direction) -> Result<SupportSample> {
    if theta.arity() != tuple.arity() {
        return Err(Error::domain(format!(
            "direction has {} components, tuple has {} operators",
            theta.arity(),
            tuple.arity()
        )));
    }
    let (value, witness) = linalg::top_eigenpair(&tuple.combination(theta.components()))?;
    Ok(SupportSample {
        direction: theta.clone(),
        value,
        witness,
        phase: SamplePhase::Sweep,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RangeReport {
    pub max_support: f64,
    pub argmax_direction: Direction,
    pub margin: f64,
    pub samples: usize,
    pub refinement_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub budget: usize,
    pub refine: usize,
    pub refine_starts: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            budget: DEFAULT_BUDGET,
            refine: DEFAULT_REFINE,
            refine_starts: DEFAULT_REFINE_STARTS,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub report: RangeReport,
    /// Sweep samples in order, then refinement steps.
    pub records: Vec<SupportSample>,
}

/// Largest root of `x^{k+1} = x + 1`, the generalized golden ratio.
fn generalized_phi(k: usize) -> f64 {
    let p = (k + 1) as i32;
    let mut x = 2.0f64;
    for _ in 0..100 {
        let next = x - (x.powi(p) - x - 1.0) / (p as f64 * x.powi(p - 1) - 1.0);
        if (next - x).abs() < 1e-16 {
            return next;
        }
        x = next;
    }
    x
}

/// Deterministic low-discrepancy directions on `S^{k−1}`: an additive
/// recurrence in `[0,1)ᵏ` with a seeded shift, pushed through the inverse
/// normal CDF and normalized.
pub fn sphere_directions(k: usize, count: usize, seed: u64) -> Vec<Direction> {
    assert!(k >= 1, "direction arity must be positive");
    let phi = generalized_phi(k);
    let steps: Vec<f64> = (1..=k).map(|j| phi.powi(-(j as i32))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let normal = Normal::standard();
    let mut out = Vec::with_capacity(count);
    let mut n = 1u64;
    while out.len() < count {
        let g: Vec<f64> = (0..k)
            .map(|j| {
                let u = (shift[j] + n as f64 * steps[j]).fract();
                normal.inverse_cdf(u.clamp(1e-16, 1.0 - 1e-16))
            })
            .collect();
        n += 1;
        if let Some(d) = Direction::normalized(&g) {
            out.push(d);
        }
    }
    out
}

/// Index of the largest value; lowest index on ties.
fn argmax_by_value(records: &[SupportSample]) -> usize {
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.value > records[best].value {
            best = i;
        }
    }
    best
}

/// Maximize `h` over a low-discrepancy sweep, then refine the best starts
/// with `θ ← z(witness)/‖z(witness)‖`, which never decreases `h`.
pub fn sweep_max_support(tuple: &OperatorTuple, cfg: &SweepConfig) -> Result<Sweep> {
    if cfg.budget == 0 {
        return Err(Error::domain("budget must be at least 1"));
    }
    let mut records = Vec::with_capacity(cfg.budget + cfg.refine * cfg.refine_starts);
    for theta in sphere_directions(tuple.arity(), cfg.budget, cfg.seed) {
        records.push(support_function(tuple, &theta)?);
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .value
            .total_cmp(&records[a].value)
            .then(a.cmp(&b))
    });
    let mut refinement_steps = 0;
    for &start in order.iter().take(cfg.refine_starts) {
        let mut current = records[start].clone();
        for _ in 0..cfg.refine {
            let z = tuple.point(&current.witness);
            let Some(theta) = Direction::normalized(&z) else {
                break;
            };
            let mut next = support_function(tuple, &theta)?;
            next.phase = SamplePhase::Refine;
            let gain = next.value - current.value;
            records.push(next.clone());
            refinement_steps += 1;
            if gain <= 1e-14 * (1.0 + current.value.abs()) {
                break;
            }
            current = next;
        }
    }
    let best = argmax_by_value(&records);
    let max_support = records[best].value;
    Ok(Sweep {
        report: RangeReport {
            max_support,
            argmax_direction: records[best].direction.clone(),
            margin: 1.0 - max_support,
            samples: cfg.budget,
            refinement_steps,
        },
        records,
    })
}

#[derive(Clone, Debug)]
pub struct FarthestPoint {
    pub witness: CVector,
    pub norm: f64,
    /// `‖z(x)‖` at every iterate, starting point included.
    pub history: Vec<f64>,
    pub stationary: bool,
}

/// Local maximization of `‖z(x)‖` by `x ← top eigenvector of Σ ẑᵢ(x)Aᵢ`.
pub fn farthest_point_iteration(
    tuple: &OperatorTuple,
    x0: &CVector,
    max_iter: usize,
    tol: f64,
) -> Result<FarthestPoint> {
    if x0.len() != tuple.dim() {
        return Err(Error::domain(format!(
            "start vector has length {}, operators are {}x{}",
            x0.len(),
            tuple.dim(),
            tuple.dim()
        )));
    }
    if (x0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "start vector has norm {}",
            x0.norm()
        )));
    }
    let mut x = x0.clone();
    let norm_of = |v: &CVector| tuple.point(v).iter().map(|t| t * t).sum::<f64>().sqrt();
    let mut norm = norm_of(&x);
    let mut history = vec![norm];
    for _ in 0..max_iter {
        let z = tuple.point(&x);
        let Some(theta) = Direction::normalized(&z) else {
            return Ok(FarthestPoint {
                witness: x,
                norm,
                history,
                stationary: true,
            });
        };
        let (_, y) = linalg::top_eigenpair(&tuple.combination(theta.components()))?;
        let next = norm_of(&y);
        history.push(next);
        if next >= norm {
            x = y;
        }
        let gain = next - norm;
        norm = norm.max(next);
        if gain < tol {
            break;
        }
    }
    Ok(FarthestPoint {
        witness: x,
        norm,
        history,
        stationary: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum Lemma {
    /// Plain tuple `(T₁, T₂, T₃, T₄)`.
    Lemma0,
    /// `(T_{1,c}, T₂, T₃, T₄)`, stated for `0 < c < 1/2`.
    Lemma1 { c: f64 },
    /// Hermitian parts of `T̃_{1,c}` with `T₂, T₃, T₄`, stated for `0 < c < 1`.
    Lemma2 { c: f64 },
}

impl Lemma {
    pub fn variant(&self) -> TupleVariant {
        match *self {
            Lemma::Lemma0 => TupleVariant::Plain,
            Lemma::Lemma1 { c } => TupleVariant::Coupled(c),
            Lemma::Lemma2 { c } => TupleVariant::Tilde(c),
        }
    }

    /// Usage error when `c` is outside the stated range.
    pub fn check_range(&self) -> Result<()> {
        let (c, hi) = match *self {
            Lemma::Lemma0 => return Ok(()),
            Lemma::Lemma1 { c } => (c, 0.5),
            Lemma::Lemma2 { c } => (c, 1.0),
        };
        if !(c > 0.0 && c < hi) {
            return Err(Error::usage(format!(
                "c = {c} is outside (0, {hi}); pass the override flag to run anyway"
            )));
        }
        Ok(())
    }
}

/// Per-witness Cauchy–Schwarz chain `Σ⟨Aᵢx,x⟩² ≤ Σ⟨Aᵢ²x,x⟩ ≤ 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ChainAudit {
    pub witnesses: usize,
    pub max_point_norm_sq: f64,
    pub max_square_sum: f64,
    /// Witnesses with `Σ⟨Aᵢx,x⟩² > Σ‖Aᵢx‖² + 1e−12`.
    pub chain_violations: usize,
    /// Witnesses with `Σ‖Aᵢx‖² > 1 + 1e−12`.
    pub bound_violations: usize,
}

pub fn chain_audit(tuple: &OperatorTuple, witnesses: &[&CVector]) -> ChainAudit {
    let mut audit = ChainAudit::default();
    for x in witnesses {
        let first: f64 = tuple.point(x).iter().map(|t| t * t).sum();
        let second: f64 = tuple
            .operators()
            .iter()
            .map(|op| (op.entries() * *x).norm_squared())
            .sum();
        audit.witnesses += 1;
        audit.max_point_norm_sq = audit.max_point_norm_sq.max(first);
        audit.max_square_sum = audit.max_square_sum.max(second);
        if first > second + AUDIT_TOL {
            audit.chain_violations += 1;
        }
        if second > 1.0 + AUDIT_TOL {
            audit.bound_violations += 1;
        }
    }
    audit
}

#[derive(Clone, Debug, Serialize)]
pub struct BallMarginReport {
    #[serde(flatten)]
    pub lemma: Lemma,
    #[serde(rename = "N")]
    pub degree: usize,
    pub range: RangeReport,
    pub audit: ChainAudit,
    /// `max_support ≤ 1 + 1e−9`.
    pub contained: bool,
    #[serde(skip)]
    pub records: Vec<SupportSample>,
}

pub fn ball_margin_report(
    lemma: Lemma,
    basis: &GradedBasis,
    cfg: &SweepConfig,
    override_range: bool,
) -> Result<BallMarginReport> {
    if !override_range {
        lemma.check_range()?;
    }
    let tuple = build_tuple(basis, lemma.variant())?;
    let sweep = sweep_max_support(&tuple, cfg)?;
    let witnesses: Vec<&CVector> = sweep.records.iter().map(|r| &r.witness).collect();
    let audit = chain_audit(&tuple, &witnesses);
    Ok(BallMarginReport {
        lemma,
        degree: basis.degree_cap(),
        contained: sweep.report.max_support <= 1.0 + CONTAINMENT_TOL,
        range: sweep.report,
        audit,
        records: sweep.records,
    })
}

/// One row per record: `theta_1..theta_k,h,margin`, 17 significant digits.
pub fn write_sweep_csv<W: Write>(
    records: &[SupportSample],
    arity: usize,
    mut out: W,
) -> Result<()> {
    let mut header: Vec<String> = (1..=arity).map(|i| format!("theta_{i}")).collect();
    header.push("h".into());
    header.push("margin".into());
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row: Vec<String> = r
            .direction
            .components()
            .iter()
            .map(|x| format!("{x:.16e}"))
            .collect();
        row.push(format!("{:.16e}", r.value));
        row.push(format!("{:.16e}", 1.0 - r.value));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Unit vector with seeded Gaussian entries, for random starts.
pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> CVector {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v = DVector::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            linalg::C64::new(re, im)
        });
        let n = v.norm();
        if n > 0.0 {
            return v / linalg::C64::new(n, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_models::{OperatorLabel, TruncatedOperator};
    use crate::poly_basis::build_basis;

    #[test]
    fn recurrence_constant_solves_its_equation() {
        for k in 1..=5 {
            let x = generalized_phi(k);
            assert!((x.powi(k as i32 + 1) - x - 1.0).abs() < 1e-14);
        }
        assert!((generalized_phi(1) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        let a = sphere_directions(4, 50, 7);
        assert_eq!(a, sphere_directions(4, 50, 7));
        assert_ne!(a, sphere_directions(4, 50, 8));
        for d in &a {
            assert!((d.components().iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for d in sphere_directions(1, 20, 3) {
            assert_eq!(d.components()[0].abs(), 1.0);
        }
    }

    #[test]
    fn identity_single_operator() {
        let b = build_basis(1).unwrap();
        let id =
            TruncatedOperator::identity(b.grading()).with_label(OperatorLabel::Custom("I".into()));
        let tuple = OperatorTuple::new(vec![id]).unwrap();
        let cfg = SweepConfig {
            budget: 8,
            ..SweepConfig::default()
        };
        let s = sweep_max_support(&tuple, &cfg).unwrap();
        assert!((s.report.max_support - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wrong_arity_and_bad_budget() {
        let b = build_basis(1).unwrap();
        let t = build_tuple(&b, TupleVariant::Plain).unwrap();
        assert!(support_function(&t, &Direction::axis(5, 0)).is_err());
        assert!(Direction::new(vec![1.0, 1.0]).is_err());
        let cfg = SweepConfig {
            budget: 0,
            ..SweepConfig::default()
        };
        assert!(sweep_max_support(&t, &cfg).is_err());
    }

    #[test]
    fn lemma_ranges() {
        assert!(Lemma::Lemma1 { c: 0.5 }.check_range().is_err());
        assert!(Lemma::Lemma1 { c: 0.49 }.check_range().is_ok());
        assert!(Lemma::Lemma2 { c: 0.99 }.check_range().is_ok());
        assert!(matches!(
            Lemma::Lemma2 { c: 1.0 }.check_range(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn csv_shape() {
        let b = build_basis(1).unwrap();
        let t = build_tuple(&b, TupleVariant::Plain).unwrap();
        let cfg = SweepConfig {
            budget: 5,
            refine: 2,
            refine_starts: 1,
            seed: 1,
        };
        let s = sweep_max_support(&t, &cfg).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&s.records, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta_1,theta_2,theta_3,theta_4,h,margin");
        assert_eq!(lines.len(), 1 + s.records.len());
        assert_eq!(s.records.len(), cfg.budget + s.report.refinement_steps);
    }
}
