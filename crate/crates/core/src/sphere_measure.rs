//! Integration against the rotation-invariant probability measure `m` on S³.
//!
//! Three independent routes are provided: exact monomial moments (rational
//! arithmetic), one-dimensional rules for functions of a single coordinate
//! (the coordinate `t₁` has density `(2/π)√(1−t²)` on `[−1, 1]` under `m`),
//! and seeded Monte Carlo on normalized Gaussian 4-vectors.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Exponents `(a₁, a₂, a₃, a₄)` of the monomial `t₁^a₁ t₂^a₂ t₃^a₃ t₄^a₄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentKey(pub [u32; 4]);

impl MomentKey {
    pub const ONE: MomentKey = MomentKey([0, 0, 0, 0]);

    pub fn new(a1: u32, a2: u32, a3: u32, a4: u32) -> Self {
        MomentKey([a1, a2, a3, a4])
    }

    /// The coordinate function `t_i`, `i ∈ {1,2,3,4}`.
    pub fn coordinate(i: usize) -> Self {
        assert!((1..=4).contains(&i), "coordinate index {i} outside 1..=4");
        let mut e = [0; 4];
        e[i - 1] = 1;
        MomentKey(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn has_odd_exponent(&self) -> bool {
        self.0.iter().any(|a| a % 2 == 1)
    }

    /// Exponents of the product of two monomials.
    pub fn times(&self, other: &MomentKey) -> MomentKey {
        let mut e = self.0;
        for (x, y) in e.iter_mut().zip(other.0.iter()) {
            *x += y;
        }
        MomentKey(e)
    }

    pub fn eval(&self, z: &[f64; 4]) -> f64 {
        self.0
            .iter()
            .zip(z.iter())
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

fn double_factorial_odd(n: u32) -> BigInt {
    // (n-1)!! for even n, i.e. 1·3·5···(n-1).
    let mut acc = BigInt::one();
    let mut k = 1u32;
    while k < n {
        acc *= k;
        k += 2;
    }
    acc
}

/// `∫ t^a dm` as an exact rational.
///
/// Zero when any exponent is odd; otherwise `Π(aᵢ−1)!! / (4·6···(2+|a|))`.
pub fn exact_moment(key: MomentKey) -> BigRational {
    if key.has_odd_exponent() {
        return BigRational::zero();
    }
    let num = key
        .0
        .iter()
        .fold(BigInt::one(), |acc, &a| acc * double_factorial_odd(a));
    let mut den = BigInt::one();
    let mut j = 4u32;
    while j <= 2 + key.degree() {
        den *= j;
        j += 2;
    }
    BigRational::new(num, den)
}

pub fn moment_f64(key: MomentKey) -> f64 {
    Dd::from_ratio(&exact_moment(key)).to_f64()
}

/// Memoized double-double moments; the basis construction queries the same
/// keys many times.
#[derive(Default)]
pub struct MomentTable {
    cache: HashMap<MomentKey, Dd>,
}

impl MomentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, key: MomentKey) -> Dd {
        if key.has_odd_exponent() {
            return Dd::ZERO;
        }
        *self
            .cache
            .entry(key)
            .or_insert_with(|| Dd::from_ratio(&exact_moment(key)))
    }
}

/// Density of the pushforward of `m` under one coordinate.
pub fn coordinate_density(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        2.0 / PI * (1.0 - t * t).sqrt()
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Enforce the exact reflection symmetry of the rule.
    for k in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// A rule `Σ wₖ g(tₖ) ≈ ∫ g(t) (2/π)√(1−t²) dt`, i.e. `∫ g(t₁) dm`.
#[derive(Clone, Debug)]
pub struct QuadratureRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Polynomials up to this degree are integrated to rounding accuracy.
    pub exact_degree: usize,
}

impl QuadratureRule1D {
    /// Gauss rule for the weight `√(1−t²)`: nodes `cos(kπ/(n+1))`, exact to
    /// degree `2n−1`.
    pub fn chebyshev_second_kind(n: usize) -> Self {
        assert!(n >= 1);
        let h = PI / (n as f64 + 1.0);
        let (nodes, weights) = (1..=n)
            .map(|k| {
                let theta = k as f64 * h;
                (theta.cos(), 2.0 / (n as f64 + 1.0) * theta.sin().powi(2))
            })
            .unzip();
        QuadratureRule1D {
            nodes,
            weights,
            exact_degree: 2 * n - 1,
        }
    }

    /// Gauss–Legendre in the angle `t = cos θ`, `θ ∈ [0, π]`, with the
    /// Jacobian `sin²θ` folded into the weights.
    ///
    /// Unlike [`Self::chebyshev_second_kind`] this stays spectrally accurate
    /// for `1/(α + w t)` at the endpoint case `α = w`, where the θ-integrand
    /// `sin²θ/(α + w cos θ) = (1 − cos θ)/w` is entire.
    pub fn angular_gauss_legendre(n: usize) -> Self {
        assert!(n >= 2);
        let (x, w) = gauss_legendre(n);
        let (nodes, weights) = x
            .iter()
            .zip(w.iter())
            .map(|(&xk, &wk)| {
                let theta = 0.5 * PI * (xk + 1.0);
                (theta.cos(), wk * theta.sin().powi(2))
            })
            .unzip();
        QuadratureRule1D {
            nodes,
            weights,
            exact_degree: n,
        }
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&t, &w)| w * g(t))
            .sum()
    }
}

/// Default number of nodes for one-dimensional rules.
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

fn check_inverse_linear_domain(alpha: f64, w: f64) -> Result<f64> {
    if !(alpha.is_finite() && w.is_finite()) {
        return Err(Error::domain(format!(
            "non-finite arguments ({alpha}, {w})"
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::domain(format!("alpha = {alpha} must be positive")));
    }
    if w < 0.0 {
        return Err(Error::domain(format!("w = {w} must be nonnegative")));
    }
    // Allow ‖ω‖ computed a few ulps above α.
    if w > alpha * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::domain(format!(
            "alpha = {alpha} < w = {w}: integrand changes sign"
        )));
    }
    Ok(w.min(alpha))
}

/// `∫ (α + w t₁)⁻¹ dm` in closed form, `α ≥ w ≥ 0`, `α > 0`.
///
/// Evaluated as `2/(α + √(α² − w²))`, the cancellation-free form of
/// `2(α − √(α² − w²))/w²`; equals `1/α` at `w = 0` and `2/α` at `w = α`.
pub fn inverse_linear_integral(alpha: f64, w: f64) -> Result<f64> {
    let w = check_inverse_linear_domain(alpha, w)?;
    let disc = ((alpha - w) * (alpha + w)).max(0.0);
    Ok(2.0 / (alpha + disc.sqrt()))
}

/// The same integral by a one-dimensional rule.
pub fn inverse_linear_integral_quadrature(
    alpha: f64,
    w: f64,
    rule: &QuadratureRule1D,
) -> Result<f64> {
    let w = check_inverse_linear_domain(alpha, w)?;
    Ok(rule.integrate(|t| 1.0 / (alpha + w * t)))
}

/// An angle node handed to tensor-product integrands, with its sine and
/// cosine precomputed.
#[derive(Clone, Copy, Debug)]
pub struct AngleNode {
    pub angle: f64,
    pub sin: f64,
    pub cos: f64,
}

fn angle_nodes(n: usize, upper: f64) -> Vec<(AngleNode, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(w.iter())
        .map(|(&xk, &wk)| {
            let angle = 0.5 * upper * (xk + 1.0);
            (
                AngleNode {
                    angle,
                    sin: angle.sin(),
                    cos: angle.cos(),
                },
                0.5 * upper * wk,
            )
        })
        .collect()
}

/// `(2π²)⁻¹ ∫₀^π ∫₀^π ∫₀^{2π} F(x, y, z) dz dy dx` by a tensor Gauss–Legendre
/// rule with `resolution` nodes per axis. `F` must include the Jacobian
/// `sin²x sin y`.
pub fn spherical_triple_integral<F>(resolution: usize, integrand: F) -> f64
where
    F: Fn(&AngleNode, &AngleNode, &AngleNode) -> f64,
{
    let xs = angle_nodes(resolution, PI);
    let zs = angle_nodes(resolution, 2.0 * PI);
    let mut total = 0.0;
    for (x, wx) in &xs {
        let mut plane = 0.0;
        for (y, wy) in &xs {
            let mut line = 0.0;
            for (z, wz) in &zs {
                line += wz * integrand(x, y, z);
            }
            plane += wy * line;
        }
        total += wx * plane;
    }
    total / (2.0 * PI * PI)
}

/// The iterated integral of `sin²x sin y / (1 + cos x)`, whose value is
/// `∫ 1/(1+t₁) dm = 2`.
pub fn inverse_t1_triple_integral(resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(Error::domain("resolution must be at least 2"));
    }
    Ok(spherical_triple_integral(resolution, |x, y, _z| {
        x.sin * x.sin * y.sin / (1.0 + x.cos)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub sample_count: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(sample_count: usize, seed: u64) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::domain("sample_count must be at least 1"));
        }
        Ok(McConfig { sample_count, seed })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Samples per independent generator stream. Stream `j` covers samples
/// `j·CHUNK .. (j+1)·CHUNK`, so chunks can be evaluated in any order.
const MC_CHUNK: usize = 1 << 16;

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

/// Uniform points on S³: normalized standard Gaussian 4-vectors.
pub fn sphere_point<R: rand::Rng>(rng: &mut R) -> [f64; 4] {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let r = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.0 {
            return g.map(|x| x / r);
        }
    }
}

/// Generator for chunk `stream` of a seeded sample sequence.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo estimate of `∫ h dm` with its standard error.
pub fn mc_integral<H>(h: H, cfg: &McConfig) -> Result<McEstimate>
where
    H: Fn(&[f64; 4]) -> f64,
{
    if cfg.sample_count == 0 {
        return Err(Error::domain("sample_count must be at least 1"));
    }
    let chunks = cfg.sample_count.div_ceil(MC_CHUNK);
    let mut total = Moments::default();
    for j in 0..chunks {
        let count = MC_CHUNK.min(cfg.sample_count - j * MC_CHUNK);
        let mut rng = substream(cfg.seed, j as u64);
        let mut acc = Moments::default();
        for _ in 0..count {
            let z = sphere_point(&mut rng);
            let v = h(&z);
            if !v.is_finite() {
                return Err(Error::domain(format!(
                    "integrand is {v} at ({}, {}, {}, {})",
                    z[0], z[1], z[2], z[3]
                )));
            }
            acc.push(v);
        }
        total = total.merge(acc);
    }
    let n = total.n;
    let std_error = if n > 1.0 {
        (total.m2 / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: total.mean,
        std_error,
        samples: cfg.sample_count,
    })
}
