//! Command dispatch and report serialization for the `opsys` binary.
//!
//! Reports are JSON objects with the fields `command`, `params`, `results`,
//! `pass`, `runtime_ms` and `version`. Floats are written with 17
//! significant digits, so identical configurations give identical bytes.
//! `runtime_ms` is `null` unless timing is requested.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::identity_checks::{boundary_norms, defect_check, lemma3_chain, rank_one_sweep};
use crate::numerical_range::{
    ball_margin_report, sweep_max_support, write_sweep_csv, Lemma, SupportSample, SweepConfig,
    DEFAULT_BUDGET, DEFAULT_REFINE, DEFAULT_REFINE_STARTS,
};
use crate::operator_models::{build_tuple, TupleVariant};
use crate::poly_basis::build_basis;
use crate::positivity::{is_admissible, limiting_threshold, threshold_bisection, AffineFunction};
use crate::sphere_measure::{
    exact_moment, inverse_linear_integral, inverse_linear_integral_quadrature,
    inverse_t1_triple_integral, mc_integral, moment_f64, McConfig, MomentKey, QuadratureRule1D,
    DEFAULT_QUADRATURE_NODES,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_DEGREE: usize = 6;
pub const DEFAULT_THRESHOLD_DEGREE: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_TRIPLE_RESOLUTION: usize = 400;

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::usage(format!(
                        "unknown {} {s:?}; expected one of {}",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }
    };
}

string_enum!(Command {
    Moments => "moments",
    Integral => "integral",
    Lemma0 => "lemma0",
    Lemma1 => "lemma1",
    Lemma2 => "lemma2",
    Identities => "identities",
    BoundaryNorm => "boundary-norm",
    Threshold => "threshold",
    Sweep => "sweep",
});

string_enum!(Format {
    Json => "json",
    Csv => "csv",
});

string_enum!(IntegralMethod {
    ClosedForm => "closed-form",
    Quadrature => "quadrature",
    Triple => "triple",
    MonteCarlo => "monte-carlo",
    All => "all",
});

string_enum!(TupleKind {
    Plain => "plain",
    Coupled => "coupled",
    Tilde => "tilde",
});

/// Everything a command needs. `None` fields take per-command defaults,
/// which are filled in by [`RunConfig::resolved`] and echoed in the report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub degree: Option<usize>,
    pub c: Option<f64>,
    pub budget: usize,
    pub refine: usize,
    pub seed: u64,
    pub tol: f64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub override_range: bool,
    pub method: IntegralMethod,
    pub tuple: TupleKind,
    pub samples: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c_lo: Option<f64>,
    pub c_hi: Option<f64>,
    #[serde(skip)]
    pub timing: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            degree: None,
            c: None,
            budget: DEFAULT_BUDGET,
            refine: DEFAULT_REFINE,
            seed: DEFAULT_SEED,
            tol: DEFAULT_TOL,
            format: Format::Json,
            out: None,
            override_range: false,
            method: IntegralMethod::All,
            tuple: TupleKind::Plain,
            samples: DEFAULT_MC_SAMPLES,
            alpha: 1.0,
            beta: 1.0,
            c_lo: None,
            c_hi: None,
            timing: false,
        }
    }

    fn default_c(&self) -> Option<f64> {
        match self.command {
            Command::Lemma1 => Some(0.49),
            Command::Lemma2 => Some(0.9),
            Command::Identities | Command::BoundaryNorm => Some(0.5),
            Command::Sweep => match self.tuple {
                TupleKind::Plain => None,
                TupleKind::Coupled => Some(0.49),
                TupleKind::Tilde => Some(0.9),
            },
            _ => None,
        }
    }

    /// Defaults filled in and flags checked; failures are usage errors.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut cfg = self.clone();
        if cfg.degree.is_none() {
            cfg.degree = Some(match cfg.command {
                Command::Threshold => DEFAULT_THRESHOLD_DEGREE,
                _ => DEFAULT_DEGREE,
            });
        }
        if cfg.c.is_none() {
            cfg.c = cfg.default_c();
        }
        if let Some(c) = cfg.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::usage(format!("--c must be positive, got {c}")));
            }
        }
        if cfg.budget == 0 {
            return Err(Error::usage("--budget must be at least 1"));
        }
        if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
            return Err(Error::usage(format!(
                "--tol must be positive, got {}",
                cfg.tol
            )));
        }
        if cfg.samples == 0 {
            return Err(Error::usage("--samples must be at least 1"));
        }
        let csv_ok = matches!(
            cfg.command,
            Command::Sweep | Command::Lemma0 | Command::Lemma1 | Command::Lemma2
        );
        if cfg.format == Format::Csv && !csv_ok {
            return Err(Error::usage(format!("{} has no CSV output", cfg.command)));
        }
        if matches!(cfg.command, Command::Identities | Command::BoundaryNorm)
            && cfg.degree == Some(0)
        {
            return Err(Error::usage(format!("{} needs --degree >= 1", cfg.command)));
        }
        if cfg.command == Command::Threshold {
            let f = cfg.affine();
            if !(f.alpha > 0.0 && is_admissible(&f)) {
                return Err(Error::usage(format!(
                    "need alpha > 0 and alpha >= |beta|, got alpha = {}, beta = {}",
                    cfg.alpha, cfg.beta
                )));
            }
        }
        if !cfg.override_range {
            if let Some(lemma) = cfg.lemma() {
                lemma.check_range()?;
            }
        }
        Ok(cfg)
    }

    fn degree_or_default(&self) -> usize {
        self.degree.unwrap_or(DEFAULT_DEGREE)
    }

    fn affine(&self) -> AffineFunction {
        AffineFunction::new(self.alpha, [self.beta, 0.0, 0.0, 0.0])
    }

    fn lemma(&self) -> Option<Lemma> {
        let c = self.c.unwrap_or(f64::NAN);
        match self.command {
            Command::Lemma0 => Some(Lemma::Lemma0),
            Command::Lemma1 => Some(Lemma::Lemma1 { c }),
            Command::Lemma2 => Some(Lemma::Lemma2 { c }),
            _ => None,
        }
    }

    fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            budget: self.budget,
            refine: self.refine,
            refine_starts: DEFAULT_REFINE_STARTS,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: Command,
    pub params: Value,
    pub results: Value,
    pub pass: bool,
    pub runtime_ms: Option<u64>,
    pub version: String,
    /// Per-sample records backing the CSV output.
    #[serde(skip)]
    pub samples: Option<(usize, Vec<SupportSample>)>,
}

struct Outcome {
    results: Value,
    pass: bool,
    samples: Option<(usize, Vec<SupportSample>)>,
}

impl Outcome {
    fn json(results: Value, pass: bool) -> Self {
        Outcome {
            results,
            pass,
            samples: None,
        }
    }
}

pub fn run_command(cfg: &RunConfig) -> Result<Report> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let outcome = match cfg.command {
        Command::Moments => run_moments(&cfg)?,
        Command::Integral => run_integral(&cfg)?,
        Command::Lemma0 | Command::Lemma1 | Command::Lemma2 => run_lemma(&cfg)?,
        Command::Identities => run_identities(&cfg)?,
        Command::BoundaryNorm => run_boundary_norm(&cfg)?,
        Command::Threshold => run_threshold(&cfg)?,
        Command::Sweep => run_sweep(&cfg)?,
    };
    let runtime_ms = cfg.timing.then(|| start.elapsed().as_millis() as u64);
    Ok(Report {
        command: cfg.command,
        params: serde_json::to_value(&cfg)?,
        results: outcome.results,
        pass: outcome.pass,
        runtime_ms,
        version: VERSION.to_string(),
        samples: outcome.samples,
    })
}

/// All multi-indices with `|a| ≤ n`, lexicographic.
fn multi_indices(n: u32) -> Vec<MomentKey> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                for d in 0..=n - a - b - c {
                    out.push(MomentKey::new(a, b, c, d));
                }
            }
        }
    }
    out
}

fn run_moments(cfg: &RunConfig) -> Result<Outcome> {
    let n = cfg.degree_or_default() as u32;
    let keys = multi_indices(n);
    let moments: Vec<Value> = keys
        .iter()
        .map(|&k| {
            json!({
                "index": k.to_string(),
                "exact": exact_moment(k).to_string(),
                "value": moment_f64(k),
            })
        })
        .collect();
    // Σᵢ ∫ tᵢ² t^a dm = ∫ t^a dm, checked in exact arithmetic.
    let mut checked = 0;
    let mut failures = Vec::new();
    for &k in keys.iter().filter(|k| k.degree() + 2 <= n) {
        let sum = (1..=4)
            .map(|i| {
                let mut a = k.0;
                a[i - 1] += 2;
                exact_moment(MomentKey(a))
            })
            .fold(BigRational::zero(), |acc, m| acc + m);
        checked += 1;
        if sum != exact_moment(k) {
            failures.push(k.to_string());
        }
    }
    let pass = failures.is_empty();
    Ok(Outcome::json(
        json!({
            "moments": moments,
            "sphere_relations_checked": checked,
            "sphere_relation_failures": failures,
        }),
        pass,
    ))
}

fn run_integral(cfg: &RunConfig) -> Result<Outcome> {
    const TARGET: f64 = 2.0;
    let want = |m: IntegralMethod| cfg.method == IntegralMethod::All || cfg.method == m;
    let mut rows = Vec::new();
    let mut pass = true;
    let mut push = |method: IntegralMethod, value: f64, tolerance: f64, extra: Value| {
        let error = (value - TARGET).abs();
        let ok = error <= tolerance;
        pass &= ok;
        let mut row = json!({
            "method": method.as_str(),
            "value": value,
            "error": error,
            "tolerance": tolerance,
            "passed": ok,
        });
        if let (Value::Object(row), Value::Object(extra)) = (&mut row, extra) {
            row.extend(extra);
        }
        rows.push(row);
    };
    if want(IntegralMethod::ClosedForm) {
        push(
            IntegralMethod::ClosedForm,
            inverse_linear_integral(1.0, 1.0)?,
            1e-12,
            json!({}),
        );
    }
    if want(IntegralMethod::Quadrature) {
        let rule = QuadratureRule1D::angular_gauss_legendre(DEFAULT_QUADRATURE_NODES);
        let v = inverse_linear_integral_quadrature(1.0, 1.0, &rule)?;
        push(
            IntegralMethod::Quadrature,
            v,
            1e-10,
            json!({ "nodes": DEFAULT_QUADRATURE_NODES }),
        );
    }
    if want(IntegralMethod::Triple) {
        let v = inverse_t1_triple_integral(DEFAULT_TRIPLE_RESOLUTION)?;
        push(
            IntegralMethod::Triple,
            v,
            1e-8,
            json!({ "resolution": DEFAULT_TRIPLE_RESOLUTION }),
        );
    }
    if want(IntegralMethod::MonteCarlo) {
        let mc = mc_integral(
            |z| 1.0 / (1.0 + z[0]),
            &McConfig::new(cfg.samples, cfg.seed)?,
        )?;
        push(
            IntegralMethod::MonteCarlo,
            mc.estimate,
            4.0 * mc.std_error,
            json!({ "std_error": mc.std_error, "samples": mc.samples, "seed": cfg.seed }),
        );
    }
    Ok(Outcome::json(
        json!({ "target": TARGET, "integrals": rows }),
        pass,
    ))
}

fn run_lemma(cfg: &RunConfig) -> Result<Outcome> {
    let lemma = cfg.lemma().expect("lemma command");
    let basis = build_basis(cfg.degree_or_default())?;
    let report = ball_margin_report(lemma, &basis, &cfg.sweep_config(), cfg.override_range)?;
    let contained = report.range.max_support <= 1.0 + cfg.tol;
    let audit_ok = report.audit.chain_violations == 0
        && (lemma != Lemma::Lemma0 || report.audit.bound_violations == 0);
    let arity = report.range.argmax_direction.arity();
    let mut results = serde_json::to_value(&report)?;
    results["contained"] = Value::Bool(contained);
    results["gram_residual"] = json!(basis.gram_residual());
    Ok(Outcome {
        results,
        pass: contained && audit_ok,
        samples: Some((arity, report.records)),
    })
}

fn run_identities(cfg: &RunConfig) -> Result<Outcome> {
    let c = cfg.c.expect("resolved coupling");
    let basis = build_basis(cfg.degree_or_default())?;
    let defect = defect_check(c, &basis)?;
    let chain = lemma3_chain(c, &basis)?;
    let max_degree = basis.degree_cap().min(3) as u32;
    let rank_one = rank_one_sweep(c, &basis, max_degree)?;
    let failures: Vec<&str> = rank_one
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.identity.as_str())
        .collect();
    let worst = rank_one.iter().fold(
        None::<&crate::identity_checks::IdentityReport>,
        |w, r| match w {
            Some(w) if w.residual >= r.residual => Some(w),
            _ => Some(r),
        },
    );
    let pass = defect.passed && chain.iter().all(|r| r.passed) && failures.is_empty();
    Ok(Outcome::json(
        json!({
            "defect": defect,
            "chain": chain,
            "rank_one": {
                "max_degree": max_degree,
                "pairs": rank_one.len(),
                "worst": worst,
                "failures": failures,
            },
        }),
        pass,
    ))
}

fn run_boundary_norm(cfg: &RunConfig) -> Result<Outcome> {
    let c = cfg.c.expect("resolved coupling");
    let basis = build_basis(cfg.degree_or_default())?;
    let norms = boundary_norms(c, &basis)?;
    let tilde_closed = (1.0 + c * c + (1.0 - c * c + c.powi(4)).sqrt()) / 2.0;
    let hermitian_closed = 1.0 + c * c;
    let mut pass = (norms.norm_plain - 1.0).abs() <= 1e-13
        && norms.norm_tilde > 1.0
        && norms.norm_hermitian > 1.0;
    // The small-matrix reductions need the degree-one coordinate below the top grade.
    let reductions_apply = basis.degree_cap() >= 2;
    if reductions_apply {
        pass &= (norms.norm_tilde - tilde_closed).abs() <= 1e-10
            && (norms.norm_hermitian - hermitian_closed).abs() <= 1e-10;
    }
    let mut results = serde_json::to_value(norms)?;
    results["closed_form_tilde"] = json!(tilde_closed);
    results["closed_form_hermitian"] = json!(hermitian_closed);
    results["closed_forms_checked"] = json!(reductions_apply);
    Ok(Outcome::json(results, pass))
}

fn run_threshold(cfg: &RunConfig) -> Result<Outcome> {
    let f = cfg.affine();
    let limit = limiting_threshold(&f)?;
    let scale = f.alpha / f.beta().abs().max(f64::MIN_POSITIVE);
    let c_lo = cfg.c_lo.unwrap_or_else(|| limit.map_or(0.5, |l| 0.5 * l));
    let c_hi = cfg.c_hi.unwrap_or(2.0 * scale + 1.0);
    let basis = build_basis(cfg.degree_or_default())?;
    let report = threshold_bisection(&f, &basis, c_lo, c_hi, cfg.tol)?;
    let pass = limit.is_none_or(|l| report.c_star >= l - cfg.tol);
    let mut results = serde_json::to_value(&report)?;
    results["c_lo"] = json!(c_lo);
    results["c_hi"] = json!(c_hi);
    Ok(Outcome::json(results, pass))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let basis = build_basis(cfg.degree_or_default())?;
    let variant = match (cfg.tuple, cfg.c) {
        (TupleKind::Plain, _) => TupleVariant::Plain,
        (TupleKind::Coupled, Some(c)) => TupleVariant::Coupled(c),
        (TupleKind::Tilde, Some(c)) => TupleVariant::Tilde(c),
        (_, None) => return Err(Error::usage("--c is required for coupled tuples")),
    };
    let tuple = build_tuple(&basis, variant)?;
    let sweep = sweep_max_support(&tuple, &cfg.sweep_config())?;
    let pass = sweep.report.max_support <= 1.0 + cfg.tol;
    Ok(Outcome {
        results: serde_json::to_value(&sweep.report)?,
        pass,
        samples: Some((tuple.arity(), sweep.records)),
    })
}

/// JSON formatter writing every float with 17 significant digits.
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

pub fn report_json(report: &Report) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
    report.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn emit_report<W: Write>(report: &Report, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => out.write_all(&report_json(report)?)?,
        Format::Csv => {
            let (arity, records) = report
                .samples
                .as_ref()
                .ok_or_else(|| Error::usage(format!("{} has no CSV output", report.command)))?;
            write_sweep_csv(records, *arity, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}
