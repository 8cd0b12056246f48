use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use opsys_core::cli_report::{
    emit_report, run_command, Command, Format, IntegralMethod, RunConfig, TupleKind,
};
use opsys_core::Error;

/// Run a verification suite and print its report.
#[derive(Parser, Debug)]
#[command(name = "opsys", version)]
struct Cli {
    /// moments, integral, lemma0, lemma1, lemma2, identities, boundary-norm, threshold or sweep
    command: Command,
    /// Degree cap N of the polynomial basis [default: 6, threshold: 16]
    #[arg(long)]
    degree: Option<usize>,
    /// Coupling constant
    #[arg(long)]
    c: Option<f64>,
    /// Number of swept directions
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// Refinement steps per start
    #[arg(long, default_value_t = 50)]
    refine: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Containment tolerance, or bisection tolerance for threshold
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// json or csv (csv for sweep and lemma commands)
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run lemma commands with c outside the stated range
    #[arg(long)]
    override_range: bool,
    /// closed-form, quadrature, triple, monte-carlo or all
    #[arg(long, default_value = "all")]
    method: IntegralMethod,
    /// plain, coupled or tilde (sweep only)
    #[arg(long, default_value = "plain")]
    tuple: TupleKind,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Constant term of f = alpha + beta*t1 (threshold only)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
    /// Lower end of the bisection bracket
    #[arg(long)]
    c_lo: Option<f64>,
    /// Upper end of the bisection bracket
    #[arg(long)]
    c_hi: Option<f64>,
    /// Fill in runtime_ms (makes reports differ between runs)
    #[arg(long)]
    timing: bool,
}

impl Cli {
    fn into_config(self) -> RunConfig {
        RunConfig {
            degree: self.degree,
            c: self.c,
            budget: self.budget,
            refine: self.refine,
            seed: self.seed,
            tol: self.tol,
            format: self.format,
            out: self.out,
            override_range: self.override_range,
            method: self.method,
            tuple: self.tuple,
            samples: self.samples,
            alpha: self.alpha,
            beta: self.beta,
            c_lo: self.c_lo,
            c_hi: self.c_hi,
            timing: self.timing,
            ..RunConfig::new(self.command)
        }
    }
}

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Usage(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cfg = Cli::parse().into_config();
    let report = match run_command(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("opsys: {e}");
            return exit_code(&e);
        }
    };
    let written = match &cfg.out {
        Some(path) => File::create(path)
            .map_err(Error::from)
            .and_then(|f| emit_report(&report, cfg.format, BufWriter::new(f))),
        None => emit_report(&report, cfg.format, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("opsys: {e}");
        return ExitCode::from(1);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
