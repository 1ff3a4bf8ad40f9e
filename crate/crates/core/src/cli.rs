//! Command-line front end.
//!
//! Exit codes: 0 pass/converged, 1 requested condition failed, 2 input
//! error, 3 fixed-point non-convergence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use crate::case::{CaseError, LoadFlowCase};
use crate::certificate::{CertificateError, PNorm};
use crate::continuation::{sweep, ContinuationError, SweepOptions, SweepRay, DEFAULT_STEPS};
use crate::fixed_point::{SolveError, SolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::network::{
    parse_injections, parse_network, parse_operating_point, NetworkError, OperatingPoint,
};
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "loadcert",
    version,
    about = "Load-flow solvability certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the solvability conditions for the given injections
    Check(RunConfig),
    /// Run the fixed-point load flow
    Solve(RunConfig),
    /// Map the conditions along the injection ray
    Sweep(RunConfig),
    /// Write the admittance matrix in coordinate form
    DumpMatrix(RunConfig),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunConfig {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub injections: Option<PathBuf>,
    #[arg(long)]
    pub operating_point: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Sweep range in MVA; defaults to twice the total apparent injection
    #[arg(long)]
    pub kappa_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: NetworkError },
    #[error("--injections is required for this subcommand")]
    MissingInjections,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Case(#[from] CaseError),
}

impl From<CertificateError> for InputError {
    fn from(e: CertificateError) -> Self {
        InputError::Case(e.into())
    }
}

impl From<ContinuationError> for InputError {
    fn from(e: ContinuationError) -> Self {
        InputError::Invalid(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), InputError> {
    fs::write(path, text).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything read from disk, parsed before any numeric work starts.
struct Inputs {
    case: LoadFlowCase,
    injections: Option<Vec<Complex64>>,
    operating_point: Option<OperatingPoint>,
}

impl Inputs {
    fn load(config: &RunConfig) -> Result<Self, InputError> {
        let parse_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| InputError::Parse { path, source }
        };
        let net = parse_network(&read(&config.network)?).map_err(parse_err(&config.network))?;
        let injections = match &config.injections {
            Some(p) => Some(parse_injections(&read(p)?, &net).map_err(parse_err(p))?.0),
            None => None,
        };
        let operating_point = match &config.operating_point {
            Some(p) => Some(parse_operating_point(&read(p)?, &net).map_err(parse_err(p))?),
            None => None,
        };
        if !(config.tol > 0.0) || config.max_iter == 0 {
            return Err(InputError::Invalid(
                "--tol must be positive and --max-iter nonzero".into(),
            ));
        }
        Ok(Inputs {
            case: LoadFlowCase::new(net)?,
            injections,
            operating_point,
        })
    }

    fn injections(&self) -> Result<&[Complex64], InputError> {
        self.injections
            .as_deref()
            .ok_or(InputError::MissingInjections)
    }
}

/// Exit 0 if the requested conditions pass: the known-point conditions when
/// an operating point is given, the zero-load condition otherwise.
pub fn run_check(config: &RunConfig) -> Result<i32, InputError> {
    let inputs = Inputs::load(config)?;
    let s = inputs.injections()?;
    let op = inputs.operating_point.as_ref();
    let rep = inputs.case.certify(s, op, &PNorm::ALL)?;
    write(
        &config.out,
        &report::check_report(inputs.case.network(), &rep),
    )?;
    let pass = match &rep.theorem {
        Some(t) => t.ok,
        None => rep.corollary.ok,
    };
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

pub fn run_solve(config: &RunConfig) -> Result<i32, InputError> {
    let inputs = Inputs::load(config)?;
    let case = &inputs.case;
    let s = inputs.injections()?;
    let op = inputs.operating_point.as_ref();
    let domain = match case.certify(s, op, &PNorm::ALL) {
        Ok(rep) => case.certified_domain(&rep, op),
        Err(CaseError::Certificate(CertificateError::KernelTooLarge { .. })) => None,
        Err(e) => return Err(e.into()),
    };
    let opts = SolveOptions {
        tol: config.tol,
        max_iter: config.max_iter,
    };
    let (result, converged) = match case.solve(s, &opts, domain.as_ref()) {
        Ok(r) => (r, true),
        Err(SolveError::NonConvergence(r)) => (*r, false),
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(EXIT_NO_CONVERGENCE);
        }
    };
    write(
        &config.out,
        &report::solve_report(case.network(), s, &result, converged, domain.as_ref()),
    )?;
    if !converged {
        eprintln!(
            "no convergence after {} iterations (last step {:e})",
            result.iterations, result.final_step
        );
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(EXIT_OK)
}

pub fn run_sweep(config: &RunConfig) -> Result<i32, InputError> {
    let inputs = Inputs::load(config)?;
    let case = &inputs.case;
    let base = case.network().bases().power_mva;
    let ray = match &inputs.operating_point {
        Some(op) => {
            case.check_operating_point(op)?;
            SweepRay::KnownState {
                v_hat: &op.v,
                s_hat: op.s.as_slice(),
            }
        }
        None => SweepRay::Direction(inputs.injections()?),
    };
    let direction = match ray {
        SweepRay::Direction(d) => d,
        SweepRay::KnownState { s_hat, .. } => s_hat,
    };
    let kappa_max_pu = match config.kappa_max {
        Some(k) => k / base,
        None => 2.0 * direction.iter().map(|z| z.norm()).sum::<f64>(),
    };
    let mut opts = SweepOptions::new(kappa_max_pu);
    opts.steps = config.steps;
    opts.solve = Some(SolveOptions {
        tol: config.tol,
        max_iter: config.max_iter,
    });
    let solver = case.solver();
    let result = sweep(case.kernel()?, case.zero_load(), Some(&solver), ray, &opts)?;
    write(&config.out, &report::sweep_csv(&result, base))?;
    Ok(EXIT_OK)
}

pub fn run_dump_matrix(config: &RunConfig) -> Result<i32, InputError> {
    let net = parse_network(&read(&config.network)?).map_err(|source| InputError::Parse {
        path: config.network.clone(),
        source,
    })?;
    let sys = crate::admittance::build_admittance(&net);
    write(&config.out, &report::dump_matrix(&sys))?;
    Ok(EXIT_OK)
}

/// Runs one subcommand and maps input errors to exit code 2.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Check(c) => run_check(c),
        Command::Solve(c) => run_solve(c),
        Command::Sweep(c) => run_sweep(c),
        Command::DumpMatrix(c) => run_dump_matrix(c),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
