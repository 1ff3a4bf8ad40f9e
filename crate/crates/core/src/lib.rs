//! Load-flow solvability certificates for distribution networks.
//!
//! A [`LoadFlowCase`] bundles a parsed network with its admittance system,
//! sparse factorization and zero-load profile. From there:
//!
//! - [`certificate`] evaluates the solvability conditions and the certified
//!   solution ball,
//! - [`fixed_point`] runs the fixed-point iteration,
//! - [`newton`] provides an independent Newton-Raphson cross-check,
//! - [`continuation`] maps the conditions along a loading ray.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admittance;
pub mod case;
pub mod certificate;
pub mod cli;
pub mod continuation;
pub mod fixed_point;
pub mod lu;
pub mod network;
pub mod newton;
pub mod report;
pub mod sparse;
pub mod zero_load;

pub use admittance::{build_admittance, AdmittanceSystem};
pub use case::{CaseError, LoadFlowCase};
pub use certificate::{
    build_kernel, certify, check_corollary, check_prior_conditions, check_theorem,
    CertificateError, CertificateReport, CorollaryCheck, KernelMatrix, PNorm, PriorCheck,
    SolutionBall, TheoremCheck,
};
pub use continuation::{sweep, SweepOptions, SweepRay, SweepResult};
pub use fixed_point::{FixedPointSolver, SolveError, SolveOptions, SolveResult};
pub use lu::{LuError, LuFactors};
pub use network::{
    parse_injections, parse_network, parse_operating_point, Bases, Branch, BranchKind, Bus,
    BusKind, InjectionVector, NetworkDescription, NetworkError, OperatingPoint, Provenance,
};
pub use newton::{solve_newton, NewtonError, NewtonOptions, NewtonResult};
pub use sparse::CscMatrix;
pub use zero_load::{compute_w, ZeroLoadError, ZeroLoadProfile};
