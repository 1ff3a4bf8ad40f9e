//! One network ready for numerical work.

use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::admittance::{build_admittance, AdmittanceSystem};
use crate::certificate::{
    build_kernel_with_cap, certify, corollary_ball, solution_ball, CertificateError,
    CertificateReport, KernelMatrix, PNorm, SolutionBall, DEFAULT_KERNEL_CAP, OPERATING_POINT_TOL,
};
use crate::fixed_point::{FixedPointSolver, SolveError, SolveOptions, SolveResult};
use crate::lu::{LuError, LuFactors};
use crate::network::{parse_network, NetworkDescription, NetworkError, OperatingPoint};
use crate::zero_load::{compute_w, ZeroLoadError, ZeroLoadProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("Y_LL factorization failed: {0}")]
    Factorization(#[from] LuError),
    #[error(transparent)]
    ZeroLoad(#[from] ZeroLoadError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Network, admittance system, factorization and zero-load profile. The
/// dense kernel is built on first use.
#[derive(Debug)]
pub struct LoadFlowCase {
    net: NetworkDescription,
    sys: AdmittanceSystem,
    factors: LuFactors,
    w: ZeroLoadProfile,
    kernel: OnceLock<KernelMatrix>,
    kernel_cap: usize,
}

impl LoadFlowCase {
    pub fn new(net: NetworkDescription) -> Result<Self, CaseError> {
        let sys = build_admittance(&net);
        let factors = LuFactors::factorize(&sys.y_ll)?;
        let w = compute_w(&sys, &factors)?;
        Ok(LoadFlowCase {
            net,
            sys,
            factors,
            w,
            kernel: OnceLock::new(),
            kernel_cap: DEFAULT_KERNEL_CAP,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CaseError> {
        Self::new(parse_network(text)?)
    }

    /// Overrides the largest `N` for which the dense kernel may be formed.
    pub fn with_kernel_cap(mut self, cap: usize) -> Self {
        self.kernel_cap = cap;
        self
    }

    pub fn network(&self) -> &NetworkDescription {
        &self.net
    }

    pub fn system(&self) -> &AdmittanceSystem {
        &self.sys
    }

    pub fn factors(&self) -> &LuFactors {
        &self.factors
    }

    pub fn zero_load(&self) -> &ZeroLoadProfile {
        &self.w
    }

    pub fn load_count(&self) -> usize {
        self.w.len()
    }

    pub fn kernel(&self) -> Result<&KernelMatrix, CaseError> {
        if let Some(k) = self.kernel.get() {
            return Ok(k);
        }
        let k = build_kernel_with_cap(&self.factors, &self.w, self.kernel_cap)?;
        Ok(self.kernel.get_or_init(|| k))
    }

    pub fn solver(&self) -> FixedPointSolver<'_> {
        FixedPointSolver::new(&self.factors, &self.w)
    }

    /// `||v - G(v)||_inf` for the pair `(v, s)`.
    pub fn fixed_point_residual(&self, v: &[Complex64], s: &[Complex64]) -> Result<f64, CaseError> {
        let g = self.solver().iterate_once(s, v)?;
        Ok(v.iter()
            .zip(&g)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Rejects pairs that do not solve the load-flow equations. Only enforced
    /// in debug builds; release builds trust the caller.
    pub fn check_operating_point(&self, op: &OperatingPoint) -> Result<(), CaseError> {
        if cfg!(debug_assertions) {
            let r = self.fixed_point_residual(&op.v, op.s.as_slice())?;
            if !(r <= OPERATING_POINT_TOL) {
                return Err(CertificateError::NotASolution(r).into());
            }
        }
        Ok(())
    }

    /// Every condition set for target `s`; the known-point conditions are
    /// included when `known` is given.
    pub fn certify(
        &self,
        s: &[Complex64],
        known: Option<&OperatingPoint>,
        p_set: &[PNorm],
    ) -> Result<CertificateReport, CaseError> {
        if let Some(op) = known {
            self.check_operating_point(op)?;
        }
        let kernel = self.kernel()?;
        Ok(certify(
            kernel,
            &self.w,
            s,
            known.map(|op| (op.v.as_slice(), op.s.as_slice())),
            p_set,
        )?)
    }

    /// The certified domain from `report`: the known-point ball when that
    /// condition passed, else the zero-load ball when that passed.
    pub fn certified_domain(
        &self,
        report: &CertificateReport,
        known: Option<&OperatingPoint>,
    ) -> Option<SolutionBall> {
        if let (Some(check), Some(op)) = (&report.theorem, known) {
            if let Ok(ball) = solution_ball(check, &op.v, &self.w) {
                return Some(ball);
            }
        }
        corollary_ball(&report.corollary, &self.w).ok()
    }

    /// Fixed-point solve from `w`, checked against `domain` when given.
    pub fn solve(
        &self,
        s: &[Complex64],
        opts: &SolveOptions,
        domain: Option<&SolutionBall>,
    ) -> Result<SolveResult, SolveError> {
        let solver = self.solver();
        match domain {
            Some(d) => solver.solve_certified(s, self.w.as_slice(), opts, d),
            None => solver.solve(s, self.w.as_slice(), opts),
        }
    }
}
