//! Existence and uniqueness certificates for the load-flow solution.
//!
//! Everything is expressed through the kernel `K = W^-1 Y_LL^-1 conj(W)^-1`
//! and the loading measure
//!
//! ```text
//! xi(s) = || K diag(conj(s)) ||_inf = max_i sum_j |K_ij| |s_j|
//! ```
//!
//! Given a known solution pair `(v_hat, s_hat)` and a target injection `s`,
//! with `u_min = min_j |v_hat_j / w_j|` and `a = u_min - xi(s_hat)/u_min`:
//!
//! * `xi(s_hat) < u_min^2` and `delta = a^2 - 4 xi(s - s_hat) > 0` certify a
//!   unique solution with `|v_i - v_hat_i| <= rho |w_i|`, `rho = (a - sqrt(delta))/2`;
//! * with no known state, `(w, 0)` is a solution pair and the test reduces to
//!   `xi(s) < 1/4`, `rho = (1 - sqrt(1 - 4 xi(s)))/2`.
//!
//! The two earlier sufficient conditions `||K||*_p ||s||_q < 1/4` and its
//! column-scaled variant are evaluated for comparison.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::lu::{LuError, LuFactors};
use crate::network::{BranchKind, NetworkDescription};
use crate::zero_load::ZeroLoadProfile;

/// Largest bus count for which the dense kernel is materialised by default.
pub const DEFAULT_KERNEL_CAP: usize = 5_000;

/// Slack allowed by containment checks on top of `rho |w_i|`.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

/// Tolerance on the fixed-point residual of a supplied operating point.
pub const OPERATING_POINT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("kernel for {n} buses exceeds the cap of {cap}")]
    KernelTooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Solve(#[from] LuError),
    #[error("condition set failed; no certified domain")]
    ConditionFailed,
    #[error("unsupported norm exponent p = {0}; expected 1, 2 or infinity")]
    InvalidP(f64),
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("leaf-row reduction does not apply: {0}")]
    LeafReductionInapplicable(&'static str),
    #[error("operating point is not a load-flow solution (residual {0:e})")]
    NotASolution(f64),
}

/// Dense `K = W^-1 Y_LL^-1 conj(W)^-1` with cached magnitudes.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    k: Vec<Complex64>,
    abs: Vec<f64>,
    row_abs: Vec<f64>,
}

/// Builds the kernel from `N` solves against identity columns.
pub fn build_kernel(
    factors: &LuFactors,
    w: &ZeroLoadProfile,
) -> Result<KernelMatrix, CertificateError> {
    build_kernel_with_cap(factors, w, DEFAULT_KERNEL_CAP)
}

pub fn build_kernel_with_cap(
    factors: &LuFactors,
    w: &ZeroLoadProfile,
    cap: usize,
) -> Result<KernelMatrix, CertificateError> {
    let n = factors.n();
    if n > cap {
        return Err(CertificateError::KernelTooLarge { n, cap });
    }
    check_len(w.len(), n)?;
    let w = w.as_slice();
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            factors.solve(&e)
        })
        .collect::<Result<_, _>>()?;
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in columns.iter().enumerate() {
        let wj = w[j].conj();
        for (i, z) in col.iter().enumerate() {
            k[i * n + j] = z / (w[i] * wj);
        }
    }
    Ok(KernelMatrix::from_row_major(n, k))
}

impl KernelMatrix {
    /// Wraps a row-major `n x n` matrix.
    pub fn from_row_major(n: usize, k: Vec<Complex64>) -> Self {
        assert_eq!(k.len(), n * n);
        let abs: Vec<f64> = k.iter().map(|z| z.norm()).collect();
        let row_abs = abs
            .chunks(n.max(1))
            .map(|r| r.iter().sum())
            .take(n)
            .collect();
        KernelMatrix { n, k, abs, row_abs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.k[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.k[i * self.n..(i + 1) * self.n]
    }

    pub fn abs_row(&self, i: usize) -> &[f64] {
        &self.abs[i * self.n..(i + 1) * self.n]
    }

    /// `sum_j |K_ij|` per row.
    pub fn row_abs(&self) -> &[f64] {
        &self.row_abs
    }

    /// `K x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(k, x)| k * x).sum())
            .collect()
    }

    /// `xi(s) = max_i sum_j |K_ij| |s_j|`.
    pub fn xi(&self, s: &[Complex64]) -> f64 {
        assert_eq!(s.len(), self.n, "injection vector length");
        let mags: Vec<f64> = s.iter().map(|z| z.norm()).collect();
        (0..self.n)
            .map(|i| {
                self.abs_row(i)
                    .iter()
                    .zip(&mags)
                    .map(|(a, m)| a * m)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `max_h |K_hk|` per column; the reciprocal is the suggested scaling `Lambda_k`.
    pub fn column_max(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.n];
        for i in 0..self.n {
            for (mk, a) in m.iter_mut().zip(self.abs_row(i)) {
                *mk = mk.max(*a);
            }
        }
        m
    }

    /// `||A||*_p = max_h ||A_h||_p` with `A = K diag(scale)`.
    pub fn row_norm_max(&self, p: PNorm, scale: Option<&[f64]>) -> f64 {
        (0..self.n)
            .map(|i| match scale {
                None => p.norm(self.abs_row(i).iter().copied()),
                Some(sc) => p.norm(self.abs_row(i).iter().zip(sc).map(|(a, s)| a * s)),
            })
            .fold(0.0, f64::max)
    }
}

/// Rows of the kernel restricted to leaf buses of a radial feeder.
///
/// On a tree of lines with nonnegative series reactance and no shunts, entry
/// `(i, j)` of `Y_LL^-1` is the sum of series impedances on the common part of
/// the paths from the slack to `i` and `j`. These impedances share a quadrant,
/// so a leaf row dominates the rows of all its ancestors entrywise in
/// magnitude and `xi` only needs the leaf rows.
#[derive(Debug, Clone)]
pub struct LeafKernel {
    n: usize,
    leaves: Vec<usize>,
    abs: Vec<f64>,
}

impl LeafKernel {
    pub fn build(
        net: &NetworkDescription,
        factors: &LuFactors,
        w: &ZeroLoadProfile,
    ) -> Result<Self, CertificateError> {
        if !net.is_radial() {
            return Err(CertificateError::LeafReductionInapplicable(
                "network is meshed",
            ));
        }
        if net
            .branches()
            .iter()
            .any(|b| b.kind == BranchKind::Transformer)
        {
            return Err(CertificateError::LeafReductionInapplicable(
                "network has transformers",
            ));
        }
        if net
            .buses()
            .iter()
            .any(|b| b.shunt != Complex64::new(0.0, 0.0))
        {
            return Err(CertificateError::LeafReductionInapplicable(
                "network has shunts",
            ));
        }
        if net.branches().iter().any(|b| b.admittance.im > 0.0) {
            return Err(CertificateError::LeafReductionInapplicable(
                "a line has capacitive series reactance",
            ));
        }
        let n = factors.n();
        check_len(w.len(), n)?;
        let w = w.as_slice();
        let leaves = net.leaf_loads();
        let mut abs = Vec::with_capacity(leaves.len() * n);
        for &leaf in &leaves {
            // Y_LL is symmetric here, so row `leaf` of the inverse is column `leaf`
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[leaf] = Complex64::new(1.0, 0.0);
            let col = factors.solve(&e)?;
            abs.extend(
                col.iter()
                    .enumerate()
                    .map(|(j, z)| (z / (w[leaf] * w[j].conj())).norm()),
            );
        }
        Ok(LeafKernel { n, leaves, abs })
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn xi(&self, s: &[Complex64]) -> f64 {
        assert_eq!(s.len(), self.n, "injection vector length");
        let mags: Vec<f64> = s.iter().map(|z| z.norm()).collect();
        self.abs
            .chunks(self.n)
            .map(|row| row.iter().zip(&mags).map(|(a, m)| a * m).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Vector norm exponents used by the comparison conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PNorm {
    One,
    Two,
    Infinity,
}

impl PNorm {
    pub const ALL: [PNorm; 3] = [PNorm::One, PNorm::Two, PNorm::Infinity];

    pub fn from_exponent(p: f64) -> Result<PNorm, CertificateError> {
        if p == 1.0 {
            Ok(PNorm::One)
        } else if p == 2.0 {
            Ok(PNorm::Two)
        } else if p == f64::INFINITY {
            Ok(PNorm::Infinity)
        } else {
            Err(CertificateError::InvalidP(p))
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            PNorm::One => 1.0,
            PNorm::Two => 2.0,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    /// Hölder conjugate `q = p / (p - 1)`.
    pub fn dual(self) -> PNorm {
        match self {
            PNorm::One => PNorm::Infinity,
            PNorm::Two => PNorm::Two,
            PNorm::Infinity => PNorm::One,
        }
    }

    /// Norm of a vector of nonnegative magnitudes.
    pub fn norm(self, mags: impl Iterator<Item = f64>) -> f64 {
        match self {
            PNorm::One => mags.sum(),
            PNorm::Two => mags.map(|m| m * m).sum::<f64>().sqrt(),
            PNorm::Infinity => mags.fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::One => f.write_str("1"),
            PNorm::Two => f.write_str("2"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

/// Outcome of the known-operating-point conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheck {
    pub xi_s_hat: f64,
    pub xi_delta_s: f64,
    pub u_min: f64,
    pub delta: f64,
    /// Present iff `ok`.
    pub rho: Option<f64>,
    pub ok: bool,
}

impl TheoremCheck {
    pub fn from_scalars(xi_s_hat: f64, xi_delta_s: f64, u_min: f64) -> TheoremCheck {
        let a = u_min - xi_s_hat / u_min;
        let delta = a * a - 4.0 * xi_delta_s;
        let ok = xi_s_hat < u_min * u_min && delta > 0.0;
        TheoremCheck {
            xi_s_hat,
            xi_delta_s,
            u_min,
            delta,
            rho: ok.then(|| (a - delta.sqrt()) / 2.0),
            ok,
        }
    }
}

/// Outcome of the state-free condition `xi(s) < 1/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryCheck {
    pub xi_s: f64,
    /// Present iff `ok`.
    pub rho: Option<f64>,
    pub ok: bool,
}

impl CorollaryCheck {
    /// The theorem at `(v_hat, s_hat) = (w, 0)`, where `u_min = 1` and `xi(0) = 0`.
    pub fn from_xi(xi_s: f64) -> CorollaryCheck {
        let t = TheoremCheck::from_scalars(0.0, xi_s, 1.0);
        CorollaryCheck {
            xi_s,
            rho: t.rho,
            ok: t.ok,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorDetail {
    pub p: PNorm,
    /// `||K||*_p ||s||_q`
    pub bolognani_value: f64,
    /// `||K Lambda||*_p ||Lambda^-1 s||_q` with `Lambda_k = 1 / max_h |K_hk|`
    pub scaled_value: f64,
    /// The improved condition over `Lambda in {I, diag(1 / max_h |K_hk|)}`, i.e. the smaller
    /// of `bolognani_value` and `scaled_value`.
    pub improved_value: f64,
    pub bolognani_ok: bool,
    pub improved_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorCheck {
    pub detail: Vec<PriorDetail>,
    pub bolognani_ok: bool,
    pub improved_ok: bool,
}

impl PriorCheck {
    fn from_detail(detail: Vec<PriorDetail>) -> PriorCheck {
        PriorCheck {
            bolognani_ok: detail.iter().any(|d| d.bolognani_ok),
            improved_ok: detail.iter().any(|d| d.improved_ok),
            detail,
        }
    }

    /// Smallest comparison value over the evaluated exponents.
    pub fn best_bolognani(&self) -> f64 {
        self.detail
            .iter()
            .map(|d| d.bolognani_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn best_improved(&self) -> f64 {
        self.detail
            .iter()
            .map(|d| d.improved_value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// All condition sets for one target injection.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub theorem: Option<TheoremCheck>,
    pub corollary: CorollaryCheck,
    pub prior: PriorCheck,
}

fn check_len(got: usize, expected: usize) -> Result<(), CertificateError> {
    if got != expected {
        return Err(CertificateError::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub fn xi(kernel: &KernelMatrix, s: &[Complex64]) -> Result<f64, CertificateError> {
    check_len(s.len(), kernel.n())?;
    Ok(kernel.xi(s))
}

/// Evaluates the known-operating-point conditions for target `s`.
pub fn check_theorem(
    kernel: &KernelMatrix,
    u_min: f64,
    s_hat: &[Complex64],
    s: &[Complex64],
) -> Result<TheoremCheck, CertificateError> {
    check_len(s_hat.len(), kernel.n())?;
    check_len(s.len(), kernel.n())?;
    let diff: Vec<Complex64> = s.iter().zip(s_hat).map(|(a, b)| a - b).collect();
    Ok(TheoremCheck::from_scalars(
        kernel.xi(s_hat),
        kernel.xi(&diff),
        u_min,
    ))
}

pub fn check_corollary(
    kernel: &KernelMatrix,
    s: &[Complex64],
) -> Result<CorollaryCheck, CertificateError> {
    Ok(CorollaryCheck::from_xi(xi(kernel, s)?))
}

/// Comparison coefficients per exponent for `s`; all are positively
/// homogeneous of degree one in `s`.
pub fn check_prior_conditions(
    kernel: &KernelMatrix,
    s: &[Complex64],
    p_set: &[PNorm],
) -> Result<PriorCheck, CertificateError> {
    check_len(s.len(), kernel.n())?;
    let col_max = kernel.column_max();
    let lambda: Vec<f64> = col_max.iter().map(|m| 1.0 / m).collect();
    let detail = p_set
        .iter()
        .map(|&p| {
            let q = p.dual();
            let bolognani_value = kernel.row_norm_max(p, None) * q.norm(s.iter().map(|z| z.norm()));
            let scaled_value = kernel.row_norm_max(p, Some(&lambda))
                * q.norm(s.iter().zip(&col_max).map(|(z, m)| z.norm() * m));
            let improved_value = bolognani_value.min(scaled_value);
            PriorDetail {
                p,
                bolognani_value,
                scaled_value,
                improved_value,
                bolognani_ok: bolognani_value < 0.25,
                improved_ok: improved_value < 0.25,
            }
        })
        .collect();
    Ok(PriorCheck::from_detail(detail))
}

/// Like [`check_prior_conditions`] with exponents given as numbers.
pub fn check_prior_conditions_p(
    kernel: &KernelMatrix,
    s: &[Complex64],
    p_set: &[f64],
) -> Result<PriorCheck, CertificateError> {
    let p_set: Vec<PNorm> = p_set
        .iter()
        .map(|&p| PNorm::from_exponent(p))
        .collect::<Result<_, _>>()?;
    check_prior_conditions(kernel, s, &p_set)
}

/// Runs every condition set. `known` is the solution pair `(v_hat, s_hat)`.
pub fn certify(
    kernel: &KernelMatrix,
    w: &ZeroLoadProfile,
    s: &[Complex64],
    known: Option<(&[Complex64], &[Complex64])>,
    p_set: &[PNorm],
) -> Result<CertificateReport, CertificateError> {
    let theorem = match known {
        Some((v_hat, s_hat)) => {
            check_len(v_hat.len(), kernel.n())?;
            Some(check_theorem(
                kernel,
                crate::zero_load::u_min(v_hat, w),
                s_hat,
                s,
            )?)
        }
        None => None,
    };
    Ok(CertificateReport {
        theorem,
        corollary: check_corollary(kernel, s)?,
        prior: check_prior_conditions(kernel, s, p_set)?,
    })
}

/// The certified domain `{v : |v_i - c_i| <= rho |w_i|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBall {
    center: Vec<Complex64>,
    radii: Vec<f64>,
    rho: f64,
}

impl SolutionBall {
    pub fn new(center: Vec<Complex64>, w: &ZeroLoadProfile, rho: f64) -> SolutionBall {
        assert_eq!(center.len(), w.len());
        let radii = w.as_slice().iter().map(|wi| rho * wi.norm()).collect();
        SolutionBall { center, radii, rho }
    }

    pub fn center(&self) -> &[Complex64] {
        &self.center
    }

    /// Per-bus radius `rho |w_i|`.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn contains(&self, v: &[Complex64]) -> bool {
        self.contains_with_slack(v, 0.0)
    }

    pub fn contains_with_slack(&self, v: &[Complex64], slack: f64) -> bool {
        v.len() == self.center.len()
            && v.iter()
                .zip(&self.center)
                .zip(&self.radii)
                .all(|((v, c), r)| (v - c).norm() <= r + slack)
    }
}

/// Domain certified by the known-operating-point conditions, centred at `v_hat`.
pub fn solution_ball(
    check: &TheoremCheck,
    v_hat: &[Complex64],
    w: &ZeroLoadProfile,
) -> Result<SolutionBall, CertificateError> {
    match check.rho {
        Some(rho) if check.ok => {
            check_len(v_hat.len(), w.len())?;
            Ok(SolutionBall::new(v_hat.to_vec(), w, rho))
        }
        _ => Err(CertificateError::ConditionFailed),
    }
}

/// Domain certified by `xi(s) < 1/4`, centred at `w`.
pub fn corollary_ball(
    check: &CorollaryCheck,
    w: &ZeroLoadProfile,
) -> Result<SolutionBall, CertificateError> {
    match check.rho {
        Some(rho) if check.ok => Ok(SolutionBall::new(w.as_slice().to_vec(), w, rho)),
        _ => Err(CertificateError::ConditionFailed),
    }
}
