//! Loading sweeps along a fixed injection direction.
//!
//! The injection is scaled as `s(kappa) = kappa * d` with `d = s_hat / ||s_hat||_1`,
//! so `kappa = sum_i |s_i|` is the total apparent power. At every grid point
//! each condition set is evaluated; the transition points are then refined by
//! bisection.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::{CertificateError, CorollaryCheck, KernelMatrix, PNorm, TheoremCheck};
use crate::fixed_point::{FixedPointSolver, SolveOptions};
use crate::zero_load::{u_min, ZeroLoadProfile};

pub const DEFAULT_STEPS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("predicate has the same value at both ends of [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("sweep needs at least 2 grid points and a positive kappa_max")]
    InvalidGrid,
    #[error("injection direction is zero")]
    ZeroDirection,
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

/// Bisects a monotone predicate between `lo` and `hi` until the bracket is
/// narrower than `tol`; returns the bracket midpoint.
pub fn bisect_boundary(
    condition: impl Fn(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, ContinuationError> {
    let at_lo = condition(lo);
    if at_lo == condition(hi) {
        return Err(ContinuationError::InvalidBracket { lo, hi });
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if condition(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub kappa_max: f64,
    pub steps: usize,
    /// Defaults to `1e-6 * kappa_max`.
    pub bisection_tol: Option<f64>,
    pub p_set: Vec<PNorm>,
    /// When set, the fixed-point solver is run from `w` at every grid point.
    pub solve: Option<SolveOptions>,
}

impl SweepOptions {
    pub fn new(kappa_max: f64) -> Self {
        SweepOptions {
            kappa_max,
            steps: DEFAULT_STEPS,
            bisection_tol: None,
            p_set: PNorm::ALL.to_vec(),
            solve: None,
        }
    }
}

/// The ray the sweep scales along.
#[derive(Debug, Clone, Copy)]
pub enum SweepRay<'a> {
    /// Any injection profile; only the state-free conditions are evaluated.
    Direction(&'a [Complex64]),
    /// A known solution pair; the ray passes through `s_hat` and the
    /// state-dependent conditions are evaluated too.
    KnownState {
        v_hat: &'a [Complex64],
        s_hat: &'a [Complex64],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepBoundaries {
    pub corollary: Option<f64>,
    pub improved: Option<f64>,
    pub prior: Option<f64>,
    pub theorem_lower: Option<f64>,
    pub theorem_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kappa_grid: Vec<f64>,
    pub theorem: Option<Vec<bool>>,
    pub corollary: Vec<bool>,
    pub improved: Vec<bool>,
    pub prior: Vec<bool>,
    pub fp_converged: Option<Vec<bool>>,
    pub boundaries: SweepBoundaries,
    /// Unit-1-norm direction `d`.
    pub direction: Vec<Complex64>,
    /// `||s_hat||_1` of the known state, if any.
    pub kappa_hat: Option<f64>,
}

/// Per-kappa condition evaluation with kappa-independent parts precomputed.
struct ConditionEval {
    direction: Vec<Complex64>,
    /// `sum_j |K_ij| |d_j|` per row.
    weighted_rows: Vec<f64>,
    bolognani_rows: Vec<(PNorm, f64)>,
    improved_rows: Vec<(PNorm, f64)>,
    col_max: Vec<f64>,
    theorem: Option<(f64, f64, f64)>, // (kappa_hat, xi(s_hat), u_min)
}

impl ConditionEval {
    fn xi(&self, kappa: f64) -> f64 {
        self.weighted_rows
            .iter()
            .map(|r| kappa * r)
            .fold(0.0, f64::max)
    }

    fn corollary(&self, kappa: f64) -> bool {
        CorollaryCheck::from_xi(self.xi(kappa)).ok
    }

    fn prior(&self, kappa: f64) -> bool {
        self.bolognani_rows.iter().any(|&(p, rows)| {
            rows * p
                .dual()
                .norm(self.direction.iter().map(|d| (kappa * d).norm()))
                < 0.25
        })
    }

    /// Either `Lambda = I` (the prior condition) or the column-scaled `Lambda` passes.
    fn improved(&self, kappa: f64) -> bool {
        self.prior(kappa)
            || self.improved_rows.iter().any(|&(p, rows)| {
                let scaled = self
                    .direction
                    .iter()
                    .zip(&self.col_max)
                    .map(|(d, m)| (kappa * d).norm() * m);
                rows * p.dual().norm(scaled) < 0.25
            })
    }

    fn theorem(&self, kappa: f64) -> Option<bool> {
        self.theorem.map(|(kappa_hat, xi_hat, umin)| {
            TheoremCheck::from_scalars(xi_hat, self.xi((kappa - kappa_hat).abs()), umin).ok
        })
    }
}

pub fn sweep(
    kernel: &KernelMatrix,
    w: &ZeroLoadProfile,
    solver: Option<&FixedPointSolver<'_>>,
    ray: SweepRay<'_>,
    opts: &SweepOptions,
) -> Result<SweepResult, ContinuationError> {
    if opts.steps < 2 || !(opts.kappa_max > 0.0) {
        return Err(ContinuationError::InvalidGrid);
    }
    let n = kernel.n();
    let (direction, known) = match ray {
        SweepRay::Direction(d) => (d, None),
        SweepRay::KnownState { v_hat, s_hat } => (s_hat, Some((v_hat, s_hat))),
    };
    for len in [Some(direction.len()), known.map(|k| k.0.len())]
        .into_iter()
        .flatten()
    {
        if len != n {
            return Err(CertificateError::DimensionMismatch {
                expected: n,
                got: len,
            }
            .into());
        }
    }
    let norm1: f64 = direction.iter().map(|z| z.norm()).sum();
    if !(norm1 > 0.0) {
        return Err(ContinuationError::ZeroDirection);
    }
    let d: Vec<Complex64> = direction.iter().map(|z| z / norm1).collect();
    let d_mag: Vec<f64> = d.iter().map(|z| z.norm()).collect();
    let col_max = kernel.column_max();
    let lambda: Vec<f64> = col_max.iter().map(|m| 1.0 / m).collect();

    let theorem = known.map(|(v_hat, s_hat)| (norm1, kernel.xi(s_hat), u_min(v_hat, w)));
    let eval = ConditionEval {
        weighted_rows: (0..n)
            .map(|i| {
                kernel
                    .abs_row(i)
                    .iter()
                    .zip(&d_mag)
                    .map(|(a, m)| a * m)
                    .sum()
            })
            .collect(),
        bolognani_rows: opts
            .p_set
            .iter()
            .map(|&p| (p, kernel.row_norm_max(p, None)))
            .collect(),
        improved_rows: opts
            .p_set
            .iter()
            .map(|&p| (p, kernel.row_norm_max(p, Some(&lambda))))
            .collect(),
        col_max,
        direction: d.clone(),
        theorem,
    };

    let kappa_grid: Vec<f64> = (0..opts.steps)
        .map(|i| opts.kappa_max * i as f64 / (opts.steps - 1) as f64)
        .collect();
    let corollary: Vec<bool> = kappa_grid.iter().map(|&k| eval.corollary(k)).collect();
    let improved: Vec<bool> = kappa_grid.iter().map(|&k| eval.improved(k)).collect();
    let prior: Vec<bool> = kappa_grid.iter().map(|&k| eval.prior(k)).collect();
    let theorem_mask: Option<Vec<bool>> = eval.theorem.map(|_| {
        kappa_grid
            .iter()
            .map(|&k| eval.theorem(k) == Some(true))
            .collect()
    });

    let fp_converged = match (solver, &opts.solve) {
        (Some(solver), Some(solve_opts)) => Some(
            kappa_grid
                .par_iter()
                .map(|&kappa| {
                    let s: Vec<Complex64> = d.iter().map(|z| z * kappa).collect();
                    solver.solve(&s, w.as_slice(), solve_opts).is_ok()
                })
                .collect(),
        ),
        _ => None,
    };

    let tol = opts.bisection_tol.unwrap_or(1e-6 * opts.kappa_max);
    let upper_edge = |f: &dyn Fn(f64) -> bool| -> Result<Option<f64>, ContinuationError> {
        if f(0.0) && !f(opts.kappa_max) {
            Ok(Some(bisect_boundary(f, 0.0, opts.kappa_max, tol)?))
        } else {
            Ok(None)
        }
    };
    let mut boundaries = SweepBoundaries {
        corollary: upper_edge(&|k| eval.corollary(k))?,
        improved: upper_edge(&|k| eval.improved(k))?,
        prior: upper_edge(&|k| eval.prior(k))?,
        ..Default::default()
    };
    if let Some((kappa_hat, _, _)) = eval.theorem {
        let holds = |k: f64| eval.theorem(k) == Some(true);
        if holds(kappa_hat) {
            if !holds(0.0) {
                boundaries.theorem_lower = Some(bisect_boundary(holds, 0.0, kappa_hat, tol)?);
            }
            if kappa_hat < opts.kappa_max && !holds(opts.kappa_max) {
                boundaries.theorem_upper =
                    Some(bisect_boundary(holds, kappa_hat, opts.kappa_max, tol)?);
            }
        }
    }

    Ok(SweepResult {
        kappa_grid,
        theorem: theorem_mask,
        corollary,
        improved,
        prior,
        fp_converged,
        boundaries,
        direction: d,
        kappa_hat: theorem.map(|t| t.0),
    })
}

/// True if `mask` is a run of `true` followed only by `false`.
pub fn is_prefix_true(mask: &[bool]) -> bool {
    mask.windows(2).all(|w| w[0] || !w[1])
}

/// Pointwise `inner => outer`.
pub fn is_nested(inner: &[bool], outer: &[bool]) -> bool {
    inner.len() == outer.len() && inner.iter().zip(outer).all(|(&i, &o)| !i || o)
}
