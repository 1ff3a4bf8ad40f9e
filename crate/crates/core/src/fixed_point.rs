//! The fixed-point load-flow iteration
//!
//! ```text
//! v(k+1) = w + Y_LL^-1 diag(conj(v(k)))^-1 conj(s)
//! ```
//!
//! which in normalized coordinates `u = W^-1 v` reads
//! `u(k+1) = 1 + K diag(conj(u(k)))^-1 conj(s)`. Steps are measured in the
//! weighted norm `||x||_{W,inf} = ||W^-1 x||_inf`, the metric in which the
//! certified contraction holds.

use num_complex::Complex64;
use thiserror::Error;

use crate::certificate::{KernelMatrix, SolutionBall, CONTAINMENT_SLACK};
use crate::lu::{LuError, LuFactors};
use crate::zero_load::{weighted_inf_norm, ZeroLoadProfile};

/// Voltages below this magnitude abort the iteration.
pub const VOLTAGE_FLOOR: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Solve(#[from] LuError),
    #[error("voltage collapse at load bus {bus}: |v| = {magnitude:e} p.u.")]
    VoltageCollapse { bus: usize, magnitude: f64 },
    #[error("no convergence after {} iterations (last step {:e})", .0.iterations, .0.final_step)]
    NonConvergence(Box<SolveResult>),
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub v: Vec<Complex64>,
    /// Applications of the fixed-point map.
    pub iterations: usize,
    /// `||v(k+1) - v(k)||_{W,inf}` of the last step.
    pub final_step: f64,
    /// `||v - G(v)||_{W,inf}` at the returned iterate.
    pub residual: f64,
    /// `||v - G(v)||_inf` at the returned iterate.
    pub residual_inf: f64,
    pub step_history: Vec<f64>,
    /// Whether the run was launched under a passing certificate.
    pub certified: bool,
    /// Containment in the certified domain; `None` for uncertified runs.
    pub contained_in_d: Option<bool>,
}

/// The map `G` bound to one factorization and zero-load profile.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointSolver<'a> {
    factors: &'a LuFactors,
    w: &'a ZeroLoadProfile,
}

impl<'a> FixedPointSolver<'a> {
    pub fn new(factors: &'a LuFactors, w: &'a ZeroLoadProfile) -> Self {
        assert_eq!(factors.n(), w.len(), "factors and profile disagree on size");
        FixedPointSolver { factors, w }
    }

    fn check_len(&self, got: usize) -> Result<(), SolveError> {
        if got != self.w.len() {
            return Err(SolveError::DimensionMismatch {
                expected: self.w.len(),
                got,
            });
        }
        Ok(())
    }

    /// One application of `G`.
    pub fn iterate_once(
        &self,
        s: &[Complex64],
        v: &[Complex64],
    ) -> Result<Vec<Complex64>, SolveError> {
        self.check_len(s.len())?;
        self.check_len(v.len())?;
        let mut rhs = Vec::with_capacity(v.len());
        for (bus, (si, vi)) in s.iter().zip(v).enumerate() {
            let magnitude = vi.norm();
            if !(magnitude > VOLTAGE_FLOOR) {
                return Err(SolveError::VoltageCollapse { bus, magnitude });
            }
            rhs.push(si.conj() / vi.conj());
        }
        let mut x = self.factors.solve(&rhs)?;
        for (xi, wi) in x.iter_mut().zip(self.w.as_slice()) {
            *xi += wi;
        }
        Ok(x)
    }

    /// Iterates from `v0` until the weighted step drops below `opts.tol`.
    pub fn solve(
        &self,
        s: &[Complex64],
        v0: &[Complex64],
        opts: &SolveOptions,
    ) -> Result<SolveResult, SolveError> {
        self.check_len(v0.len())?;
        let mut v = v0.to_vec();
        let mut history = Vec::new();
        let mut step = f64::INFINITY;
        for _ in 0..opts.max_iter {
            let next = self.iterate_once(s, &v)?;
            step = weighted_step(&next, &v, self.w);
            history.push(step);
            v = next;
            if step < opts.tol {
                return self.finish(s, v, history, step);
            }
            if !step.is_finite() {
                break;
            }
        }
        let result = self.finish(s, v, history, step)?;
        Err(SolveError::NonConvergence(Box::new(result)))
    }

    /// Like [`solve`](Self::solve), then checks the solution against the
    /// certified domain.
    pub fn solve_certified(
        &self,
        s: &[Complex64],
        v0: &[Complex64],
        opts: &SolveOptions,
        domain: &SolutionBall,
    ) -> Result<SolveResult, SolveError> {
        let mut result = self.solve(s, v0, opts)?;
        result.certified = true;
        result.contained_in_d = Some(verify_containment(&result, domain));
        Ok(result)
    }

    fn finish(
        &self,
        s: &[Complex64],
        v: Vec<Complex64>,
        history: Vec<f64>,
        step: f64,
    ) -> Result<SolveResult, SolveError> {
        let (residual, residual_inf) = match self.iterate_once(s, &v) {
            Ok(g) => {
                let diff: Vec<Complex64> = v.iter().zip(&g).map(|(a, b)| a - b).collect();
                (
                    weighted_inf_norm(&diff, self.w),
                    diff.iter().map(|d| d.norm()).fold(0.0, f64::max),
                )
            }
            Err(SolveError::VoltageCollapse { .. }) => (f64::INFINITY, f64::INFINITY),
            Err(e) => return Err(e),
        };
        Ok(SolveResult {
            v,
            iterations: history.len(),
            final_step: step,
            residual,
            residual_inf,
            step_history: history,
            certified: false,
            contained_in_d: None,
        })
    }
}

fn weighted_step(next: &[Complex64], prev: &[Complex64], w: &ZeroLoadProfile) -> f64 {
    next.iter()
        .zip(prev)
        .zip(w.as_slice())
        .map(|((a, b), wi)| (a - b).norm() / wi.norm())
        .fold(0.0, f64::max)
}

/// `|v_i - v_hat_i| <= rho |w_i|` for every bus, up to [`CONTAINMENT_SLACK`].
pub fn verify_containment(result: &SolveResult, domain: &SolutionBall) -> bool {
    domain.contains_with_slack(&result.v, CONTAINMENT_SLACK)
}

/// The normalized map `u -> 1 + K diag(conj(u))^-1 conj(s)`.
pub fn normalized_map(kernel: &KernelMatrix, s: &[Complex64], u: &[Complex64]) -> Vec<Complex64> {
    let x: Vec<Complex64> = s.iter().zip(u).map(|(s, u)| s.conj() / u.conj()).collect();
    kernel
        .mul_vec(&x)
        .into_iter()
        .map(|y| y + Complex64::new(1.0, 0.0))
        .collect()
}

/// Iterates the normalized map from `u0`; returns the fixed point and the
/// number of iterations, or `None` without convergence.
pub fn solve_normalized(
    kernel: &KernelMatrix,
    s: &[Complex64],
    u0: &[Complex64],
    opts: &SolveOptions,
) -> Option<(Vec<Complex64>, usize)> {
    let mut u = u0.to_vec();
    for k in 1..=opts.max_iter {
        if u.iter().any(|x| !(x.norm() > VOLTAGE_FLOOR)) {
            return None;
        }
        let next = normalized_map(kernel, s, &u);
        let step = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        u = next;
        if step < opts.tol {
            return Some((u, k));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CscMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_setup(y: Complex64) -> (LuFactors, ZeroLoadProfile) {
        let f = LuFactors::factorize(&CscMatrix::from_dense(&[vec![y]])).unwrap();
        (f, ZeroLoadProfile::from_vec(vec![c(1.0, 0.0)]).unwrap())
    }

    #[test]
    fn zero_load_returns_w() {
        let (f, w) = scalar_setup(c(1.0, -5.0));
        let g = FixedPointSolver::new(&f, &w);
        assert_eq!(
            g.iterate_once(&[c(0.0, 0.0)], &[c(0.7, 0.3)]).unwrap(),
            w.as_slice()
        );
        let r = g
            .solve(&[c(0.0, 0.0)], w.as_slice(), &SolveOptions::default())
            .unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.v, w.as_slice());
        assert!(!r.certified && r.contained_in_d.is_none());
    }

    #[test]
    fn single_step_by_hand() {
        let y = c(1.0, -5.0);
        let s = c(0.1, 0.05);
        let (f, w) = scalar_setup(y);
        let g = FixedPointSolver::new(&f, &w);
        let next = g.iterate_once(&[s], &[c(1.0, 0.0)]).unwrap()[0];
        // 1 + conj(s)/y with y = 1 - 5j: conj(s) = 0.1 - 0.05j
        // (0.1 - 0.05j)(1 + 5j)/26 = (0.35 + 0.45j)/26
        let expected = c(1.0 + 0.35 / 26.0, 0.45 / 26.0);
        assert!((next - expected).norm() < 1e-15);
    }

    #[test]
    fn collapse_is_reported() {
        let (f, w) = scalar_setup(c(1.0, -5.0));
        let g = FixedPointSolver::new(&f, &w);
        assert!(matches!(
            g.iterate_once(&[c(0.1, 0.0)], &[c(0.0, 0.0)]),
            Err(SolveError::VoltageCollapse { bus: 0, .. })
        ));
    }

    #[test]
    fn non_convergence_keeps_last_iterate() {
        let (f, w) = scalar_setup(c(1.0, -5.0));
        let g = FixedPointSolver::new(&f, &w);
        let opts = SolveOptions {
            tol: 1e-30,
            max_iter: 3,
        };
        match g.solve(&[c(-0.3, -0.1)], w.as_slice(), &opts) {
            Err(SolveError::NonConvergence(r)) => {
                assert_eq!(r.iterations, 3);
                assert_eq!(r.step_history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_lengths() {
        let (f, w) = scalar_setup(c(1.0, -5.0));
        let g = FixedPointSolver::new(&f, &w);
        assert!(matches!(
            g.iterate_once(&[c(0.0, 0.0); 2], &[c(1.0, 0.0)]),
            Err(SolveError::DimensionMismatch { .. })
        ));
    }
}
