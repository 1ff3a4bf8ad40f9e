//! Newton-Raphson load flow in rectangular coordinates, used to cross-check
//! fixed-point solutions.
//!
//! Unknowns are `x = [Re v; Im v]`, residuals `F = [Re m; Im m]` with the
//! power mismatch `m_j = s_j - v_j conj((Y_LL v + Y_L0 v0)_j)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::admittance::AdmittanceSystem;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("no convergence after {iterations} iterations (mismatch {mismatch:e})")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub v: Vec<Complex64>,
    pub iterations: usize,
    /// `||m||_inf` at `v`.
    pub mismatch: f64,
}

/// `m_j = s_j - v_j conj(i_j)` with `i = Y_LL v + Y_L0 v0`.
pub fn power_mismatch(sys: &AdmittanceSystem, v: &[Complex64], s: &[Complex64]) -> Vec<Complex64> {
    sys.load_currents(v)
        .iter()
        .zip(v)
        .zip(s)
        .map(|((i, v), s)| s - v * i.conj())
        .collect()
}

fn inf_norm(m: &[Complex64]) -> f64 {
    m.iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max)
}

/// Real `2N x 2N` Jacobian of `[Re m; Im m]` with respect to `[Re v; Im v]`.
pub fn jacobian(sys: &AdmittanceSystem, v: &[Complex64]) -> DMatrix<f64> {
    let n = sys.n();
    let currents = sys.load_currents(v);
    let i_unit = Complex64::new(0.0, 1.0);
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    let mut add = |j: usize, k: usize, d_re: Complex64, d_im: Complex64| {
        jac[(j, k)] += d_re.re;
        jac[(n + j, k)] += d_re.im;
        jac[(j, n + k)] += d_im.re;
        jac[(n + j, n + k)] += d_im.im;
    };
    for (j, k, y) in sys.y_ll.iter() {
        // d m_j / d Re v_k = -v_j conj(Y_jk),  d m_j / d Im v_k = i v_j conj(Y_jk)
        let t = v[j] * y.conj();
        add(j, k, -t, i_unit * t);
    }
    for (j, current) in currents.iter().enumerate() {
        let ic = current.conj();
        add(j, j, -ic, -i_unit * ic);
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: DEFAULT_NEWTON_TOL,
            max_iter: DEFAULT_NEWTON_MAX_ITER,
        }
    }
}

pub fn solve_newton(
    sys: &AdmittanceSystem,
    s: &[Complex64],
    v0: &[Complex64],
    opts: &NewtonOptions,
) -> Result<NewtonResult, NewtonError> {
    let n = sys.n();
    for len in [s.len(), v0.len()] {
        if len != n {
            return Err(NewtonError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let mut v = v0.to_vec();
    let mut m = power_mismatch(sys, &v, s);
    let mut mismatch = inf_norm(&m);
    for iteration in 0..=opts.max_iter {
        if mismatch < opts.tol {
            return Ok(NewtonResult {
                v,
                iterations: iteration,
                mismatch,
            });
        }
        if iteration == opts.max_iter || !mismatch.is_finite() {
            break;
        }
        let rhs = DVector::from_iterator(
            2 * n,
            m.iter().map(|z| -z.re).chain(m.iter().map(|z| -z.im)),
        );
        let dx = jacobian(sys, &v)
            .lu()
            .solve(&rhs)
            .ok_or(NewtonError::SingularJacobian(iteration))?;
        for (k, vk) in v.iter_mut().enumerate() {
            *vk += Complex64::new(dx[k], dx[n + k]);
        }
        m = power_mismatch(sys, &v, s);
        mismatch = inf_norm(&m);
    }
    Err(NewtonError::NonConvergence {
        iterations: opts.max_iter,
        mismatch,
    })
}
