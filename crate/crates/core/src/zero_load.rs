//! Zero-load voltage profile `w` and the normalization `u = W^-1 v`.

use num_complex::Complex64;
use thiserror::Error;

use crate::admittance::AdmittanceSystem;
use crate::lu::{LuError, LuFactors};

/// Below this magnitude a zero-load voltage makes `W` numerically singular.
pub const W_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroLoadError {
    #[error(transparent)]
    Solve(#[from] LuError),
    #[error("zero-load voltage at load bus {bus} is {magnitude:e} p.u.; network is degenerate")]
    Degenerate { bus: usize, magnitude: f64 },
}

/// Load-bus voltages with every injection set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroLoadProfile {
    w: Vec<Complex64>,
}

impl ZeroLoadProfile {
    /// Wraps an explicit profile, checking the magnitude floor.
    pub fn from_vec(w: Vec<Complex64>) -> Result<Self, ZeroLoadError> {
        if let Some((bus, wi)) = w.iter().enumerate().find(|(_, wi)| !(wi.norm() >= W_FLOOR)) {
            return Err(ZeroLoadError::Degenerate {
                bus,
                magnitude: wi.norm(),
            });
        }
        Ok(ZeroLoadProfile { w })
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Solves `Y_LL w = -Y_L0 v0`.
pub fn compute_w(
    sys: &AdmittanceSystem,
    factors: &LuFactors,
) -> Result<ZeroLoadProfile, ZeroLoadError> {
    let rhs: Vec<Complex64> = sys.y_l0.iter().map(|y| -y * sys.slack_voltage).collect();
    ZeroLoadProfile::from_vec(factors.solve(&rhs)?)
}

/// `u_i = v_i / w_i`.
pub fn normalize(v: &[Complex64], w: &ZeroLoadProfile) -> Vec<Complex64> {
    assert_eq!(v.len(), w.len(), "voltage vector length");
    v.iter().zip(&w.w).map(|(v, w)| v / w).collect()
}

/// `v_i = w_i u_i`.
pub fn denormalize(u: &[Complex64], w: &ZeroLoadProfile) -> Vec<Complex64> {
    assert_eq!(u.len(), w.len(), "voltage vector length");
    u.iter().zip(&w.w).map(|(u, w)| u * w).collect()
}

/// `min_j |v_hat_j / w_j|`.
pub fn u_min(v_hat: &[Complex64], w: &ZeroLoadProfile) -> f64 {
    assert_eq!(v_hat.len(), w.len(), "voltage vector length");
    v_hat
        .iter()
        .zip(&w.w)
        .map(|(v, w)| (v / w).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Weighted norm `||W^-1 x||_inf`.
pub fn weighted_inf_norm(x: &[Complex64], w: &ZeroLoadProfile) -> f64 {
    x.iter()
        .zip(&w.w)
        .map(|(x, w)| x.norm() / w.norm())
        .fold(0.0, f64::max)
}
