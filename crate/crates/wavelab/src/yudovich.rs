//! Exponent bookkeeping and the Yudovich-style continuation argument.
//!
//! Once the remainder energy grows at most like `λ0 exp(λ0 t + 4 C λ0 √(q t))`
//! in the `L^q` scale, an admissible existence time `t*(q) = α q` follows from
//! solving `α + 4C √α = (q0/β_p - 1) log(λ0) / λ0`.  Everything here is scalar
//! arithmetic, kept separate from the spectral machinery so the growth
//! envelopes can be tabulated cheaply.

use serde::Serialize;

use crate::error::{Error, Result};

/// Critical Sobolev index `s_p = (p-3)/(p-1)` attached to the nonlinearity.
pub fn critical_index(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p must be finite and > 1, got {p}")));
    }
    Ok((p - 3.0) / (p - 1.0))
}

/// Bootstrap integrability exponent `β_p = 3(p-1)/(5-p)`, finite for `p < 5`.
pub fn bootstrap_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p must be finite and > 1, got {p}")));
    }
    if p >= 5.0 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap exponent diverges at p = 5 and beyond, got {p}"
        )));
    }
    Ok(3.0 * (p - 1.0) / (5.0 - p))
}

/// Hölder ladder exponent `q_k = (p+1)/k` for splitting the potential term.
pub fn holder_ladder(p: f64, k: u32) -> Result<f64> {
    if !(p > 1.0) || k == 0 {
        return Err(Error::InvalidArgument(format!("need p > 1 and k >= 1, got p={p}, k={k}")));
    }
    Ok((p + 1.0) / k as f64)
}

/// Companion integrability exponent `r_p` with
/// `1/r_p = 1/2 - (p - α_p - 1)/(p+1)`; infinite when the defect vanishes.
pub fn companion_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p must be finite and > 1, got {p}")));
    }
    let alpha = (((p - 3.0) / 2.0).ceil()).max(0.0);
    let inv = 0.5 - (p - alpha - 1.0) / (p + 1.0);
    if inv < -1e-15 {
        return Err(Error::InvalidArgument(format!("companion exponent is negative for p = {p}")));
    }
    if inv.abs() < 1e-15 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / inv)
    }
}

/// Calibrated continuation parameters.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct YudovichParams {
    pub p: f64,
    pub s_p: f64,
    pub beta_p: f64,
    /// Base growth rate, must exceed 1 so the log-gain is positive.
    pub lambda0: f64,
    /// Constant in front of the `√(qt)` term of the envelope.
    pub big_c: f64,
    /// Starting integrability, must exceed `β_p`.
    pub q0: f64,
    /// Slope of the admissible time, solved from the defining equation.
    pub alpha: f64,
}

impl YudovichParams {
    pub fn new(p: f64, lambda0: f64, big_c: f64, q0: f64) -> Result<Self> {
        if !(p > 3.0 && p < 5.0) {
            return Err(Error::InvalidArgument(format!(
                "the continuation argument covers 3 < p < 5, got {p}"
            )));
        }
        if !(lambda0 > 1.0) || !lambda0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "growth base λ0 must exceed 1 for a positive log-gain, got {lambda0}"
            )));
        }
        if !(big_c > 0.0) || !big_c.is_finite() {
            return Err(Error::InvalidArgument(format!("envelope constant must be positive, got {big_c}")));
        }
        let s_p = critical_index(p)?;
        let beta_p = bootstrap_exponent(p)?;
        if !(q0 > beta_p) {
            return Err(Error::InvalidArgument(format!(
                "starting integrability q0 = {q0} must exceed β_p = {beta_p}"
            )));
        }
        let target = (q0 / beta_p - 1.0) * lambda0.ln() / lambda0;
        let alpha = solve_alpha(big_c, target);
        Ok(Self { p, s_p, beta_p, lambda0, big_c, q0, alpha })
    }

    /// Growth envelope `λ0 exp(λ0 t + 4 C λ0 √(q t))`.
    pub fn envelope(&self, q: f64, t: f64) -> Result<f64> {
        if !(q > 0.0) || !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("envelope needs q > 0, t >= 0, got q={q}, t={t}")));
        }
        Ok(self.lambda0 * (self.lambda0 * t + 4.0 * self.big_c * self.lambda0 * (q * t).sqrt()).exp())
    }

    /// Admissible existence time `t*(q) = α q`, defined for `q >= q0`.
    pub fn admissible_time(&self, q: f64) -> Result<f64> {
        if q < self.q0 {
            return Err(Error::InvalidArgument(format!(
                "admissible time is defined for q >= q0 = {}, got {q}",
                self.q0
            )));
        }
        Ok(self.alpha * q)
    }
}

/// Solve `α + 4C √α = target` for the unique nonnegative root by bisection.
/// The left side is strictly increasing, zero at zero, and at least `target`
/// at `α = target`, so the root lives in `[0, target]`.
fn solve_alpha(big_c: f64, target: f64) -> f64 {
    debug_assert!(target >= 0.0);
    let g = |a: f64| a + 4.0 * big_c * a.sqrt();
    let (mut lo, mut hi) = (0.0f64, target.max(f64::MIN_POSITIVE));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
