//! Scalar rate functions and closed-form optimizers.
//!
//! Every tail bound in [`crate::bounds`] is an exponential of one of these
//! rates. All functions are pure and evaluate in double precision with a
//! truncated Taylor series below `|x| < 1e-4` to avoid the catastrophic
//! cancellation of the direct `x - log(1+x)`-style subtractions near zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold below which the series expansions take over.
const SERIES_CUTOFF: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("{name} = {value} outside domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

fn domain(name: &'static str, value: f64, constraint: &'static str) -> RateError {
    RateError::Domain {
        name,
        value,
        constraint,
    }
}

/// Identifies one of the scalar rate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// `x - log(1+x)`, the exact upper-tail rate for `S_n/[S]_n`.
    HRate,
    /// `(1+x)log(1+x) - x`, the exact lower-tail rate for `S_n/<S>_n`.
    GRate,
    /// `lambda + log(1-lambda)`, exponent weight of the squared-variation
    /// supermartingale.
    Psi,
    /// `e^lambda - 1 - lambda`, exponent weight of the conditional-variance
    /// supermartingale.
    Phi,
    /// `x^2 / (2(1+x))`, quadratic relaxation of `HRate`.
    BernRate,
    /// `x^2 / (2(1+x/3))`, Bennett-style relaxation of `GRate`.
    BennRate,
    /// `x^2 / (1 + x/3 + sqrt(1+2x/3))`, the intermediate rate between
    /// `GRate` and `BennRate`.
    MidRate,
}

impl RateKind {
    pub fn eval(self, x: f64) -> Result<f64, RateError> {
        match self {
            RateKind::HRate => h_rate(x),
            RateKind::GRate => g_rate(x),
            RateKind::Psi => psi(x),
            RateKind::Phi => phi(x),
            RateKind::BernRate => bern_rate(x),
            RateKind::BennRate => benn_rate(x),
            RateKind::MidRate => mid_rate(x),
        }
    }
}

#[inline]
pub(crate) fn h_raw(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        // x^2/2 - x^3/3 + x^4/4
        x * x * (0.5 - x / 3.0 + x * x / 4.0)
    } else {
        x - x.ln_1p()
    }
}

#[inline]
pub(crate) fn g_raw(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        // x^2/2 - x^3/6 + x^4/12
        x * x * (0.5 - x / 6.0 + x * x / 12.0)
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

#[inline]
pub(crate) fn psi_raw(lambda: f64) -> f64 {
    if lambda.abs() < SERIES_CUTOFF {
        // -(l^2/2 + l^3/3 + l^4/4)
        -lambda * lambda * (0.5 + lambda / 3.0 + lambda * lambda / 4.0)
    } else {
        lambda + (-lambda).ln_1p()
    }
}

#[inline]
pub(crate) fn phi_raw(lambda: f64) -> f64 {
    if lambda.abs() < SERIES_CUTOFF {
        // l^2/2 + l^3/6 + l^4/24
        lambda * lambda * (0.5 + lambda / 6.0 + lambda * lambda / 24.0)
    } else {
        lambda.exp_m1() - lambda
    }
}

#[inline]
pub(crate) fn bern_raw(x: f64) -> f64 {
    x * x / (2.0 * (1.0 + x))
}

#[inline]
pub(crate) fn benn_raw(x: f64) -> f64 {
    x * x / (2.0 * (1.0 + x / 3.0))
}

#[inline]
pub(crate) fn mid_raw(x: f64) -> f64 {
    x * x / (1.0 + x / 3.0 + (1.0 + 2.0 * x / 3.0).sqrt())
}

/// `x - log(1+x)` for `x > -1`.
pub fn h_rate(x: f64) -> Result<f64, RateError> {
    if !(x > -1.0) {
        return Err(domain("x", x, "x > -1"));
    }
    Ok(h_raw(x))
}

/// `(1+x)log(1+x) - x` for `x > -1`.
pub fn g_rate(x: f64) -> Result<f64, RateError> {
    if !(x > -1.0) {
        return Err(domain("x", x, "x > -1"));
    }
    Ok(g_raw(x))
}

/// `lambda + log(1-lambda)` for `lambda` in `[0, 1)`. Nonpositive on its
/// domain; the boundary `lambda -> 1` is a domain error rather than `-inf`.
pub fn psi(lambda: f64) -> Result<f64, RateError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain("lambda", lambda, "0 <= lambda < 1"));
    }
    Ok(psi_raw(lambda))
}

/// `e^lambda - 1 - lambda` for `lambda >= 0`.
pub fn phi(lambda: f64) -> Result<f64, RateError> {
    if !(lambda >= 0.0) {
        return Err(domain("lambda", lambda, "lambda >= 0"));
    }
    Ok(phi_raw(lambda))
}

/// `x^2 / (2(1+x))` for `x >= 0`.
pub fn bern_rate(x: f64) -> Result<f64, RateError> {
    if !(x >= 0.0) {
        return Err(domain("x", x, "x >= 0"));
    }
    Ok(bern_raw(x))
}

/// `x^2 / (2(1+x/3))` for `x >= 0`.
pub fn benn_rate(x: f64) -> Result<f64, RateError> {
    if !(x >= 0.0) {
        return Err(domain("x", x, "x >= 0"));
    }
    Ok(benn_raw(x))
}

/// `x^2 / (1 + x/3 + sqrt(1+2x/3))` for `x >= 0`.
pub fn mid_rate(x: f64) -> Result<f64, RateError> {
    if !(x >= 0.0) {
        return Err(domain("x", x, "x >= 0"));
    }
    Ok(mid_raw(x))
}

/// Minimizer `x/(1+x)` of `-(psi(l) + l*x)` over `l` in `[0,1)`; always in
/// `(0, 1)` for `x > 0`.
pub fn lambda_star_lower(x: f64) -> Result<f64, RateError> {
    if !(x > 0.0) {
        return Err(domain("x", x, "x > 0"));
    }
    Ok(x / (1.0 + x))
}

/// Minimizer `log(1+x)` of `phi(l) - l*x` over `l >= 0`.
pub fn lambda_star_upper(x: f64) -> Result<f64, RateError> {
    if !(x > 0.0) {
        return Err(domain("x", x, "x > 0"));
    }
    Ok(x.ln_1p())
}

/// Geometric slicing ratio `1 + 1/(1+x)`; always in `(1, 2)` for `x > 0`.
pub fn peel_a(x: f64) -> Result<f64, RateError> {
    if !(x > 0.0) {
        return Err(domain("x", x, "x > 0"));
    }
    Ok(1.0 + 1.0 / (1.0 + x))
}
