//! Monte Carlo estimation of the expectation-type bounds
//! `(E[exp{-(p-1) rate * weight} 1_event])^{1/p}` and the optimization of
//! the Hölder exponent `p`.
//!
//! All estimators evaluate over a fixed precomputed batch, so a `p`-search
//! reuses the same trajectories (common random numbers) and the search sees
//! a deterministic function of `p`.

use serde::{Deserialize, Serialize};

use super::{domain, VerifyError};
use crate::exec::stable_sum;
use crate::rates::{benn_raw, bern_raw, g_raw, h_raw};
use crate::sim::{ArSummary, MartSummary};

pub const HOLDER_P_MIN: f64 = 1.0 + 1e-6;
pub const HOLDER_P_MAX: f64 = 1e6;

/// Which expectation-type bound to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationKind {
    /// rate `x - log(1+x)`, weight `[S]_n`, indicator `S_n >= x [S]_n`
    SelfNormExact,
    /// rate `x^2/(2(1+x))`, weight `[S]_n`, indicator `S_n >= x [S]_n`
    SelfNormBernstein,
    /// rate `x^2/(2(1+x))`, weight `[S]_n`, no indicator
    SelfNormBernsteinMarginal,
    /// rate `(1+x)log(1+x) - x`, weight `<S>_n`, indicator `S_n <= -x <S>_n`
    NormLowerExact,
    /// rate `x^2/(2(1+x/3))`, weight `<S>_n`, indicator `S_n <= -x <S>_n`
    NormLowerBennett,
    /// rate `x^2/2`, weight `[S]_n`, no indicator (symmetric-case baseline)
    GaussianRate,
}

impl ExpectationKind {
    fn rate(self, x: f64) -> f64 {
        match self {
            ExpectationKind::SelfNormExact => h_raw(x),
            ExpectationKind::SelfNormBernstein | ExpectationKind::SelfNormBernsteinMarginal => {
                bern_raw(x)
            }
            ExpectationKind::NormLowerExact => g_raw(x),
            ExpectationKind::NormLowerBennett => benn_raw(x),
            ExpectationKind::GaussianRate => 0.5 * x * x,
        }
    }

    fn uses_cond_variance(self) -> bool {
        matches!(
            self,
            ExpectationKind::NormLowerExact | ExpectationKind::NormLowerBennett
        )
    }
}

/// `(mean over reps of exp{log_term_i})^{1/p}` evaluated in log space:
/// `exp((logsumexp(log_terms) - ln reps) / p)`. Keeps large-`p` evaluations
/// from underflowing before the `1/p`-th root rescales them. `None` entries
/// are replications where the indicator did not fire.
fn log_space_power_mean(log_terms: &[Option<f64>], reps: usize, holder_p: f64) -> f64 {
    let max = log_terms
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if max == f64::NEG_INFINITY {
        return 0.0; // indicator never fired
    }
    let shifted: Vec<f64> = log_terms
        .iter()
        .map(|t| t.map_or(0.0, |v| (v - max).exp()))
        .collect();
    let log_mean = max + stable_sum(&shifted).ln() - (reps as f64).ln();
    (log_mean / holder_p).exp()
}

/// `(mean of exp{-(holder_p - 1) rate(x) * weight} * indicator)^{1/holder_p}`
/// over a martingale batch.
pub fn expectation_bound_estimate(
    batch: &[MartSummary],
    x: f64,
    holder_p: f64,
    kind: ExpectationKind,
) -> Result<f64, VerifyError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain("x", x, "> 0"));
    }
    if !(holder_p > 1.0 && holder_p.is_finite()) {
        return Err(domain("holder_p", holder_p, "> 1"));
    }
    if batch.is_empty() {
        return Err(domain("reps", 0.0, ">= 1"));
    }
    if kind.uses_cond_variance() && batch.iter().any(|s| s.cond_variance.is_nan()) {
        return Err(VerifyError::Incompatible(
            "conditional variance not available for this batch".to_string(),
        ));
    }
    let rate = kind.rate(x);
    let pm1 = holder_p - 1.0;
    let log_terms: Vec<Option<f64>> = batch
        .iter()
        .map(|s| {
            let (weight, fire) = match kind {
                ExpectationKind::SelfNormExact | ExpectationKind::SelfNormBernstein => {
                    (s.sq_variation, s.sum >= x * s.sq_variation)
                }
                ExpectationKind::SelfNormBernsteinMarginal | ExpectationKind::GaussianRate => {
                    (s.sq_variation, true)
                }
                ExpectationKind::NormLowerExact | ExpectationKind::NormLowerBennett => {
                    (s.cond_variance, s.sum <= -x * s.cond_variance)
                }
            };
            fire.then(|| -pm1 * rate * weight)
        })
        .collect();
    Ok(log_space_power_mean(&log_terms, batch.len(), holder_p))
}

/// `2 (mean of exp{-(holder_p - 1) rate * energy})^{1/holder_p}` is the AR
/// deviation bound; this computes the power-mean factor (the caller applies
/// the 2).
pub fn ar_expectation_estimate(
    batch: &[ArSummary],
    rate: f64,
    holder_p: f64,
) -> Result<f64, VerifyError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(domain("rate", rate, "> 0"));
    }
    if !(holder_p > 1.0 && holder_p.is_finite()) {
        return Err(domain("holder_p", holder_p, "> 1"));
    }
    if batch.is_empty() {
        return Err(domain("reps", 0.0, ">= 1"));
    }
    let pm1 = holder_p - 1.0;
    let log_terms: Vec<Option<f64>> = batch.iter().map(|s| Some(-pm1 * rate * s.energy)).collect();
    Ok(log_space_power_mean(&log_terms, batch.len(), holder_p))
}

/// Result of a Hölder-exponent search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderOptimum {
    pub p_star: f64,
    pub value: f64,
    /// The coarse scan bottomed out at an end of the `p` range (the infimum
    /// may sit at `p -> 1` or `p -> inf`).
    pub at_boundary: bool,
}

/// Minimizes `estimator(p)` over `p` in `[p_min, p_max]`.
///
/// The search runs in the compactified coordinate `u = 1 - 1/p` (so
/// `p -> inf` maps to `u -> 1`): a 64-point coarse grid followed by
/// golden-section refinement of the bracketing cell to `1e-6` in `u`. No
/// unimodality is assumed beyond the grid resolution.
pub fn optimize_holder_p(
    estimator: impl Fn(f64) -> Result<f64, VerifyError>,
    p_min: f64,
    p_max: f64,
) -> Result<HolderOptimum, VerifyError> {
    if !(p_min > 1.0) {
        return Err(domain("p_min", p_min, "> 1"));
    }
    if !(p_max > p_min) {
        return Err(domain("p_max", p_max, "> p_min"));
    }
    const GRID: usize = 64;
    const U_TOL: f64 = 1e-6;
    let to_p = |u: f64| 1.0 / (1.0 - u);
    let u_lo = 1.0 - 1.0 / p_min;
    let u_hi = 1.0 - 1.0 / p_max;

    let step = (u_hi - u_lo) / (GRID - 1) as f64;
    let mut best_i = 0usize;
    let mut best_u = u_lo;
    let mut best_f = f64::INFINITY;
    for i in 0..GRID {
        let u = if i + 1 == GRID {
            u_hi
        } else {
            u_lo + step * i as f64
        };
        let f = estimator(to_p(u))?;
        if f < best_f {
            best_f = f;
            best_i = i;
            best_u = u;
        }
    }
    let at_boundary = best_i == 0 || best_i + 1 == GRID;

    let mut a = if best_i == 0 {
        u_lo
    } else {
        u_lo + step * (best_i - 1) as f64
    };
    let mut b = if best_i + 1 >= GRID {
        u_hi
    } else {
        u_lo + step * (best_i + 1) as f64
    };
    const INV_GOLDEN: f64 = 0.381_966_011_250_105_1;
    let mut x1 = a + INV_GOLDEN * (b - a);
    let mut x2 = b - INV_GOLDEN * (b - a);
    let mut f1 = estimator(to_p(x1))?;
    let mut f2 = estimator(to_p(x2))?;
    for _ in 0..200 {
        if (b - a).abs() <= U_TOL {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_GOLDEN * (b - a);
            f1 = estimator(to_p(x1))?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_GOLDEN * (b - a);
            f2 = estimator(to_p(x2))?;
        }
    }
    let (u_ref, f_ref) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    let (u_star, value) = if f_ref < best_f {
        (u_ref, f_ref)
    } else {
        (best_u, best_f)
    };
    Ok(HolderOptimum {
        p_star: to_p(u_star),
        value,
        at_boundary,
    })
}
