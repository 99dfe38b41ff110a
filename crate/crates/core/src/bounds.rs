//! Closed-form tail bounds, evaluated as pure functions of their parameters.
//!
//! Each bound returns a [`BoundValue`] with the raw formula value (which may
//! exceed 1, e.g. for the peeling bounds with their `sqrt(e)` prefactor), the
//! value clamped to `[0, 1]`, and an echo of the parameters used. Parameter
//! validation is strict: out-of-domain inputs produce a typed error, never a
//! silent NaN.
//!
//! Moment exponents are named explicitly: `moment_p` is the exponent of the
//! `E|xi|^{2p}` moment condition (in `(1, 2]`), while the Hölder exponent of
//! the expectation-type bounds lives in [`crate::verify`] as `holder_p`.
//! The i.i.d. bounds accept caller-supplied moments and do not cross-check
//! them for Jensen consistency (`m2p >= sigma2^p`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rates::{benn_raw, bern_raw, g_raw, h_raw};

pub const SQRT_E: f64 = 1.648_721_270_700_128_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("{name} = {value} outside domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

fn domain(name: &'static str, value: f64, constraint: &'static str) -> BoundError {
    BoundError::Domain {
        name,
        value,
        constraint,
    }
}

fn require_pos(name: &'static str, value: f64) -> Result<(), BoundError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(domain(name, value, "> 0"))
    }
}

/// Identifies which formula a [`BoundValue`] came from, including the
/// Monte Carlo expectation-type bounds assembled by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    BennettVariance,
    BennettSum,
    SymGaussianJoint,
    SelfNormJointExact,
    SelfNormJointBernstein,
    NormLowerJointExact,
    NormLowerJointBennett,
    PeelingSelfNorm,
    PeelingNormalized,
    IidSelfNorm,
    IidSelfNormAuto,
    TstatPeeling,
    ArJoint,
    ArGaussianBaseline,
    ArPeeling,
    ChenLowerTail,
    // expectation-type bounds, estimated by Monte Carlo in `verify`
    SelfNormMcExact,
    SelfNormMcBernstein,
    SelfNormMcBernsteinMarginal,
    NormLowerMcExact,
    NormLowerMcBennett,
    SymGaussianSqrtP2,
    SymGaussianInfP,
    ArMc,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::BennettVariance => "bennett_variance",
            FormulaId::BennettSum => "bennett_sum",
            FormulaId::SymGaussianJoint => "sym_gaussian_joint",
            FormulaId::SelfNormJointExact => "self_norm_joint_exact",
            FormulaId::SelfNormJointBernstein => "self_norm_joint_bernstein",
            FormulaId::NormLowerJointExact => "norm_lower_joint_exact",
            FormulaId::NormLowerJointBennett => "norm_lower_joint_bennett",
            FormulaId::PeelingSelfNorm => "peeling_self_norm",
            FormulaId::PeelingNormalized => "peeling_normalized",
            FormulaId::IidSelfNorm => "iid_self_norm",
            FormulaId::IidSelfNormAuto => "iid_self_norm_auto",
            FormulaId::TstatPeeling => "tstat_peeling",
            FormulaId::ArJoint => "ar_joint",
            FormulaId::ArGaussianBaseline => "ar_gaussian_baseline",
            FormulaId::ArPeeling => "ar_peeling",
            FormulaId::ChenLowerTail => "chen_lower_tail",
            FormulaId::SelfNormMcExact => "self_norm_mc_exact",
            FormulaId::SelfNormMcBernstein => "self_norm_mc_bernstein",
            FormulaId::SelfNormMcBernsteinMarginal => "self_norm_mc_bernstein_marginal",
            FormulaId::NormLowerMcExact => "norm_lower_mc_exact",
            FormulaId::NormLowerMcBennett => "norm_lower_mc_bennett",
            FormulaId::SymGaussianSqrtP2 => "sym_gaussian_sqrt_p2",
            FormulaId::SymGaussianInfP => "sym_gaussian_inf_p",
            FormulaId::ArMc => "ar_mc",
        }
    }
}

impl std::fmt::Display for FormulaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A theoretical tail bound: the raw formula value, its clamp to `[0, 1]`,
/// and the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub formula: FormulaId,
    pub raw: f64,
    pub clamped: f64,
    pub params: BTreeMap<&'static str, f64>,
}

impl BoundValue {
    pub fn new(formula: FormulaId, raw: f64, params: &[(&'static str, f64)]) -> Self {
        Self {
            formula,
            raw,
            clamped: raw.min(1.0),
            params: params.iter().copied().collect(),
        }
    }
}

/// Classical Bennett bound in variance form:
/// `P(S_n >= x v^2) <= exp{-x^2 v^2 / (2(1+x/3))}` for sums with increments
/// bounded above by 1.
pub fn bennett_variance_form(x: f64, v2: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("v2", v2)?;
    let raw = (-x * x * v2 / (2.0 * (1.0 + x / 3.0))).exp();
    Ok(BoundValue::new(
        FormulaId::BennettVariance,
        raw,
        &[("x", x), ("v2", v2)],
    ))
}

/// Bennett bound rewritten at an absolute deviation level:
/// `P(S_n >= x) <= exp{-x^2 / (2(v^2 + x/3))}`.
pub fn bennett_sum_form(x: f64, v2: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("v2", v2)?;
    let raw = (-x * x / (2.0 * (v2 + x / 3.0))).exp();
    Ok(BoundValue::new(
        FormulaId::BennettSum,
        raw,
        &[("x", x), ("v2", v2)],
    ))
}

/// Gaussian-rate bound for conditionally symmetric (more generally,
/// heavy-on-left) martingale differences:
/// `P(S_n/[S]_n >= x, [S]_n >= y) <= exp{-x^2 y / 2}`.
pub fn sym_gaussian_joint(x: f64, y: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("y", y)?;
    let raw = (-0.5 * x * x * y).exp();
    Ok(BoundValue::new(
        FormulaId::SymGaussianJoint,
        raw,
        &[("x", x), ("y", y)],
    ))
}

/// Joint bound for the self-normalized upper tail under increments bounded
/// below by -1: `P(S_n/[S]_n >= x, [S]_n >= y)` is at most
/// `exp{-(x - log(1+x)) y}` (exact rate) and `exp{-x^2 y / (2(1+x))}`
/// (Bernstein relaxation). Returns `(exact, relaxed)`; exact <= relaxed.
pub fn self_norm_joint(x: f64, y: f64) -> Result<(BoundValue, BoundValue), BoundError> {
    require_pos("x", x)?;
    require_pos("y", y)?;
    let exact = BoundValue::new(
        FormulaId::SelfNormJointExact,
        (-h_raw(x) * y).exp(),
        &[("x", x), ("y", y)],
    );
    let relaxed = BoundValue::new(
        FormulaId::SelfNormJointBernstein,
        (-bern_raw(x) * y).exp(),
        &[("x", x), ("y", y)],
    );
    Ok((exact, relaxed))
}

/// Joint bound for the normalized lower tail:
/// `P(S_n/<S>_n <= -x, <S>_n >= y)` is at most
/// `exp{-((1+x)log(1+x) - x) y}` (exact rate) and
/// `exp{-x^2 y / (2(1+x/3))}` (Bennett relaxation).
pub fn norm_lower_joint(x: f64, y: f64) -> Result<(BoundValue, BoundValue), BoundError> {
    require_pos("x", x)?;
    require_pos("y", y)?;
    let exact = BoundValue::new(
        FormulaId::NormLowerJointExact,
        (-g_raw(x) * y).exp(),
        &[("x", x), ("y", y)],
    );
    let relaxed = BoundValue::new(
        FormulaId::NormLowerJointBennett,
        (-benn_raw(x) * y).exp(),
        &[("x", x), ("y", y)],
    );
    Ok((exact, relaxed))
}

fn require_window(b: f64, m: f64) -> Result<(), BoundError> {
    require_pos("b", b)?;
    if !(m >= 1.0) || !m.is_finite() {
        return Err(domain("M", m, ">= 1"));
    }
    Ok(())
}

/// Peeling bound over the window `b <= sqrt([S]_n) <= bM`:
/// `P(S_n/sqrt([S]_n) >= x, window) <=
///  sqrt(e) (1 + 2(1+x) ln M) exp{-x^2 / (2(1+x/b))}`.
pub fn peeling_self_norm(x: f64, b: f64, m: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_window(b, m)?;
    let prefactor = 1.0 + 2.0 * (1.0 + x) * m.ln();
    let raw = SQRT_E * prefactor * (-x * x / (2.0 * (1.0 + x / b))).exp();
    Ok(BoundValue::new(
        FormulaId::PeelingSelfNorm,
        raw,
        &[("x", x), ("b", b), ("M", m)],
    ))
}

/// Peeling bound for the normalized lower tail over
/// `b <= sqrt(<S>_n) <= bM`, with exponent `-x^2 / (2(1+x/(3b)))`.
///
/// At `M = 1` and `b = sqrt(Var(S_n))` this reduces, up to the `sqrt(e)`
/// factor, to the classical Bennett bound.
pub fn peeling_normalized(x: f64, b: f64, m: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_window(b, m)?;
    let prefactor = 1.0 + 2.0 * (1.0 + x) * m.ln();
    let raw = SQRT_E * prefactor * (-x * x / (2.0 * (1.0 + x / (3.0 * b)))).exp();
    Ok(BoundValue::new(
        FormulaId::PeelingNormalized,
        raw,
        &[("x", x), ("b", b), ("M", m)],
    ))
}

fn require_moment_p(moment_p: f64) -> Result<(), BoundError> {
    if !(moment_p > 1.0 && moment_p <= 2.0) {
        return Err(domain("moment_p", moment_p, "in (1, 2]"));
    }
    Ok(())
}

/// Two-term bound for the self-normalized upper tail of i.i.d. sums with
/// `xi >= -1`, `sigma2 = E xi^2`, `m2p = E xi^{2p}`, and a free split level
/// `y` in `(0, sigma2)`:
///
/// `exp{-x^2 (sigma2-y) n / (2(1+x))}
///  + exp{-(p-1) y^{p/(p-1)} n / (4 m2p^{1/(p-1)})}`.
pub fn iid_self_norm(
    x: f64,
    y: f64,
    n: u64,
    sigma2: f64,
    m2p: f64,
    moment_p: f64,
) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("sigma2", sigma2)?;
    require_pos("m2p", m2p)?;
    require_moment_p(moment_p)?;
    if n == 0 {
        return Err(domain("n", 0.0, ">= 1"));
    }
    if !(y > 0.0 && y < sigma2) {
        return Err(domain("y", y, "in (0, sigma2)"));
    }
    let nf = n as f64;
    let first = (-x * x * (sigma2 - y) * nf / (2.0 * (1.0 + x))).exp();
    let pm1 = moment_p - 1.0;
    let second = (-pm1 * y.powf(moment_p / pm1) * nf / (4.0 * m2p.powf(1.0 / pm1))).exp();
    Ok(BoundValue::new(
        FormulaId::IidSelfNorm,
        first + second,
        &[
            ("x", x),
            ("y", y),
            ("n", nf),
            ("sigma2", sigma2),
            ("m2p", m2p),
            ("moment_p", moment_p),
        ],
    ))
}

/// The parameter-free variant of [`iid_self_norm`] with the split level
/// pinned at `y = x^{(p-1)/p} sigma2`, valid for `x` in `(0, 1)`:
///
/// `exp{-sigma2 x^2 n / (2(1+2x^{(p-1)/p}))}
///  + exp{-(p-1) x n / (4 (m2p/sigma2^p)^{1/(p-1)})}`.
pub fn iid_self_norm_auto(
    x: f64,
    n: u64,
    sigma2: f64,
    m2p: f64,
    moment_p: f64,
) -> Result<BoundValue, BoundError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(domain("x", x, "in (0, 1)"));
    }
    require_pos("sigma2", sigma2)?;
    require_pos("m2p", m2p)?;
    require_moment_p(moment_p)?;
    if n == 0 {
        return Err(domain("n", 0.0, ">= 1"));
    }
    let nf = n as f64;
    let pm1 = moment_p - 1.0;
    let u = x.powf(pm1 / moment_p);
    let first = (-sigma2 * x * x * nf / (2.0 * (1.0 + 2.0 * u))).exp();
    let ratio = m2p / sigma2.powf(moment_p);
    let second = (-pm1 * x * nf / (4.0 * ratio.powf(1.0 / pm1))).exp();
    Ok(BoundValue::new(
        FormulaId::IidSelfNormAuto,
        first + second,
        &[
            ("x", x),
            ("n", nf),
            ("sigma2", sigma2),
            ("m2p", m2p),
            ("moment_p", moment_p),
        ],
    ))
}

/// Maps a t-statistic level `x` to the equivalent level for
/// `S_n/sqrt([S]_n)`: `x sqrt(n / (n + x^2 - 1))`.
pub fn tstat_transform(x: f64, n: u64) -> Result<f64, BoundError> {
    require_pos("x", x)?;
    if n < 2 {
        return Err(domain("n", n as f64, ">= 2"));
    }
    let nf = n as f64;
    Ok(x * (nf / (nf + x * x - 1.0)).sqrt())
}

/// Peeling bound for Student's t-statistic over the window
/// `b <= sqrt([S]_n) <= bM`. With `u = tstat_transform(x, n)`:
/// `sqrt(e) (1 + 2u ln M) exp{-u^2 / (2(1+u/b))}`.
///
/// Note the window prefactor uses `2u`, not `2(1+u)`.
pub fn tstat_peeling(x: f64, n: u64, b: f64, m: f64) -> Result<BoundValue, BoundError> {
    require_window(b, m)?;
    let u = tstat_transform(x, n)?;
    let prefactor = 1.0 + 2.0 * u * m.ln();
    let raw = SQRT_E * prefactor * (-u * u / (2.0 * (1.0 + u / b))).exp();
    Ok(BoundValue::new(
        FormulaId::TstatPeeling,
        raw,
        &[("x", x), ("n", n as f64), ("b", b), ("M", m)],
    ))
}

fn require_theta_abs(theta_abs: f64) -> Result<(), BoundError> {
    if !(0.0..1.0).contains(&theta_abs) {
        return Err(domain("theta_abs", theta_abs, "in [0, 1)"));
    }
    Ok(())
}

/// Joint deviation bound for the AR(1) least-squares estimate with noise
/// bounded by `C` and a certified bound `theta_abs` on `|theta|`:
///
/// `P(|theta_hat - theta| >= x, sum X_{k-1}^2 >= y) <=
///  2 exp{-x^2 y / (2(sigma2 + x C^2 / (3(1-theta_abs))))}`.
pub fn ar_joint(
    x: f64,
    y: f64,
    sigma2: f64,
    noise_bound: f64,
    theta_abs: f64,
) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("y", y)?;
    require_pos("sigma2", sigma2)?;
    require_pos("C", noise_bound)?;
    require_theta_abs(theta_abs)?;
    let kappa = noise_bound * noise_bound / (3.0 * (1.0 - theta_abs));
    let raw = 2.0 * (-x * x * y / (2.0 * (sigma2 + x * kappa))).exp();
    Ok(BoundValue::new(
        FormulaId::ArJoint,
        raw,
        &[
            ("x", x),
            ("y", y),
            ("sigma2", sigma2),
            ("C", noise_bound),
            ("theta_abs", theta_abs),
        ],
    ))
}

/// Gaussian-noise reference for the AR(1) deviation:
/// `2 exp{-x^2 y / 2}`. Valid when the driving noise is standard normal;
/// reported for comparison only.
pub fn ar_gaussian_baseline(x: f64, y: f64) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_pos("y", y)?;
    let raw = 2.0 * (-0.5 * x * x * y).exp();
    Ok(BoundValue::new(
        FormulaId::ArGaussianBaseline,
        raw,
        &[("x", x), ("y", y)],
    ))
}

/// Window bound for the energy-scaled AR(1) deviation
/// `|theta_hat - theta| sqrt(sum X_{k-1}^2)` over
/// `b <= sqrt(sum X_{k-1}^2) <= bM`:
///
/// `2 sqrt(e) (1 + 2(1 + x/sigma) ln M)
///    exp{-x^2 / (2(sigma2 + x C^2 / (3b(1-theta_abs))))}`.
pub fn ar_peeling(
    x: f64,
    b: f64,
    m: f64,
    sigma2: f64,
    noise_bound: f64,
    theta_abs: f64,
) -> Result<BoundValue, BoundError> {
    require_pos("x", x)?;
    require_window(b, m)?;
    require_pos("sigma2", sigma2)?;
    require_pos("C", noise_bound)?;
    require_theta_abs(theta_abs)?;
    let sigma = sigma2.sqrt();
    let kappa = noise_bound * noise_bound / (3.0 * b * (1.0 - theta_abs));
    let prefactor = 1.0 + 2.0 * (1.0 + x / sigma) * m.ln();
    let raw = 2.0 * SQRT_E * prefactor * (-x * x / (2.0 * (sigma2 + x * kappa))).exp();
    Ok(BoundValue::new(
        FormulaId::ArPeeling,
        raw,
        &[
            ("x", x),
            ("b", b),
            ("M", m),
            ("sigma2", sigma2),
            ("C", noise_bound),
            ("theta_abs", theta_abs),
        ],
    ))
}

/// Lower-tail bound for sums of independent nonnegative variables with
/// finite `p`-th moments (`1 < p <= 2`):
///
/// `P(sum zeta_i <= sum E zeta_i - y) <=
///  exp{-(p-1) y^{p/(p-1)} / (4 (sum E zeta_i^p)^{1/(p-1)})}`.
///
/// The constraint `y < sum E zeta_i` is the caller's responsibility.
pub fn chen_lower_tail(y: f64, sum_pmoment: f64, moment_p: f64) -> Result<BoundValue, BoundError> {
    require_pos("y", y)?;
    require_pos("sum_pmoment", sum_pmoment)?;
    require_moment_p(moment_p)?;
    let pm1 = moment_p - 1.0;
    let raw = (-pm1 * y.powf(moment_p / pm1) / (4.0 * sum_pmoment.powf(1.0 / pm1))).exp();
    Ok(BoundValue::new(
        FormulaId::ChenLowerTail,
        raw,
        &[
            ("y", y),
            ("sum_pmoment", sum_pmoment),
            ("moment_p", moment_p),
        ],
    ))
}

/// Deviation-level mapping for increments bounded below by `-a` instead of
/// `-1`. Rescaling `xi' = xi/a` gives `S'/[S'] = a S/[S]`, so the event
/// `{S/[S] >= x}` becomes `{S'/[S'] >= a x}`; this returns `a x`.
///
/// The companion mappings are `[S'] = [S]/a^2` and `<S'> = <S>/a^2`, so a
/// joint event `{.., [S] >= y}` maps to `{.., [S'] >= y/a^2}`.
pub fn rescale_deviation(a: f64, x: f64) -> Result<f64, BoundError> {
    require_pos("a", a)?;
    require_pos("x", x)?;
    Ok(a * x)
}

/// Radius `x` such that the AR(1) joint bound evaluated at
/// `(x, design_energy)` equals `alpha`: the positive root of
/// `x^2 y = 2 ln(2/alpha) (sigma2 + x kappa)` with
/// `kappa = C^2/(3(1-theta_abs_max))`, i.e.
/// `x = (L kappa + sqrt(L^2 kappa^2 + 2 L sigma2 y)) / y`, `L = ln(2/alpha)`.
///
/// `noise_bound = 0` is allowed and gives the pure Gaussian-rate radius
/// `sqrt(2 L sigma2 / y)`.
pub fn ar_confidence_radius(
    design_energy: f64,
    sigma2: f64,
    noise_bound: f64,
    theta_abs_max: f64,
    alpha: f64,
) -> Result<f64, BoundError> {
    require_pos("design_energy", design_energy)?;
    require_pos("sigma2", sigma2)?;
    if !(noise_bound >= 0.0) || !noise_bound.is_finite() {
        return Err(domain("C", noise_bound, ">= 0"));
    }
    require_theta_abs(theta_abs_max)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha", alpha, "in (0, 1)"));
    }
    let l = (2.0 / alpha).ln();
    let kappa = noise_bound * noise_bound / (3.0 * (1.0 - theta_abs_max));
    let y = design_energy;
    Ok((l * kappa + (l * l * kappa * kappa + 2.0 * l * sigma2 * y).sqrt()) / y)
}
