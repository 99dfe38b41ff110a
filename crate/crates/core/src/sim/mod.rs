//! Martingale-difference trajectory generation and derived statistics.
//!
//! Models are pure functions of `(model, seed)`: the same pair produces the
//! same trajectory regardless of thread count or call order. Each simulation
//! step consumes exactly one RNG draw.

mod ar;
mod stats;

pub use ar::{
    ls_estimate, ls_estimate_series, read_ar_csv, simulate_ar1, simulate_ar_summary, write_ar_csv,
    ArFit, ArPath, ArSummary,
};
pub use stats::{heavy_on_left_test, t_statistic, HeavyOnLeftPoint, HeavyOnLeftReport};

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rates::{phi_raw, psi_raw};
use crate::rng::ReplicationRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{name} = {value} outside domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("conditionally symmetric model requires a symmetric base distribution")]
    AsymmetricBase,
    #[error("uniform_noise is an AR noise driver, not a martingale increment kind")]
    NoiseAsIncrement,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("conditional variance not available for this trajectory")]
    MissingCondVariance,
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> SimError {
    SimError::Domain {
        name,
        value,
        constraint,
    }
}

/// A zero-mean increment or noise law.
///
/// `TwoPoint { q }` takes the value `-1` with probability `1-q` and
/// `(1-q)/q` with probability `q`; with `q < 1/2` it is bounded below by -1
/// without being symmetric. `UniformNoise` is reserved for AR(1) drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Rademacher,
    TwoPoint { q: f64 },
    UniformSym { half_width: f64 },
    UniformNoise { c: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            DistSpec::Rademacher => Ok(()),
            DistSpec::TwoPoint { q } => {
                if q > 0.0 && q < 1.0 {
                    Ok(())
                } else {
                    Err(domain("q", q, "in (0, 1)"))
                }
            }
            DistSpec::UniformSym { half_width } => {
                if half_width > 0.0 && half_width <= 1.0 {
                    Ok(())
                } else {
                    Err(domain("half_width", half_width, "in (0, 1]"))
                }
            }
            DistSpec::UniformNoise { c } => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(domain("c", c, "> 0"))
                }
            }
        }
    }

    /// All kinds are centered by construction.
    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Rademacher => 1.0,
            DistSpec::TwoPoint { q } => (1.0 - q) / q,
            DistSpec::UniformSym { half_width } => half_width * half_width / 3.0,
            DistSpec::UniformNoise { c } => c * c / 3.0,
        }
    }

    /// Deterministic lower bound on a single draw.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            DistSpec::Rademacher | DistSpec::TwoPoint { .. } => -1.0,
            DistSpec::UniformSym { half_width } => -half_width,
            DistSpec::UniformNoise { c } => -c,
        }
    }

    /// `E |xi|^{2p}`, closed form for every kind.
    pub fn moment_2p(&self, p: f64) -> f64 {
        match *self {
            DistSpec::Rademacher => 1.0,
            DistSpec::TwoPoint { q } => (1.0 - q) + q * ((1.0 - q) / q).powf(2.0 * p),
            DistSpec::UniformSym { half_width } => half_width.powf(2.0 * p) / (2.0 * p + 1.0),
            DistSpec::UniformNoise { c } => c.powf(2.0 * p) / (2.0 * p + 1.0),
        }
    }

    /// Whether the law is symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            DistSpec::Rademacher | DistSpec::UniformSym { .. } | DistSpec::UniformNoise { .. } => {
                true
            }
            DistSpec::TwoPoint { q } => q == 0.5,
        }
    }

    /// One draw; consumes exactly one RNG value.
    #[inline]
    pub fn sample(&self, rng: &mut ReplicationRng) -> f64 {
        match *self {
            DistSpec::Rademacher => {
                if rng.next_u64() >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            DistSpec::TwoPoint { q } => {
                if rng.next_f64() < q {
                    (1.0 - q) / q
                } else {
                    -1.0
                }
            }
            DistSpec::UniformSym { half_width } => half_width * (2.0 * rng.next_f64() - 1.0),
            DistSpec::UniformNoise { c } => c * (2.0 * rng.next_f64() - 1.0),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DistSpec::Rademacher => "rademacher".to_string(),
            DistSpec::TwoPoint { q } => format!("two_point(q={q})"),
            DistSpec::UniformSym { half_width } => format!("uniform_sym(w={half_width})"),
            DistSpec::UniformNoise { c } => format!("uniform_noise(c={c})"),
        }
    }
}

/// Predictable map from the history `(k, S_{k-1}, [S]_{k-1})` to the scale of
/// step `k`. Outputs are clamped to `(0, 1]`.
#[derive(Clone)]
pub enum ScaleRule {
    /// `1 / sqrt(1 + [S]_{k-1} / k)`.
    VarianceDamped,
    Custom(Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>),
}

impl ScaleRule {
    #[inline]
    fn eval(&self, k: usize, s_prev: f64, sqv_prev: f64) -> f64 {
        let raw = match self {
            ScaleRule::VarianceDamped => 1.0 / (1.0 + sqv_prev / k as f64).sqrt(),
            ScaleRule::Custom(f) => f(k, s_prev, sqv_prev),
        };
        raw.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

impl std::fmt::Debug for ScaleRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScaleRule::VarianceDamped => f.write_str("VarianceDamped"),
            ScaleRule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A martingale-difference law over `n` steps.
///
/// `CondSymmetric` multiplies a symmetric base draw by a predictable scale,
/// which makes `L(xi_k | F_{k-1}) = L(-xi_k | F_{k-1})` hold by construction.
#[derive(Debug, Clone)]
pub enum IncrementModel {
    Iid {
        dist: DistSpec,
        n: usize,
    },
    CondSymmetric {
        base: DistSpec,
        scale_rule: ScaleRule,
        n: usize,
    },
}

impl IncrementModel {
    pub fn iid(dist: DistSpec, n: usize) -> Self {
        IncrementModel::Iid { dist, n }
    }

    /// Conditionally symmetric model with the built-in variance-damped rule.
    pub fn cond_symmetric(base: DistSpec, n: usize) -> Self {
        IncrementModel::CondSymmetric {
            base,
            scale_rule: ScaleRule::VarianceDamped,
            n,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            IncrementModel::Iid { n, .. } | IncrementModel::CondSymmetric { n, .. } => *n,
        }
    }

    pub fn dist(&self) -> &DistSpec {
        match self {
            IncrementModel::Iid { dist, .. } => dist,
            IncrementModel::CondSymmetric { base, .. } => base,
        }
    }

    /// Every increment is bounded below by this value.
    pub fn lower_bound(&self) -> f64 {
        self.dist().lower_bound()
    }

    pub fn is_conditionally_symmetric(&self) -> bool {
        match self {
            IncrementModel::Iid { dist, .. } => dist.is_symmetric(),
            IncrementModel::CondSymmetric { .. } => true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n() == 0 {
            return Err(domain("n", 0.0, ">= 1"));
        }
        match self {
            IncrementModel::Iid { dist, .. } => {
                dist.validate()?;
                if matches!(dist, DistSpec::UniformNoise { .. }) {
                    return Err(SimError::NoiseAsIncrement);
                }
            }
            IncrementModel::CondSymmetric { base, .. } => {
                base.validate()?;
                if matches!(base, DistSpec::UniformNoise { .. }) {
                    return Err(SimError::NoiseAsIncrement);
                }
                if !base.is_symmetric() {
                    return Err(SimError::AsymmetricBase);
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            IncrementModel::Iid { dist, .. } => format!("iid({})", dist.label()),
            IncrementModel::CondSymmetric { base, .. } => {
                format!("cond_symmetric({})", base.label())
            }
        }
    }

    /// One step: the increment and its conditional variance.
    #[inline]
    pub(crate) fn step(
        &self,
        k: usize,
        s_prev: f64,
        sqv_prev: f64,
        rng: &mut ReplicationRng,
    ) -> (f64, f64) {
        match self {
            IncrementModel::Iid { dist, .. } => (dist.sample(rng), dist.variance()),
            IncrementModel::CondSymmetric {
                base, scale_rule, ..
            } => {
                let scale = scale_rule.eval(k, s_prev, sqv_prev);
                (scale * base.sample(rng), scale * scale * base.variance())
            }
        }
    }
}

/// Final-step statistics of one trajectory, for replication batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartSummary {
    /// `S_n`
    pub sum: f64,
    /// `[S]_n`
    pub sq_variation: f64,
    /// `<S>_n`
    pub cond_variance: f64,
}

/// One realized path with all running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub increments: Vec<f64>,
    /// `S_1 .. S_n`
    pub partial_sums: Vec<f64>,
    /// `[S]_1 .. [S]_n`
    pub sq_variation: Vec<f64>,
    /// `<S>_1 .. <S>_n` when analytically known; never approximated.
    pub cond_variance: Option<Vec<f64>>,
    pub model_id: String,
    pub seed: u64,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn final_sum(&self) -> f64 {
        *self.partial_sums.last().expect("n >= 1")
    }

    pub fn final_sq_variation(&self) -> f64 {
        *self.sq_variation.last().expect("n >= 1")
    }

    pub fn final_cond_variance(&self) -> Option<f64> {
        self.cond_variance
            .as_ref()
            .map(|cv| *cv.last().expect("n >= 1"))
    }

    pub fn summary(&self) -> MartSummary {
        MartSummary {
            sum: self.final_sum(),
            sq_variation: self.final_sq_variation(),
            cond_variance: self.final_cond_variance().unwrap_or(f64::NAN),
        }
    }
}

/// Simulates a full trajectory; a deterministic function of `(model, seed)`.
pub fn simulate_trajectory(model: &IncrementModel, seed: u64) -> Result<Trajectory, SimError> {
    model.validate()?;
    let mut rng = ReplicationRng::from_seed(seed);
    let n = model.n();
    let mut increments = Vec::with_capacity(n);
    let mut partial_sums = Vec::with_capacity(n);
    let mut sq_variation = Vec::with_capacity(n);
    let mut cond_variance = Vec::with_capacity(n);
    let (mut s, mut sqv, mut cv) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        let (xi, var_k) = model.step(k, s, sqv, &mut rng);
        s += xi;
        sqv += xi * xi;
        cv += var_k;
        increments.push(xi);
        partial_sums.push(s);
        sq_variation.push(sqv);
        cond_variance.push(cv);
    }
    Ok(Trajectory {
        increments,
        partial_sums,
        sq_variation,
        cond_variance: Some(cond_variance),
        model_id: model.label(),
        seed,
    })
}

/// Streaming variant of [`simulate_trajectory`] that keeps only the final
/// statistics; accumulates in the same order, so the values agree bit for
/// bit with the stored trajectory.
pub fn simulate_summary(model: &IncrementModel, rng: &mut ReplicationRng) -> MartSummary {
    let n = model.n();
    let (mut s, mut sqv, mut cv) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        let (xi, var_k) = model.step(k, s, sqv, rng);
        s += xi;
        sqv += xi * xi;
        cv += var_k;
    }
    MartSummary {
        sum: s,
        sq_variation: sqv,
        cond_variance: cv,
    }
}

/// `exp{lambda S_n + (lambda + log(1-lambda)) [S]_n}` from final statistics.
/// Has expectation at most 1 for increments bounded below by -1.
#[inline]
pub fn sq_variation_weight(sum: f64, sq_variation: f64, lambda: f64) -> Result<f64, SimError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain("lambda", lambda, "in [0, 1)"));
    }
    Ok((lambda * sum + psi_raw(lambda) * sq_variation).exp())
}

/// `exp{-lambda S_n - (e^lambda - 1 - lambda) <S>_n}` from final statistics.
/// Has expectation at most 1 for increments bounded below by -1.
#[inline]
pub fn cond_variance_weight(sum: f64, cond_variance: f64, lambda: f64) -> Result<f64, SimError> {
    if !(lambda >= 0.0) {
        return Err(domain("lambda", lambda, ">= 0"));
    }
    Ok((-lambda * sum - phi_raw(lambda) * cond_variance).exp())
}

/// Supermartingale functional of the squared variation, evaluated at the
/// trajectory endpoint. Requires increments bounded below by -1 (guaranteed
/// for trajectories produced by [`simulate_trajectory`]).
pub fn sq_variation_supermartingale(traj: &Trajectory, lambda: f64) -> Result<f64, SimError> {
    sq_variation_weight(traj.final_sum(), traj.final_sq_variation(), lambda)
}

/// Supermartingale functional of the conditional variance; errors when the
/// trajectory has no analytic `<S>`.
pub fn cond_variance_supermartingale(traj: &Trajectory, lambda: f64) -> Result<f64, SimError> {
    let cv = traj
        .final_cond_variance()
        .ok_or(SimError::MissingCondVariance)?;
    cond_variance_weight(traj.final_sum(), cv, lambda)
}

/// Debug CSV export: one row per step.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,increment,partial_sum,sq_variation,cond_variance")?;
    for i in 0..traj.n() {
        let cv = traj
            .cond_variance
            .as_ref()
            .map(|v| v[i].to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            i + 1,
            traj.increments[i],
            traj.partial_sums[i],
            traj.sq_variation[i],
            cv
        )?;
    }
    Ok(())
}
