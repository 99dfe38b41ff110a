//! Tail events, replication batches, and empirical tail estimation.

use serde::{Deserialize, Serialize};

use super::{domain, EmpiricalTail, VerifyError};
use crate::exec::map_replications;
use crate::rng::ReplicationRng;
use crate::sim::{simulate_ar_summary, simulate_summary, ArSummary, IncrementModel, MartSummary};

/// A simulation model at the verification level: either a
/// martingale-difference law or an AR(1) driver.
#[derive(Debug, Clone)]
pub enum Model {
    Martingale(IncrementModel),
    Ar1 { theta: f64, noise_c: f64, n: usize },
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Martingale(m) => m.n(),
            Model::Ar1 { n, .. } => *n,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Model::Martingale(m) => m.label(),
            Model::Ar1 { theta, noise_c, .. } => format!("ar1(theta={theta},c={noise_c})"),
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        match self {
            Model::Martingale(m) => m.validate().map_err(Into::into),
            Model::Ar1 { theta, noise_c, n } => {
                if !(theta.abs() < 1.0) {
                    return Err(domain("theta", *theta, "|theta| < 1"));
                }
                if !(*noise_c > 0.0) {
                    return Err(domain("noise_c", *noise_c, "> 0"));
                }
                if *n == 0 {
                    return Err(domain("n", 0.0, ">= 1"));
                }
                Ok(())
            }
        }
    }
}

/// The tail event one inequality bounds: `x` is the deviation level,
/// `y` a normalizer level,
/// `(b, M)` a window for the square-root-normalized statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailEvent {
    /// `S_n/[S]_n >= x`
    SelfNormUpper { x: f64 },
    /// `S_n/[S]_n >= x` and `[S]_n >= y`
    SelfNormUpperJoint { x: f64, y: f64 },
    /// `S_n/<S>_n <= -x`
    NormLower { x: f64 },
    /// `S_n/<S>_n <= -x` and `<S>_n >= y`
    NormLowerJoint { x: f64, y: f64 },
    /// `S_n/sqrt([S]_n) >= x` and `b <= sqrt([S]_n) <= bM`
    SelfNormSqrtWindow {
        x: f64,
        b: f64,
        #[serde(rename = "M")]
        m: f64,
    },
    /// `S_n/sqrt(<S>_n) <= -x` and `b <= sqrt(<S>_n) <= bM`
    NormSqrtWindow {
        x: f64,
        b: f64,
        #[serde(rename = "M")]
        m: f64,
    },
    /// `T_n >= x` and `b <= sqrt([S]_n) <= bM`
    Tstat {
        x: f64,
        b: f64,
        #[serde(rename = "M")]
        m: f64,
    },
    /// `|theta_hat - theta| >= x` and `sum X_{k-1}^2 >= y`; `y = 0` gives
    /// the marginal deviation event.
    ArAbs {
        x: f64,
        #[serde(default)]
        y: f64,
    },
    /// `|theta_hat - theta| sqrt(sum X_{k-1}^2) >= x` and the energy window
    ArSqrtWindow {
        x: f64,
        b: f64,
        #[serde(rename = "M")]
        m: f64,
    },
    /// `sum xi_i^2 <= n E xi^2 - y` (lower tail of the squared increments)
    ChenLower { y: f64 },
}

impl TailEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TailEvent::SelfNormUpper { .. } => "self_norm_upper",
            TailEvent::SelfNormUpperJoint { .. } => "self_norm_upper_joint",
            TailEvent::NormLower { .. } => "norm_lower",
            TailEvent::NormLowerJoint { .. } => "norm_lower_joint",
            TailEvent::SelfNormSqrtWindow { .. } => "self_norm_sqrt_window",
            TailEvent::NormSqrtWindow { .. } => "norm_sqrt_window",
            TailEvent::Tstat { .. } => "tstat",
            TailEvent::ArAbs { .. } => "ar_abs",
            TailEvent::ArSqrtWindow { .. } => "ar_sqrt_window",
            TailEvent::ChenLower { .. } => "chen_lower",
        }
    }

    pub fn x(&self) -> Option<f64> {
        match *self {
            TailEvent::SelfNormUpper { x }
            | TailEvent::SelfNormUpperJoint { x, .. }
            | TailEvent::NormLower { x }
            | TailEvent::NormLowerJoint { x, .. }
            | TailEvent::SelfNormSqrtWindow { x, .. }
            | TailEvent::NormSqrtWindow { x, .. }
            | TailEvent::Tstat { x, .. }
            | TailEvent::ArAbs { x, .. }
            | TailEvent::ArSqrtWindow { x, .. } => Some(x),
            TailEvent::ChenLower { .. } => None,
        }
    }

    pub fn y(&self) -> Option<f64> {
        match *self {
            TailEvent::SelfNormUpperJoint { y, .. }
            | TailEvent::NormLowerJoint { y, .. }
            | TailEvent::ArAbs { y, .. }
            | TailEvent::ChenLower { y } => Some(y),
            _ => None,
        }
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        match *self {
            TailEvent::SelfNormSqrtWindow { b, m, .. }
            | TailEvent::NormSqrtWindow { b, m, .. }
            | TailEvent::Tstat { b, m, .. }
            | TailEvent::ArSqrtWindow { b, m, .. } => Some((b, m)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if let Some(x) = self.x() {
            if !(x > 0.0 && x.is_finite()) {
                return Err(domain("x", x, "> 0"));
            }
        }
        match *self {
            TailEvent::SelfNormUpperJoint { y, .. }
            | TailEvent::NormLowerJoint { y, .. }
            | TailEvent::ChenLower { y } => {
                if !(y > 0.0 && y.is_finite()) {
                    return Err(domain("y", y, "> 0"));
                }
            }
            TailEvent::ArAbs { y, .. } if !(y >= 0.0 && y.is_finite()) => {
                return Err(domain("y", y, ">= 0"));
            }
            _ => {}
        }
        if let Some((b, m)) = self.window() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(domain("b", b, "> 0"));
            }
            if !(m >= 1.0 && m.is_finite()) {
                return Err(domain("M", m, ">= 1"));
            }
        }
        Ok(())
    }

    fn is_ar_event(&self) -> bool {
        matches!(
            self,
            TailEvent::ArAbs { .. } | TailEvent::ArSqrtWindow { .. }
        )
    }

    /// Checks that the model can realize this event at all (statistic
    /// availability, independence requirements).
    pub fn check_model(&self, model: &Model) -> Result<(), VerifyError> {
        match (self.is_ar_event(), model) {
            (true, Model::Ar1 { .. }) => Ok(()),
            (true, Model::Martingale(_)) => Err(VerifyError::Incompatible(format!(
                "event {} needs an AR(1) model",
                self.kind()
            ))),
            (false, Model::Ar1 { .. }) => Err(VerifyError::Incompatible(format!(
                "event {} needs a martingale model",
                self.kind()
            ))),
            (false, Model::Martingale(m)) => {
                if matches!(self, TailEvent::ChenLower { .. })
                    && !matches!(m, IncrementModel::Iid { .. })
                {
                    return Err(VerifyError::Incompatible(
                        "chen_lower needs independent increments".to_string(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn mart_indicator(&self, s: &MartSummary, ctx: &EventContext) -> bool {
        match *self {
            TailEvent::SelfNormUpper { x } => s.sq_variation > 0.0 && s.sum >= x * s.sq_variation,
            TailEvent::SelfNormUpperJoint { x, y } => {
                s.sq_variation > 0.0 && s.sum >= x * s.sq_variation && s.sq_variation >= y
            }
            TailEvent::NormLower { x } => s.cond_variance > 0.0 && s.sum <= -x * s.cond_variance,
            TailEvent::NormLowerJoint { x, y } => {
                s.cond_variance > 0.0 && s.sum <= -x * s.cond_variance && s.cond_variance >= y
            }
            TailEvent::SelfNormSqrtWindow { x, b, m } => {
                let r = s.sq_variation.sqrt();
                r > 0.0 && s.sum >= x * r && b <= r && r <= b * m
            }
            TailEvent::NormSqrtWindow { x, b, m } => {
                let r = s.cond_variance.sqrt();
                r > 0.0 && s.sum <= -x * r && b <= r && r <= b * m
            }
            TailEvent::ChenLower { y } => s.sq_variation <= ctx.expected_sq_total - y,
            _ => unreachable!("not a martingale event"),
        }
    }

    pub(crate) fn tstat_indicator(&self, s: &TstatSummary) -> bool {
        match *self {
            TailEvent::Tstat { x, b, m } => {
                s.t >= x && b <= s.sqrt_sq_variation && s.sqrt_sq_variation <= b * m
            }
            _ => unreachable!("not a t-statistic event"),
        }
    }

    pub(crate) fn ar_indicator(&self, s: &ArSummary) -> bool {
        match *self {
            TailEvent::ArAbs { x, y } => s.theta_err.abs() >= x && s.energy >= y,
            TailEvent::ArSqrtWindow { x, b, m } => {
                let r = s.energy.sqrt();
                s.theta_err.abs() * r >= x && b <= r && r <= b * m
            }
            _ => unreachable!("not an AR event"),
        }
    }
}

/// Per-replication statistics of a t-statistic batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TstatSummary {
    pub t: f64,
    pub sqrt_sq_variation: f64,
}

/// Model-level constants an event indicator may need.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EventContext {
    /// `n * E xi^2` for the Chen lower-tail event.
    pub expected_sq_total: f64,
}

impl EventContext {
    pub(crate) fn for_model(model: &Model) -> Self {
        let expected_sq_total = match model {
            Model::Martingale(m) => m.n() as f64 * m.dist().variance(),
            Model::Ar1 { .. } => f64::NAN,
        };
        EventContext { expected_sq_total }
    }
}

/// One replication batch, preserving replication order.
#[derive(Debug, Clone)]
pub enum CaseBatch {
    Mart(Vec<MartSummary>),
    Tstat(Vec<TstatSummary>),
    Ar(Vec<ArSummary>),
}

impl CaseBatch {
    pub fn len(&self) -> usize {
        match self {
            CaseBatch::Mart(v) => v.len(),
            CaseBatch::Tstat(v) => v.len(),
            CaseBatch::Ar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Simulates the replication batch an event needs. Replication `r` of
/// stream `stream` always sees the RNG stream `(master_seed, stream, r)`.
pub fn generate_batch(
    model: &Model,
    event: &TailEvent,
    reps: u64,
    master_seed: u64,
    stream: u64,
) -> Result<CaseBatch, VerifyError> {
    model.validate()?;
    event.validate()?;
    event.check_model(model)?;
    if reps == 0 {
        return Err(domain("reps", 0.0, ">= 1"));
    }
    Ok(match model {
        Model::Martingale(m) => {
            if matches!(event, TailEvent::Tstat { .. }) {
                let m = m.clone();
                CaseBatch::Tstat(map_replications(reps, move |rep| {
                    let mut rng = ReplicationRng::new(master_seed, stream, rep);
                    tstat_replication(&m, &mut rng)
                }))
            } else {
                let m = m.clone();
                CaseBatch::Mart(map_replications(reps, move |rep| {
                    let mut rng = ReplicationRng::new(master_seed, stream, rep);
                    simulate_summary(&m, &mut rng)
                }))
            }
        }
        Model::Ar1 { theta, noise_c, n } => {
            let (theta, noise_c, n) = (*theta, *noise_c, *n);
            CaseBatch::Ar(map_replications(reps, move |rep| {
                let mut rng = ReplicationRng::new(master_seed, stream, rep);
                simulate_ar_summary(n, theta, noise_c, &mut rng)
            }))
        }
    })
}

/// One t-statistic replication: simulate increments, compute `T_n` from the
/// definition (two-pass centered variance) and `sqrt([S]_n)`. Degenerate
/// all-equal samples produce an infinite `T_n` with the sign of the mean.
fn tstat_replication(model: &IncrementModel, rng: &mut ReplicationRng) -> TstatSummary {
    let n = model.n();
    let mut sample = Vec::with_capacity(n);
    let mut sum = 0.0;
    let mut sqv = 0.0;
    for k in 1..=n {
        let (xi, _) = model.step(k, sum, sqv, rng);
        sum += xi;
        sqv += xi * xi;
        sample.push(xi);
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let ss: f64 = sample.iter().map(|v| (v - mean) * (v - mean)).sum();
    let t = if ss == 0.0 {
        if mean > 0.0 {
            f64::INFINITY
        } else if mean < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        nf.sqrt() * mean / (ss / (nf - 1.0)).sqrt()
    };
    TstatSummary {
        t,
        sqrt_sq_variation: sqv.sqrt(),
    }
}

/// Counts event occurrences over a batch.
pub(crate) fn count_hits(event: &TailEvent, batch: &CaseBatch, ctx: &EventContext) -> u64 {
    match batch {
        CaseBatch::Mart(v) => v.iter().filter(|s| event.mart_indicator(s, ctx)).count() as u64,
        CaseBatch::Tstat(v) => v.iter().filter(|s| event.tstat_indicator(s)).count() as u64,
        CaseBatch::Ar(v) => v.iter().filter(|s| event.ar_indicator(s)).count() as u64,
    }
}

/// Simulates `reps` independent replications and estimates the event
/// probability with an exact binomial confidence interval at `ci_level`.
pub fn empirical_tail(
    model: &Model,
    event: &TailEvent,
    reps: u64,
    master_seed: u64,
    stream: u64,
    ci_level: f64,
) -> Result<EmpiricalTail, VerifyError> {
    let batch = generate_batch(model, event, reps, master_seed, stream)?;
    let ctx = EventContext::for_model(model);
    EmpiricalTail::from_hits(count_hits(event, &batch, &ctx), reps, ci_level)
}
