//! Monte Carlo verification: empirical tail estimation with exact binomial
//! confidence intervals, expectation-type bound estimation with optimized
//! Hölder exponent, supermartingale mean checks, and the config-driven
//! runner that ties them to the closed-form bounds.
//!
//! The domination verdict compares the *lower* confidence limit of the
//! empirical tail against the clamped bound: a true bound may fall below the
//! point estimate by sampling noise, but (up to the CI level) not below the
//! true probability.

mod config;
mod estimate;
mod events;
mod runner;
mod suite;

pub use config::{BoundSpec, CaseConfig, ExperimentConfig, ModelSpec};
pub use estimate::{
    ar_expectation_estimate, expectation_bound_estimate, optimize_holder_p, ExpectationKind,
    HolderOptimum, HOLDER_P_MAX, HOLDER_P_MIN,
};
pub use events::{empirical_tail, generate_batch, CaseBatch, Model, TailEvent, TstatSummary};
pub use runner::{
    run_config, write_report_csv, BoundOutcome, CaseResult, VerificationReport, REPORT_CSV_HEADER,
};
pub use suite::{
    supermartingale_suite, two_term_decomposition_check, DecompositionReport, FunctionalKind,
    SuitePoint,
};

use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::bounds::{BoundError, BoundValue};
use crate::rates::RateError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("{name} = {value} outside domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("incompatible case: {0}")]
    Incompatible(String),
    #[error("config error: {0}")]
    Config(String),
}

pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> VerifyError {
    VerifyError::Domain {
        name,
        value,
        constraint,
    }
}

/// Exact binomial (Clopper-Pearson) confidence interval via the
/// beta-quantile characterization.
pub fn clopper_pearson(hits: u64, reps: u64, level: f64) -> Result<(f64, f64), VerifyError> {
    if reps == 0 {
        return Err(domain("reps", 0.0, ">= 1"));
    }
    if hits > reps {
        return Err(domain("hits", hits as f64, "<= reps"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(domain("level", level, "in (0, 1)"));
    }
    let alpha = 1.0 - level;
    let (h, n) = (hits as f64, reps as f64);
    let low = if hits == 0 {
        0.0
    } else {
        Beta::new(h, n - h + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let high = if hits == reps {
        1.0
    } else {
        Beta::new(h + 1.0, n - h)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((low, high))
}

/// Empirical tail estimate: hit count, point estimate, and exact binomial
/// confidence interval at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalTail {
    pub hits: u64,
    pub reps: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

impl EmpiricalTail {
    pub fn from_hits(hits: u64, reps: u64, level: f64) -> Result<Self, VerifyError> {
        let (ci_low, ci_high) = clopper_pearson(hits, reps, level)?;
        Ok(Self {
            hits,
            reps,
            p_hat: hits as f64 / reps as f64,
            ci_low,
            ci_high,
            level,
        })
    }
}

/// Outcome of one empirical-vs-theoretical comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// FAIL iff the lower confidence limit exceeds the clamped bound. The slack
/// `clamped - p_hat` is reported alongside (negative slack with a PASS
/// verdict means the point estimate sits above the bound but within noise).
pub fn check_domination(tail: &EmpiricalTail, bound: &BoundValue) -> (Verdict, f64) {
    let verdict = if tail.ci_low > bound.clamped {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    (verdict, bound.clamped - tail.p_hat)
}
