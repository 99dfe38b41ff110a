//! Student's t-statistic and the heavy-on-left empirical checker.

use serde::Serialize;

use super::{domain, DistSpec, SimError};
use crate::exec::{map_replications, mean_and_se};
use crate::rng::ReplicationRng;

/// `T_n = sqrt(n) xi_bar / ((n-1)^{-1} sum (xi_j - xi_bar)^2)^{1/2}`,
/// computed from the definition with a two-pass centered variance.
pub fn t_statistic(sample: &[f64]) -> Result<f64, SimError> {
    let n = sample.len();
    if n < 2 {
        return Err(domain("n", n as f64, ">= 2"));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let ss: f64 = sample.iter().map(|x| (x - mean) * (x - mean)).sum();
    if ss == 0.0 {
        return Err(SimError::Degenerate("all sample values equal"));
    }
    let sample_var = ss / (nf - 1.0);
    Ok(nf.sqrt() * mean / sample_var.sqrt())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeavyOnLeftPoint {
    pub a: f64,
    /// Monte Carlo estimate of `E[min(|X|, a) sign(X)]`.
    pub mean: f64,
    pub std_error: f64,
    /// Whether the estimate is consistent with `E[T_a] <= 0` at 3 standard
    /// errors.
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeavyOnLeftReport {
    pub points: Vec<HeavyOnLeftPoint>,
    /// True when no truncation level rejects `E[T_a] <= 0`.
    pub consistent_with_heavy_on_left: bool,
}

/// Estimates `E[T_a(X)]` for each truncation level in `a_grid`, where
/// `T_a(x) = min(|x|, a) sign(x)`, and reports whether the law is
/// empirically consistent with being heavy on left. The same draw batch is
/// reused across truncation levels.
pub fn heavy_on_left_test(
    dist: &DistSpec,
    a_grid: &[f64],
    reps: u64,
    master_seed: u64,
) -> Result<HeavyOnLeftReport, SimError> {
    dist.validate()?;
    if reps < 1000 {
        return Err(domain("reps", reps as f64, ">= 1000"));
    }
    if a_grid.is_empty() {
        return Err(SimError::Degenerate("empty truncation grid"));
    }
    for &a in a_grid {
        if !(a > 0.0) {
            return Err(domain("a", a, "> 0"));
        }
    }
    let d = *dist;
    let draws = map_replications(reps, move |rep| {
        let mut rng = ReplicationRng::new(master_seed, 0, rep);
        d.sample(&mut rng)
    });
    let mut points = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let truncated: Vec<f64> = draws.iter().map(|&x| x.abs().min(a) * x.signum()).collect();
        let (mean, std_error) = mean_and_se(&truncated);
        let consistent = mean <= 3.0 * std_error;
        points.push(HeavyOnLeftPoint {
            a,
            mean,
            std_error,
            consistent,
        });
    }
    let consistent_with_heavy_on_left = points.iter().all(|p| p.consistent);
    Ok(HeavyOnLeftReport {
        points,
        consistent_with_heavy_on_left,
    })
}
