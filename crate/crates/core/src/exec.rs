//! Replication-loop execution: rayon data-parallel by default, sequential
//! fallback when the `parallel` feature is disabled.
//!
//! Results are collected in replication order and reduced sequentially by
//! the callers, so output bytes do not depend on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over replication indices `0..reps`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_replications<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

/// Map `f` over replication indices `0..reps`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_replications<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_replications_seq(reps, f)
}

/// Always-sequential variant, kept for benchmark comparison and as the
/// fallback body.
pub fn map_replications_seq<T, F>(reps: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..reps).map(f).collect()
}

/// Compensated (Neumaier) summation over a slice, in slice order.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of the mean, via compensated sums.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "need at least two values");
    let mean = stable_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = stable_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
