//! AR(1) simulation with bounded noise and least-squares estimation.

use std::io::{BufRead, Write};

use super::{domain, DistSpec, SimError};
use crate::rng::ReplicationRng;

/// One realized AR(1) path `X_0 .. X_n` with `X_0 = eps_0` and
/// `X_{k} = theta X_{k-1} + eps_k`. The driving noises are retained so the
/// estimator identity `theta_hat - theta = sum X_{k-1} eps_k / sum X_{k-1}^2`
/// can be checked directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ArPath {
    pub observations: Vec<f64>,
    pub noises: Vec<f64>,
    pub noise_bound: f64,
    pub theta_true: Option<f64>,
    pub seed: u64,
}

impl ArPath {
    pub fn n(&self) -> usize {
        self.observations.len() - 1
    }

    /// `sum_{k=1..n} X_{k-1}^2`
    pub fn design_energy(&self) -> f64 {
        let x = &self.observations;
        (0..self.n()).map(|k| x[k] * x[k]).sum()
    }

    /// `sum_{k=1..n} X_{k-1} X_k`
    pub fn cross_term(&self) -> f64 {
        let x = &self.observations;
        (0..self.n()).map(|k| x[k] * x[k + 1]).sum()
    }

    /// `sum_{k=1..n} X_{k-1} eps_k`
    pub fn noise_cross(&self) -> f64 {
        let x = &self.observations;
        (0..self.n()).map(|k| x[k] * self.noises[k + 1]).sum()
    }
}

/// Least-squares fit of the AR(1) coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArFit {
    pub theta_hat: f64,
    pub design_energy: f64,
    pub n: usize,
}

/// Simulates an AR(1) path. `noise` must be `UniformNoise { c }`; the
/// stationarity condition `|theta| < 1` is required, and every observation
/// then satisfies `|X_k| <= c / (1 - |theta|)`.
pub fn simulate_ar1(n: usize, theta: f64, noise: DistSpec, seed: u64) -> Result<ArPath, SimError> {
    let c = match noise {
        DistSpec::UniformNoise { c } => {
            noise.validate()?;
            c
        }
        _ => return Err(domain("noise", f64::NAN, "must be uniform_noise")),
    };
    if !(theta.abs() < 1.0) {
        return Err(domain("theta", theta, "|theta| < 1"));
    }
    if n == 0 {
        return Err(domain("n", 0.0, ">= 1"));
    }
    let mut rng = ReplicationRng::from_seed(seed);
    let mut observations = Vec::with_capacity(n + 1);
    let mut noises = Vec::with_capacity(n + 1);
    let eps0 = noise.sample(&mut rng);
    observations.push(eps0);
    noises.push(eps0);
    for _ in 1..=n {
        let eps = noise.sample(&mut rng);
        let x = theta * observations[observations.len() - 1] + eps;
        observations.push(x);
        noises.push(eps);
    }
    Ok(ArPath {
        observations,
        noises,
        noise_bound: c,
        theta_true: Some(theta),
        seed,
    })
}

/// Per-replication statistics for verification batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArSummary {
    /// `theta_hat - theta` (NaN on the measure-zero event of zero energy).
    pub theta_err: f64,
    /// `sum X_{k-1}^2`
    pub energy: f64,
}

/// Streaming AR(1) replication: simulates and fits without storing the path.
/// Consumes `n + 1` RNG draws, matching [`simulate_ar1`].
pub fn simulate_ar_summary(
    n: usize,
    theta: f64,
    noise_c: f64,
    rng: &mut ReplicationRng,
) -> ArSummary {
    let noise = DistSpec::UniformNoise { c: noise_c };
    let mut x_prev = noise.sample(rng);
    let mut energy = 0.0;
    let mut cross = 0.0;
    for _ in 1..=n {
        let eps = noise.sample(rng);
        let x = theta * x_prev + eps;
        energy += x_prev * x_prev;
        cross += x_prev * x;
        x_prev = x;
    }
    let theta_err = if energy > 0.0 {
        cross / energy - theta
    } else {
        f64::NAN
    };
    ArSummary { theta_err, energy }
}

/// Least-squares estimate from a raw observation series `X_0 .. X_n`.
pub fn ls_estimate_series(observations: &[f64]) -> Result<ArFit, SimError> {
    if observations.len() < 2 {
        return Err(SimError::Degenerate("need at least two observations"));
    }
    let n = observations.len() - 1;
    let mut energy = 0.0;
    let mut cross = 0.0;
    for k in 0..n {
        energy += observations[k] * observations[k];
        cross += observations[k] * observations[k + 1];
    }
    if energy == 0.0 {
        return Err(SimError::Degenerate("zero design energy"));
    }
    Ok(ArFit {
        theta_hat: cross / energy,
        design_energy: energy,
        n,
    })
}

pub fn ls_estimate(path: &ArPath) -> Result<ArFit, SimError> {
    ls_estimate_series(&path.observations)
}

/// Writes an observation series as CSV with header `k,x`.
pub fn write_ar_csv<W: Write>(observations: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,x")?;
    for (k, x) in observations.iter().enumerate() {
        writeln!(w, "{k},{x}")?;
    }
    Ok(())
}

/// Reads an observation series written by [`write_ar_csv`]: header `k,x`,
/// then one `index,value` row per observation with consecutive indices.
pub fn read_ar_csv<R: BufRead>(r: R) -> Result<Vec<f64>, SimError> {
    let mut observations = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SimError::Csv {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if i == 0 {
            if trimmed != "k,x" {
                return Err(SimError::Csv {
                    line: 1,
                    reason: format!("expected header \"k,x\", got \"{trimmed}\""),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (k_str, x_str) = match (fields.next(), fields.next(), fields.next()) {
            (Some(k), Some(x), None) => (k, x),
            _ => {
                return Err(SimError::Csv {
                    line: i + 1,
                    reason: "expected exactly two fields".to_string(),
                })
            }
        };
        let k: usize = k_str.trim().parse().map_err(|_| SimError::Csv {
            line: i + 1,
            reason: format!("bad index \"{k_str}\""),
        })?;
        if k != observations.len() {
            return Err(SimError::Csv {
                line: i + 1,
                reason: format!("expected index {}, got {k}", observations.len()),
            });
        }
        let x: f64 = x_str.trim().parse().map_err(|_| SimError::Csv {
            line: i + 1,
            reason: format!("bad value \"{x_str}\""),
        })?;
        observations.push(x);
    }
    if observations.len() < 2 {
        return Err(SimError::Degenerate("need at least two observations"));
    }
    Ok(observations)
}
