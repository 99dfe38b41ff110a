//! Supermartingale mean checks and the two-term variance-shortfall
//! decomposition check.

use serde::Serialize;

use super::{domain, EmpiricalTail, VerifyError};
use crate::bounds::{chen_lower_tail, self_norm_joint, BoundValue};
use crate::exec::{map_replications, mean_and_se};
use crate::rng::ReplicationRng;
use crate::sim::{
    cond_variance_weight, simulate_summary, sq_variation_weight, DistSpec, IncrementModel,
};

/// Which exponential supermartingale functional to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `exp{lambda S_n + (lambda + log(1-lambda)) [S]_n}`, `lambda` in `[0,1)`
    SqVariation,
    /// `exp{-lambda S_n - (e^lambda - 1 - lambda) <S>_n}`, `lambda >= 0`
    CondVariance,
}

/// Per-grid-point outcome of a supermartingale mean check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuitePoint {
    pub lambda: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `mean <= 1 + 3 * std_error`
    pub pass: bool,
}

/// Estimates `E[functional]` at every `lambda` in the grid over one shared
/// batch of `reps` trajectories and checks the supermartingale inequality
/// `E <= 1` within three standard errors.
pub fn supermartingale_suite(
    model: &IncrementModel,
    kind: FunctionalKind,
    lambda_grid: &[f64],
    reps: u64,
    master_seed: u64,
    stream: u64,
) -> Result<Vec<SuitePoint>, VerifyError> {
    model.validate()?;
    if lambda_grid.is_empty() {
        return Err(VerifyError::Config("empty lambda grid".to_string()));
    }
    if reps < 2 {
        return Err(domain("reps", reps as f64, ">= 2"));
    }
    for &lambda in lambda_grid {
        match kind {
            FunctionalKind::SqVariation => {
                if !(0.0..1.0).contains(&lambda) {
                    return Err(domain("lambda", lambda, "in [0, 1)"));
                }
            }
            FunctionalKind::CondVariance => {
                if !(lambda >= 0.0) {
                    return Err(domain("lambda", lambda, ">= 0"));
                }
            }
        }
    }
    let m = model.clone();
    let batch = map_replications(reps, move |rep| {
        let mut rng = ReplicationRng::new(master_seed, stream, rep);
        simulate_summary(&m, &mut rng)
    });
    let mut points = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let values: Vec<f64> = batch
            .iter()
            .map(|s| match kind {
                FunctionalKind::SqVariation => {
                    sq_variation_weight(s.sum, s.sq_variation, lambda).expect("validated lambda")
                }
                FunctionalKind::CondVariance => {
                    cond_variance_weight(s.sum, s.cond_variance, lambda).expect("validated lambda")
                }
            })
            .collect();
        let (mean, std_error) = mean_and_se(&values);
        points.push(SuitePoint {
            lambda,
            mean,
            std_error,
            pass: mean <= 1.0 + 3.0 * std_error,
        });
    }
    Ok(points)
}

/// Report of the two-term decomposition check
/// `P(S/[S] >= x) <= P(S/[S] >= x, [S] >= B^2(1-eps)) + P([S] - B^2 < -B^2 eps)`
/// with `B^2 = n E xi^2`, each term checked against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub full_tail: EmpiricalTail,
    pub joint_tail: EmpiricalTail,
    pub shortfall_tail: EmpiricalTail,
    /// `p_hat <= p_hat_joint + p_hat_shortfall`; exact set inclusion on the
    /// shared sample, so this can only fail on a bookkeeping bug.
    pub subadditive: bool,
    pub joint_bound: BoundValue,
    pub joint_pass: bool,
    pub shortfall_bound: BoundValue,
    pub shortfall_pass: bool,
    pub pass: bool,
}

/// Runs the decomposition check for an i.i.d. model over one shared batch.
#[allow(clippy::too_many_arguments)]
pub fn two_term_decomposition_check(
    dist: DistSpec,
    n: usize,
    x: f64,
    epsilon: f64,
    moment_p: f64,
    reps: u64,
    master_seed: u64,
    ci_level: f64,
) -> Result<DecompositionReport, VerifyError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain("epsilon", epsilon, "in (0, 1)"));
    }
    if !(x > 0.0) {
        return Err(domain("x", x, "> 0"));
    }
    let model = IncrementModel::iid(dist, n);
    model.validate()?;
    let b2 = n as f64 * dist.variance();
    let y_joint = b2 * (1.0 - epsilon);
    let y_short = b2 * epsilon;

    let m = model.clone();
    let batch = map_replications(reps, move |rep| {
        let mut rng = ReplicationRng::new(master_seed, 0, rep);
        simulate_summary(&m, &mut rng)
    });

    let mut full = 0u64;
    let mut joint = 0u64;
    let mut short = 0u64;
    for s in &batch {
        let upper = s.sq_variation > 0.0 && s.sum >= x * s.sq_variation;
        if upper {
            full += 1;
        }
        if upper && s.sq_variation >= y_joint {
            joint += 1;
        }
        if s.sq_variation - b2 < -y_short {
            short += 1;
        }
    }
    let full_tail = EmpiricalTail::from_hits(full, reps, ci_level)?;
    let joint_tail = EmpiricalTail::from_hits(joint, reps, ci_level)?;
    let shortfall_tail = EmpiricalTail::from_hits(short, reps, ci_level)?;

    // the joint term is checked at the Bernstein rate
    let (_, joint_bound) = self_norm_joint(x, y_joint)?;
    let sum_pmoment = n as f64 * dist.moment_2p(moment_p);
    let shortfall_bound = chen_lower_tail(y_short, sum_pmoment, moment_p)?;

    let subadditive = full <= joint + short;
    let joint_pass = joint_tail.ci_low <= joint_bound.clamped;
    let shortfall_pass = shortfall_tail.ci_low <= shortfall_bound.clamped;
    let pass = subadditive && joint_pass && shortfall_pass;
    Ok(DecompositionReport {
        full_tail,
        joint_tail,
        shortfall_tail,
        subadditive,
        joint_bound,
        joint_pass,
        shortfall_bound,
        shortfall_pass,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_mean_is_exactly_one() {
        let model = IncrementModel::iid(DistSpec::Rademacher, 10);
        let pts =
            supermartingale_suite(&model, FunctionalKind::SqVariation, &[0.0], 100, 5, 0).unwrap();
        assert_eq!(pts[0].mean, 1.0);
        assert_eq!(pts[0].std_error, 0.0);
        assert!(pts[0].pass);
    }

    #[test]
    fn rademacher_exact_mean_matches_enumeration() {
        // E[U_2(lambda)] = ((1-lambda) e^lambda cosh(lambda))^2; at 1e5 reps
        // the sample mean should be within 5 SE of it.
        let model = IncrementModel::iid(DistSpec::Rademacher, 2);
        let lambda = 0.5f64;
        let pts = supermartingale_suite(
            &model,
            FunctionalKind::SqVariation,
            &[lambda],
            100_000,
            6,
            0,
        )
        .unwrap();
        let exact = ((1.0 - lambda) * lambda.exp() * lambda.cosh()).powi(2);
        assert!(exact <= 1.0);
        assert!(
            (pts[0].mean - exact).abs() <= 5.0 * pts[0].std_error.max(1e-9),
            "mean {} vs exact {exact}",
            pts[0].mean
        );
        assert!(pts[0].pass);
    }

    #[test]
    fn both_functionals_pass_on_grids() {
        // The pass criterion is a 3-SE statistical test; the margin below 1
        // is small at low lambda, so the seed is pinned. A failing seed at
        // this replication count is a ~4-sigma fluctuation, not a bug.
        let model = IncrementModel::cond_symmetric(DistSpec::UniformSym { half_width: 1.0 }, 20);
        let u_grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        for p in supermartingale_suite(&model, FunctionalKind::SqVariation, &u_grid, 20_000, 8, 0)
            .unwrap()
        {
            assert!(p.pass, "U at lambda {}", p.lambda);
        }
        let w_grid = [0.1, 0.5, 1.0, 2.0];
        for p in supermartingale_suite(&model, FunctionalKind::CondVariance, &w_grid, 20_000, 8, 1)
            .unwrap()
        {
            assert!(p.pass, "W at lambda {}", p.lambda);
        }
    }

    #[test]
    fn lambda_domain_enforced_per_kind() {
        let model = IncrementModel::iid(DistSpec::Rademacher, 5);
        assert!(
            supermartingale_suite(&model, FunctionalKind::SqVariation, &[1.0], 100, 0, 0).is_err()
        );
        assert!(
            supermartingale_suite(&model, FunctionalKind::CondVariance, &[-0.5], 100, 0, 0)
                .is_err()
        );
        // lambda > 1 is fine for the conditional-variance functional
        assert!(
            supermartingale_suite(&model, FunctionalKind::CondVariance, &[2.5], 100, 0, 0).is_ok()
        );
    }

    #[test]
    fn rademacher_decomposition_has_no_shortfall() {
        // [S]_n = n = B^2 deterministically
        let report =
            two_term_decomposition_check(DistSpec::Rademacher, 30, 0.3, 0.2, 2.0, 5000, 8, 0.99)
                .unwrap();
        assert_eq!(report.shortfall_tail.hits, 0);
        assert!(report.subadditive);
        assert!(report.pass);
    }

    #[test]
    fn uniform_decomposition_passes() {
        let report = two_term_decomposition_check(
            DistSpec::UniformSym { half_width: 1.0 },
            200,
            0.3,
            0.2,
            2.0,
            20_000,
            9,
            0.99,
        )
        .unwrap();
        assert!(report.subadditive);
        assert!(report.joint_pass);
        assert!(report.shortfall_pass);
        assert!(report.pass);
    }

    #[test]
    fn epsilon_near_one_is_accepted() {
        // boundary behavior: shortfall level close to B^2 keeps the Chen
        // bound valid (y < sum E zeta); report only
        let report = two_term_decomposition_check(
            DistSpec::UniformSym { half_width: 1.0 },
            50,
            0.5,
            0.999,
            2.0,
            2000,
            10,
            0.99,
        )
        .unwrap();
        assert!(report.shortfall_bound.raw > 0.0);
        assert!(two_term_decomposition_check(
            DistSpec::UniformSym { half_width: 1.0 },
            50,
            0.5,
            1.0,
            2.0,
            2000,
            10,
            0.99
        )
        .is_err());
    }
}
