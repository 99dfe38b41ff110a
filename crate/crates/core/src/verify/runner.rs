//! Executes an [`ExperimentConfig`]: one replication batch per case, every
//! configured bound evaluated against the empirical tail, results assembled
//! into a deterministic report.

use std::io::Write;

use serde::Serialize;

use super::config::{BoundSpec, ExperimentConfig, SCHEMA_VERSION};
use super::estimate::{
    ar_expectation_estimate, expectation_bound_estimate, optimize_holder_p, ExpectationKind,
    HOLDER_P_MAX, HOLDER_P_MIN,
};
use super::events::{count_hits, generate_batch, CaseBatch, EventContext, Model, TailEvent};
use super::{check_domination, domain, EmpiricalTail, Verdict, VerifyError};
use crate::bounds::{
    ar_gaussian_baseline, ar_joint, ar_peeling, chen_lower_tail, iid_self_norm, iid_self_norm_auto,
    norm_lower_joint, peeling_normalized, peeling_self_norm, self_norm_joint, sym_gaussian_joint,
    tstat_peeling, BoundValue, FormulaId,
};
use crate::sim::{ArSummary, IncrementModel, MartSummary};

#[derive(Debug, Clone, Serialize)]
pub struct BoundOutcome {
    pub bound: BoundValue,
    pub verdict: Verdict,
    /// `bound.clamped - p_hat`
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub model: String,
    pub n: usize,
    pub event: TailEvent,
    pub reps: u64,
    pub tail: EmpiricalTail,
    pub bounds: Vec<BoundOutcome>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub ci_level: f64,
    pub all_pass: bool,
    pub cases: Vec<CaseResult>,
}

/// Runs every case of the config. `debug_bound_scale` multiplies each bound
/// by a factor before the verdict — a harness self-test hook for forcing
/// failures, recorded in the bound's parameter echo when used.
pub fn run_config(
    config: &ExperimentConfig,
    debug_bound_scale: Option<f64>,
) -> Result<VerificationReport, VerifyError> {
    config.validate()?;
    let mut cases = Vec::with_capacity(config.cases.len());
    let mut all_pass = true;
    for index in 0..config.cases.len() {
        let (name, model, n, reps) = config.resolve(index);
        let event = config.cases[index].event;
        let batch = generate_batch(&model, &event, reps, config.master_seed, index as u64)?;
        let ctx = EventContext::for_model(&model);
        let hits = count_hits(&event, &batch, &ctx);
        let tail = EmpiricalTail::from_hits(hits, reps, config.ci_level)?;

        let mut bounds = Vec::with_capacity(config.cases[index].bounds.len());
        let mut case_pass = true;
        for spec in &config.cases[index].bounds {
            let mut bound = compute_bound(spec, &event, &model, n, &batch)
                .map_err(|e| VerifyError::Config(format!("{name}: {e}")))?;
            if let Some(scale) = debug_bound_scale {
                bound.raw *= scale;
                bound.clamped = bound.raw.min(1.0);
                bound.params.insert("debug_scale", scale);
            }
            let (verdict, slack) = check_domination(&tail, &bound);
            case_pass &= verdict == Verdict::Pass;
            bounds.push(BoundOutcome {
                bound,
                verdict,
                slack,
            });
        }
        all_pass &= case_pass;
        cases.push(CaseResult {
            name,
            model: model.label(),
            n,
            event,
            reps,
            tail,
            bounds,
            pass: case_pass,
        });
    }
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        master_seed: config.master_seed,
        ci_level: config.ci_level,
        all_pass,
        cases,
    })
}

fn mart_batch(batch: &CaseBatch, formula: FormulaId) -> Result<&[MartSummary], VerifyError> {
    match batch {
        CaseBatch::Mart(v) => Ok(v),
        _ => Err(VerifyError::Incompatible(format!(
            "{formula} needs a martingale batch"
        ))),
    }
}

fn ar_batch(batch: &CaseBatch, formula: FormulaId) -> Result<&[ArSummary], VerifyError> {
    match batch {
        CaseBatch::Ar(v) => Ok(v),
        _ => Err(VerifyError::Incompatible(format!(
            "{formula} needs an AR batch"
        ))),
    }
}

fn require_symmetric(model: &Model, formula: FormulaId) -> Result<(), VerifyError> {
    match model {
        Model::Martingale(m) if m.is_conditionally_symmetric() => Ok(()),
        _ => Err(VerifyError::Incompatible(format!(
            "{formula} requires a conditionally symmetric model"
        ))),
    }
}

fn iid_moments(
    model: &Model,
    moment_p: f64,
    formula: FormulaId,
) -> Result<(f64, f64), VerifyError> {
    match model {
        Model::Martingale(IncrementModel::Iid { dist, .. }) => {
            Ok((dist.variance(), dist.moment_2p(moment_p)))
        }
        _ => Err(VerifyError::Incompatible(format!(
            "{formula} requires an i.i.d. model with analytic moments"
        ))),
    }
}

fn ar_params(model: &Model, spec: &BoundSpec) -> Result<(f64, f64, f64), VerifyError> {
    match model {
        Model::Ar1 { theta, noise_c, .. } => {
            let sigma2 = noise_c * noise_c / 3.0;
            let theta_abs = spec.theta_abs_max.unwrap_or_else(|| theta.abs());
            Ok((sigma2, *noise_c, theta_abs))
        }
        _ => Err(VerifyError::Incompatible(
            "AR bound on a non-AR model".to_string(),
        )),
    }
}

fn wrong_event(formula: FormulaId, event: &TailEvent) -> VerifyError {
    VerifyError::Incompatible(format!(
        "{formula} does not apply to event {}",
        event.kind()
    ))
}

/// Expectation-type bound: estimate at a pinned Hölder exponent or optimize
/// it, and record the exponent (and boundary status) in the parameter echo.
fn mc_bound(
    formula: FormulaId,
    estimator: impl Fn(f64) -> Result<f64, VerifyError>,
    holder_p: Option<f64>,
    prefactor: f64,
    base_params: &[(&'static str, f64)],
) -> Result<BoundValue, VerifyError> {
    let mut params = base_params.to_vec();
    let value = match holder_p {
        Some(p) => {
            if !(p > 1.0) {
                return Err(domain("holder_p", p, "> 1"));
            }
            params.push(("holder_p", p));
            estimator(p)?
        }
        None => {
            let opt = optimize_holder_p(&estimator, HOLDER_P_MIN, HOLDER_P_MAX)?;
            params.push(("holder_p", opt.p_star));
            params.push(("p_at_boundary", if opt.at_boundary { 1.0 } else { 0.0 }));
            opt.value
        }
    };
    Ok(BoundValue::new(formula, prefactor * value, &params))
}

fn compute_bound(
    spec: &BoundSpec,
    event: &TailEvent,
    model: &Model,
    n: usize,
    batch: &CaseBatch,
) -> Result<BoundValue, VerifyError> {
    let formula = spec.formula;
    let moment_p = spec.moment_p.unwrap_or(2.0);
    match formula {
        FormulaId::SelfNormJointExact | FormulaId::SelfNormJointBernstein => match *event {
            TailEvent::SelfNormUpperJoint { x, y } => {
                let (exact, relaxed) = self_norm_joint(x, y)?;
                Ok(if formula == FormulaId::SelfNormJointExact {
                    exact
                } else {
                    relaxed
                })
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::SymGaussianJoint => match *event {
            TailEvent::SelfNormUpperJoint { x, y } => {
                require_symmetric(model, formula)?;
                Ok(sym_gaussian_joint(x, y)?)
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::NormLowerJointExact | FormulaId::NormLowerJointBennett => match *event {
            TailEvent::NormLowerJoint { x, y } => {
                let (exact, relaxed) = norm_lower_joint(x, y)?;
                Ok(if formula == FormulaId::NormLowerJointExact {
                    exact
                } else {
                    relaxed
                })
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::PeelingSelfNorm => match *event {
            TailEvent::SelfNormSqrtWindow { x, b, m } => Ok(peeling_self_norm(x, b, m)?),
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::PeelingNormalized => match *event {
            TailEvent::NormSqrtWindow { x, b, m } => Ok(peeling_normalized(x, b, m)?),
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::TstatPeeling => match *event {
            TailEvent::Tstat { x, b, m } => Ok(tstat_peeling(x, n as u64, b, m)?),
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::IidSelfNorm => match *event {
            TailEvent::SelfNormUpper { x } => {
                let (sigma2, m2p) = iid_moments(model, moment_p, formula)?;
                let y = spec.y_split.ok_or_else(|| {
                    VerifyError::Config("iid_self_norm needs y_split".to_string())
                })?;
                Ok(iid_self_norm(x, y, n as u64, sigma2, m2p, moment_p)?)
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::IidSelfNormAuto => match *event {
            TailEvent::SelfNormUpper { x } => {
                let (sigma2, m2p) = iid_moments(model, moment_p, formula)?;
                Ok(iid_self_norm_auto(x, n as u64, sigma2, m2p, moment_p)?)
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::ArJoint | FormulaId::ArGaussianBaseline => match *event {
            TailEvent::ArAbs { x, y } => {
                if !(y > 0.0) {
                    return Err(VerifyError::Config(format!(
                        "{formula} needs an energy level y > 0 in the event"
                    )));
                }
                if formula == FormulaId::ArJoint {
                    let (sigma2, c, theta_abs) = ar_params(model, spec)?;
                    Ok(ar_joint(x, y, sigma2, c, theta_abs)?)
                } else {
                    Ok(ar_gaussian_baseline(x, y)?)
                }
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::ArPeeling => match *event {
            TailEvent::ArSqrtWindow { x, b, m } => {
                let (sigma2, c, theta_abs) = ar_params(model, spec)?;
                Ok(ar_peeling(x, b, m, sigma2, c, theta_abs)?)
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::ChenLowerTail => match *event {
            TailEvent::ChenLower { y } => {
                let (_, m2p) = iid_moments(model, moment_p, formula)?;
                Ok(chen_lower_tail(y, n as f64 * m2p, moment_p)?)
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::BennettVariance | FormulaId::BennettSum => Err(VerifyError::Incompatible(
            format!("{formula} is a reference form; evaluate it via the bound command"),
        )),
        FormulaId::SelfNormMcExact
        | FormulaId::SelfNormMcBernstein
        | FormulaId::SelfNormMcBernsteinMarginal => match *event {
            TailEvent::SelfNormUpper { x } => {
                let kind = match formula {
                    FormulaId::SelfNormMcExact => ExpectationKind::SelfNormExact,
                    FormulaId::SelfNormMcBernstein => ExpectationKind::SelfNormBernstein,
                    _ => ExpectationKind::SelfNormBernsteinMarginal,
                };
                let b = mart_batch(batch, formula)?;
                mc_bound(
                    formula,
                    |p| expectation_bound_estimate(b, x, p, kind),
                    spec.holder_p,
                    1.0,
                    &[("x", x)],
                )
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::NormLowerMcExact | FormulaId::NormLowerMcBennett => match *event {
            TailEvent::NormLower { x } => {
                let kind = if formula == FormulaId::NormLowerMcExact {
                    ExpectationKind::NormLowerExact
                } else {
                    ExpectationKind::NormLowerBennett
                };
                let b = mart_batch(batch, formula)?;
                mc_bound(
                    formula,
                    |p| expectation_bound_estimate(b, x, p, kind),
                    spec.holder_p,
                    1.0,
                    &[("x", x)],
                )
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::SymGaussianSqrtP2 => match *event {
            TailEvent::SelfNormUpper { x } => {
                require_symmetric(model, formula)?;
                if let Some(p) = spec.holder_p {
                    if p != 2.0 {
                        return Err(VerifyError::Config(
                            "sym_gaussian_sqrt_p2 pins holder_p = 2".to_string(),
                        ));
                    }
                }
                let b = mart_batch(batch, formula)?;
                mc_bound(
                    formula,
                    |p| expectation_bound_estimate(b, x, p, ExpectationKind::GaussianRate),
                    Some(2.0),
                    1.0,
                    &[("x", x)],
                )
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::SymGaussianInfP => match *event {
            TailEvent::SelfNormUpper { x } => {
                require_symmetric(model, formula)?;
                let b = mart_batch(batch, formula)?;
                mc_bound(
                    formula,
                    |p| expectation_bound_estimate(b, x, p, ExpectationKind::GaussianRate),
                    spec.holder_p,
                    1.0,
                    &[("x", x)],
                )
            }
            _ => Err(wrong_event(formula, event)),
        },
        FormulaId::ArMc => match *event {
            TailEvent::ArAbs { x, .. } => {
                let (sigma2, c, theta_abs) = ar_params(model, spec)?;
                let kappa = c * c / (3.0 * (1.0 - theta_abs));
                let rate = x * x / (2.0 * (sigma2 + x * kappa));
                let b = ar_batch(batch, formula)?;
                mc_bound(
                    formula,
                    |p| ar_expectation_estimate(b, rate, p),
                    spec.holder_p,
                    2.0,
                    &[("x", x), ("rate", rate)],
                )
            }
            _ => Err(wrong_event(formula, event)),
        },
    }
}

pub const REPORT_CSV_HEADER: &str =
    "case,event,x,y,b,M,model,n,reps,p_hat,ci_low,ci_high,formula,bound_raw,bound_clamped,verdict";

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV report: one row per (case, bound) pair. Float fields use the
/// shortest round-trip representation, so identical runs produce identical
/// bytes.
pub fn write_report_csv<W: Write>(report: &VerificationReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for case in &report.cases {
        let (b, m) = match case.event.window() {
            Some((b, m)) => (Some(b), Some(m)),
            None => (None, None),
        };
        for outcome in &case.bounds {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                case.name,
                case.event.kind(),
                opt_field(case.event.x()),
                opt_field(case.event.y()),
                opt_field(b),
                opt_field(m),
                case.model,
                case.n,
                case.reps,
                case.tail.p_hat,
                case.tail.ci_low,
                case.tail.ci_high,
                outcome.bound.formula,
                outcome.bound.raw,
                outcome.bound.clamped,
                outcome.verdict,
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
            "schema_version": 1,
            "master_seed": 99,
            "ci_level": 0.99,
            "reps": 2000,
            "cases": [
                {
                    "name": "joint-rad",
                    "model": {"type": "iid", "dist": {"type": "rademacher"}},
                    "n": 30,
                    "event": {"type": "self_norm_upper_joint", "x": 0.4, "y": 20.0},
                    "bounds": [
                        {"formula": "self_norm_joint_exact"},
                        {"formula": "self_norm_joint_bernstein"},
                        {"formula": "sym_gaussian_joint"}
                    ]
                },
                {
                    "name": "mc-rad",
                    "model": {"type": "iid", "dist": {"type": "rademacher"}},
                    "n": 30,
                    "event": {"type": "self_norm_upper", "x": 0.4},
                    "bounds": [
                        {"formula": "self_norm_mc_exact"},
                        {"formula": "sym_gaussian_sqrt_p2"},
                        {"formula": "iid_self_norm_auto"}
                    ]
                }
            ]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn small_matrix_passes() {
        let report = run_config(&small_config(), None).unwrap();
        assert!(report.all_pass);
        assert_eq!(report.cases.len(), 2);
        for case in &report.cases {
            for outcome in &case.bounds {
                assert_eq!(outcome.verdict, Verdict::Pass);
            }
        }
    }

    #[test]
    fn falsified_bounds_fail() {
        let report = run_config(&small_config(), Some(1e-6)).unwrap();
        assert!(!report.all_pass);
        let scaled = &report.cases[0].bounds[0].bound;
        assert_eq!(scaled.params.get("debug_scale"), Some(&1e-6));
    }

    #[test]
    fn report_is_deterministic() {
        let a = run_config(&small_config(), None).unwrap();
        let b = run_config(&small_config(), None).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_report_csv(&a, &mut csv_a).unwrap();
        write_report_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let json_a = serde_json::to_string(&a).unwrap();
        let json_b = serde_json::to_string(&b).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn csv_layout() {
        let report = run_config(&small_config(), None).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_CSV_HEADER);
        // 3 bounds + 3 bounds = 6 rows
        assert_eq!(lines.count(), 6);
        assert!(text.contains("joint-rad,self_norm_upper_joint,0.4,20,"));
    }

    #[test]
    fn mismatched_bound_event_is_config_error() {
        let json = r#"{
            "schema_version": 1,
            "master_seed": 1,
            "reps": 1000,
            "cases": [{
                "model": {"type": "iid", "dist": {"type": "rademacher"}},
                "n": 10,
                "event": {"type": "self_norm_upper", "x": 0.4},
                "bounds": [{"formula": "peeling_self_norm"}]
            }]
        }"#;
        let config = ExperimentConfig::from_json(json).unwrap();
        assert!(matches!(
            run_config(&config, None),
            Err(VerifyError::Config(_))
        ));
    }

    #[test]
    fn asymmetric_model_rejects_symmetry_bounds() {
        let json = r#"{
            "schema_version": 1,
            "master_seed": 1,
            "reps": 1000,
            "cases": [{
                "model": {"type": "iid", "dist": {"type": "two_point", "q": 0.3}},
                "n": 10,
                "event": {"type": "self_norm_upper_joint", "x": 0.4, "y": 5.0},
                "bounds": [{"formula": "sym_gaussian_joint"}]
            }]
        }"#;
        let config = ExperimentConfig::from_json(json).unwrap();
        assert!(run_config(&config, None).is_err());
    }

    #[test]
    fn ar_case_runs() {
        let json = r#"{
            "schema_version": 1,
            "master_seed": 5,
            "reps": 2000,
            "cases": [{
                "name": "ar",
                "model": {"type": "ar1", "theta": 0.5, "noise_c": 1.0},
                "n": 100,
                "event": {"type": "ar_abs", "x": 0.25, "y": 20.0},
                "bounds": [{"formula": "ar_joint"}, {"formula": "ar_mc"}]
            }]
        }"#;
        let config = ExperimentConfig::from_json(json).unwrap();
        let report = run_config(&config, None).unwrap();
        assert!(report.all_pass);
        let mc = &report.cases[0].bounds[1].bound;
        assert!(mc.params.contains_key("holder_p"));
    }

    #[test]
    fn gaussian_rate_formulas_agree_at_p2() {
        // the p=2-pinned form and the free-p form evaluated at p=2 are the
        // same formula and must give the same value
        let json = r#"{
            "schema_version": 1,
            "master_seed": 31,
            "reps": 2000,
            "cases": [{
                "model": {"type": "cond_symmetric", "base": {"type": "rademacher"}},
                "n": 25,
                "event": {"type": "self_norm_upper", "x": 0.4},
                "bounds": [
                    {"formula": "sym_gaussian_sqrt_p2"},
                    {"formula": "sym_gaussian_inf_p", "holder_p": 2.0}
                ]
            }]
        }"#;
        let config = ExperimentConfig::from_json(json).unwrap();
        let report = run_config(&config, None).unwrap();
        let a = report.cases[0].bounds[0].bound.raw;
        let b = report.cases[0].bounds[1].bound.raw;
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn marginal_bound_decreasing_in_p_for_deterministic_normalizer() {
        // with [S]_n deterministic, the marginal power-mean bound is exactly
        // exp{-(p-1)/p * rate * n}, strictly decreasing in p
        use super::super::estimate::{expectation_bound_estimate, ExpectationKind};
        use crate::rng::ReplicationRng;
        use crate::sim::{simulate_summary, DistSpec, IncrementModel};

        let model = IncrementModel::iid(DistSpec::Rademacher, 40);
        let batch: Vec<_> = (0..500)
            .map(|r| {
                let mut rng = ReplicationRng::new(77, 0, r);
                simulate_summary(&model, &mut rng)
            })
            .collect();
        let mut last = f64::INFINITY;
        for p in [1.5, 2.0, 4.0, 16.0, 256.0] {
            let v = expectation_bound_estimate(
                &batch,
                0.3,
                p,
                ExpectationKind::SelfNormBernsteinMarginal,
            )
            .unwrap();
            assert!(v < last, "p={p}: {v} vs {last}");
            last = v;
        }
    }
}
