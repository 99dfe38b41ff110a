//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Every tolerance is pinned in the assertions; the Monte Carlo criteria run
//! at fixed master seeds so their outcomes are reproducible.

use std::path::PathBuf;
use std::sync::Arc;

use selfnorm::bounds::{
    self, ar_confidence_radius, ar_joint, bennett_sum_form, bennett_variance_form, chen_lower_tail,
    iid_self_norm, norm_lower_joint, peeling_normalized, peeling_self_norm, self_norm_joint,
    sym_gaussian_joint, tstat_peeling, tstat_transform,
};
use selfnorm::optim::grid_then_golden;
use selfnorm::rates;
use selfnorm::rng::ReplicationRng;
use selfnorm::sim::{
    ls_estimate, simulate_ar1, t_statistic, DistSpec, IncrementModel, MartSummary, ScaleRule,
};
use selfnorm::verify::{
    expectation_bound_estimate, run_config, supermartingale_suite, write_report_csv,
    ExpectationKind, ExperimentConfig, FunctionalKind,
};

fn report(criterion: u32, name: &str, violations: usize) {
    let status = if violations == 0 { "PASS" } else { "FAIL" };
    println!("acceptance criterion {criterion} ({name}): {status} ({violations} violations)");
    assert_eq!(violations, 0, "criterion {criterion} ({name})");
}

fn uniform_grid(rng: &mut ReplicationRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// Criterion 1: the six scalar rate inequalities on 1e4 random points each.
#[test]
fn criterion_1_rate_inequalities() {
    let mut rng = ReplicationRng::from_seed(101);
    let mut violations = 0;
    for _ in 0..10_000 {
        let x = uniform_grid(&mut rng, 1e-12, 100.0);
        // h >= x^2/(2(1+x))
        if rates::h_rate(x).unwrap() < rates::bern_rate(x).unwrap() * (1.0 - 1e-12) {
            violations += 1;
        }
        // g >= mid >= benn
        let (g, mid, benn) = (
            rates::g_rate(x).unwrap(),
            rates::mid_rate(x).unwrap(),
            rates::benn_rate(x).unwrap(),
        );
        if g < mid * (1.0 - 1e-12) || mid < benn * (1.0 - 1e-12) {
            violations += 1;
        }
        // log(1 + 1/(1+x)) >= 1/(2(1+x))
        if (1.0 / (1.0 + x)).ln_1p() < 1.0 / (2.0 * (1.0 + x)) {
            violations += 1;
        }
        // g(x) = -inf_{l >= 0} (phi(l) - l x), grid check to 1e-8 in value
        if x <= 50.0 {
            let hi = x.ln_1p() * 2.0 + 1.0;
            let (_, fmin, _) =
                grid_then_golden(|l| rates::phi(l).unwrap() - l * x, 0.0, hi, 256, 1e-10);
            if (g - (-fmin)).abs() > 1e-8 {
                violations += 1;
            }
        }

        // phi(l) <= l^2/(2(1-l/3)) on [0, 3)
        let l3 = uniform_grid(&mut rng, 0.0, 3.0 - 1e-9);
        let quad = l3 * l3 / (2.0 * (1.0 - l3 / 3.0));
        if rates::phi(l3).unwrap() > quad * (1.0 + 1e-12) + 1e-300 {
            violations += 1;
        }
        // psi(l) >= -l^2/(2(1-l)) on [0, 1)
        let l1 = uniform_grid(&mut rng, 0.0, 1.0 - 1e-9);
        let lower = -l1 * l1 / (2.0 * (1.0 - l1));
        if rates::psi(l1).unwrap() < lower * (1.0 + 1e-12) - 1e-300 {
            violations += 1;
        }
    }
    report(1, "rate inequalities", violations);
}

/// Criterion 2: grid minimization vs the closed-form optimizers, value
/// agreement within 1e-8 on 1e3 random deviation levels.
#[test]
fn criterion_2_optimizer_identities() {
    let mut rng = ReplicationRng::from_seed(202);
    let mut violations = 0;
    for _ in 0..1000 {
        let x = uniform_grid(&mut rng, 1e-3, 50.0);

        // min over [0,1) of -(psi + l x) is attained at x/(1+x) with value -h(x)
        let f = |l: f64| -(rates::psi(l).unwrap() + l * x);
        let (_, fmin, _) = grid_then_golden(f, 0.0, 1.0 - 1e-12, 256, 1e-10);
        let at_closed = f(rates::lambda_star_lower(x).unwrap());
        if (fmin - at_closed).abs() > 1e-8 || (fmin + rates::h_rate(x).unwrap()).abs() > 1e-8 {
            violations += 1;
        }

        // min over l >= 0 of phi - l x is attained at log(1+x) with value -g(x)
        let hi = x.ln_1p() * 2.0 + 1.0;
        let f = |l: f64| rates::phi(l).unwrap() - l * x;
        let (_, fmin, _) = grid_then_golden(f, 0.0, hi, 256, 1e-10);
        let at_closed = f(rates::lambda_star_upper(x).unwrap());
        if (fmin - at_closed).abs() > 1e-8 || (fmin + rates::g_rate(x).unwrap()).abs() > 1e-8 {
            violations += 1;
        }
    }
    report(2, "optimizer identities", violations);
}

fn acceptance_models() -> Vec<IncrementModel> {
    vec![
        IncrementModel::iid(DistSpec::Rademacher, 0),
        IncrementModel::iid(DistSpec::TwoPoint { q: 0.3 }, 0),
        IncrementModel::iid(DistSpec::UniformSym { half_width: 1.0 }, 0),
        IncrementModel::cond_symmetric(DistSpec::Rademacher, 0),
    ]
}

fn with_n(model: &IncrementModel, n: usize) -> IncrementModel {
    match model {
        IncrementModel::Iid { dist, .. } => IncrementModel::Iid { dist: *dist, n },
        IncrementModel::CondSymmetric {
            base, scale_rule, ..
        } => IncrementModel::CondSymmetric {
            base: *base,
            scale_rule: scale_rule.clone(),
            n,
        },
    }
}

/// Criterion 3: supermartingale sample means at 1e5 replications plus exact
/// enumeration for small Rademacher cases.
#[test]
fn criterion_3_supermartingale_suite() {
    let u_grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let w_grid = [0.25, 0.5, 1.0, 2.0];
    let mut violations = 0;
    let mut stream = 0;
    for base in acceptance_models() {
        for n in [10usize, 50] {
            let model = with_n(&base, n);
            for p in supermartingale_suite(
                &model,
                FunctionalKind::SqVariation,
                &u_grid,
                100_000,
                303,
                stream,
            )
            .unwrap()
            {
                if !p.pass {
                    eprintln!(
                        "U mean {} > 1 + 3se at lambda {} ({}, n={n})",
                        p.mean,
                        p.lambda,
                        model.label()
                    );
                    violations += 1;
                }
            }
            stream += 1;
            for p in supermartingale_suite(
                &model,
                FunctionalKind::CondVariance,
                &w_grid,
                100_000,
                303,
                stream,
            )
            .unwrap()
            {
                if !p.pass {
                    eprintln!(
                        "W mean {} > 1 + 3se at lambda {} ({}, n={n})",
                        p.mean,
                        p.lambda,
                        model.label()
                    );
                    violations += 1;
                }
            }
            stream += 1;
        }
    }

    // exact enumeration: Rademacher n <= 4 has E[U_n(lambda)] <= 1 exactly
    for n in 2..=4u32 {
        for &lambda in &u_grid {
            let psi = rates::psi(lambda).unwrap();
            let mut total = 0.0;
            for pattern in 0..(1u32 << n) {
                let s = (0..n)
                    .map(|i| if pattern >> i & 1 == 0 { 1.0 } else { -1.0 })
                    .sum::<f64>();
                total += (lambda * s + psi * n as f64).exp();
            }
            if total / (1u64 << n) as f64 > 1.0 + 1e-14 {
                violations += 1;
            }
        }
    }
    report(3, "supermartingale suite", violations);
}

/// Criterion 4: the shipped default config passes every domination check.
#[test]
fn criterion_4_tail_domination_matrix() {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "configs",
        "default_verify.json",
    ]
    .iter()
    .collect();
    let text = std::fs::read_to_string(&path).expect("shipped default config");
    let config = ExperimentConfig::from_json(&text).unwrap();
    let report_out = run_config(&config, None).unwrap();
    let mut violations = 0;
    for case in &report_out.cases {
        for outcome in &case.bounds {
            if outcome.verdict != selfnorm::verify::Verdict::Pass {
                eprintln!(
                    "domination failure: {} {} p_hat={} bound={}",
                    case.name, outcome.bound.formula, case.tail.p_hat, outcome.bound.clamped
                );
                violations += 1;
            }
        }
    }
    report(4, "tail-domination matrix", violations);
}

/// All sign paths of a Rademacher walk of length n as final summaries.
fn rademacher_paths(n: u32) -> Vec<MartSummary> {
    (0..(1u32 << n))
        .map(|pattern| {
            let s = (0..n)
                .map(|i| if pattern >> i & 1 == 0 { 1.0 } else { -1.0 })
                .sum::<f64>();
            MartSummary {
                sum: s,
                sq_variation: n as f64,
                cond_variance: n as f64,
            }
        })
        .collect()
}

/// Criterion 5: exact enumeration for Rademacher n in {2,3,4} dominates
/// every applicable closed bound, and the expectation estimator reproduces
/// exact expectations when fed the full path set.
#[test]
fn criterion_5_exhaustive_small_cases() {
    let mut violations = 0;
    for n in 2..=4u32 {
        let paths = rademacher_paths(n);
        let nf = n as f64;
        let total = paths.len() as f64;
        let exact_p = |pred: &dyn Fn(&MartSummary) -> bool| {
            paths.iter().filter(|s| pred(s)).count() as f64 / total
        };

        for &x in &[0.3, 0.9] {
            let y = 0.8 * nf;

            // joint self-normalized upper tail vs its three bounds
            let p = exact_p(&|s| s.sum >= x * s.sq_variation && s.sq_variation >= y);
            let (exact, relaxed) = self_norm_joint(x, y).unwrap();
            let gauss = sym_gaussian_joint(x, y).unwrap();
            for b in [&exact, &relaxed, &gauss] {
                if p > b.clamped + 1e-12 {
                    violations += 1;
                }
            }

            // joint normalized lower tail
            let p = exact_p(&|s| s.sum <= -x * s.cond_variance && s.cond_variance >= y);
            let (exact, relaxed) = norm_lower_joint(x, y).unwrap();
            for b in [&exact, &relaxed] {
                if p > b.clamped + 1e-12 {
                    violations += 1;
                }
            }

            // two-term i.i.d. bound at the marginal event
            let p = exact_p(&|s| s.sum >= x * s.sq_variation);
            let b = iid_self_norm(x, 0.5, n as u64, 1.0, 1.0, 2.0).unwrap();
            if p > b.clamped + 1e-12 {
                violations += 1;
            }

            // square-root window form
            let b_win = 0.9 * nf.sqrt();
            let p = exact_p(&|s| {
                let r = s.sq_variation.sqrt();
                s.sum >= x * r && b_win <= r && r <= b_win * 1.5
            });
            let bound = peeling_self_norm(x, b_win, 1.5).unwrap();
            if p > bound.clamped + 1e-12 {
                violations += 1;
            }
            let p = exact_p(&|s| {
                let r = s.cond_variance.sqrt();
                s.sum <= -x * r && b_win <= r && r <= b_win * 1.5
            });
            let bound = peeling_normalized(x, b_win, 1.5).unwrap();
            if p > bound.clamped + 1e-12 {
                violations += 1;
            }

            // nonnegative-sum lower tail: [S] = n deterministically, so the
            // event is impossible and any bound dominates
            let p = exact_p(&|s| s.sq_variation <= nf - 1.0);
            let bound = chen_lower_tail(1.0, nf, 2.0).unwrap();
            if p > bound.clamped + 1e-12 {
                violations += 1;
            }
        }

        // t-statistic window event (degenerate all-equal paths give infinite
        // T with the sign of the mean)
        if n >= 2 {
            let b_win = 0.9 * nf.sqrt();
            let x = 1.9;
            let p = paths
                .iter()
                .filter(|s| {
                    let r = s.sq_variation.sqrt();
                    let ssn = s.sum / r;
                    let t = if ssn.abs() * ssn.abs() >= nf {
                        if ssn > 0.0 {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        ssn * ((nf - 1.0) / (nf - ssn * ssn)).sqrt()
                    };
                    t >= x && b_win <= r && r <= b_win * 1.5
                })
                .count() as f64
                / total;
            let bound = tstat_peeling(x, n as u64, b_win, 1.5).unwrap();
            if p > bound.clamped + 1e-12 {
                violations += 1;
            }
        }

        // estimator vs direct enumeration on the full path set
        for &x in &[0.3, 0.9] {
            for &p_h in &[2.0, 3.5] {
                let via =
                    expectation_bound_estimate(&paths, x, p_h, ExpectationKind::SelfNormExact)
                        .unwrap();
                let rate = x - x.ln_1p();
                let mean: f64 = paths
                    .iter()
                    .map(|s| {
                        if s.sum >= x * s.sq_variation {
                            (-(p_h - 1.0) * rate * s.sq_variation).exp()
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    / total;
                if (via - mean.powf(1.0 / p_h)).abs() > 1e-12 {
                    violations += 1;
                }

                let via = expectation_bound_estimate(&paths, x, p_h, ExpectationKind::GaussianRate)
                    .unwrap();
                let mean: f64 = paths
                    .iter()
                    .map(|s| (-(p_h - 1.0) * 0.5 * x * x * s.sq_variation).exp())
                    .sum::<f64>()
                    / total;
                if (via - mean.powf(1.0 / p_h)).abs() > 1e-12 {
                    violations += 1;
                }

                let via =
                    expectation_bound_estimate(&paths, x, p_h, ExpectationKind::NormLowerExact)
                        .unwrap();
                let rate = (1.0 + x) * x.ln_1p() - x;
                let mean: f64 = paths
                    .iter()
                    .map(|s| {
                        if s.sum <= -x * s.cond_variance {
                            (-(p_h - 1.0) * rate * s.cond_variance).exp()
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    / total;
                if (via - mean.powf(1.0 / p_h)).abs() > 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    report(5, "exhaustive small-case oracle", violations);
}

/// Criterion 6: the normalized peeling bound at M = 1 reduces to the
/// classical Bennett bound: exponent identity to 1e-12 relative over 1e3
/// random (x, v) pairs, through both classical parameterizations.
#[test]
fn criterion_6_bennett_reduction() {
    let mut rng = ReplicationRng::from_seed(606);
    let mut violations = 0;
    for _ in 0..1000 {
        let x = uniform_grid(&mut rng, 1e-3, 20.0);
        let v = uniform_grid(&mut rng, 0.1, 10.0);
        let peel = peeling_normalized(x, v, 1.0).unwrap();
        let e_peel = (peel.raw / bounds::SQRT_E).ln();
        let e_sum = bennett_sum_form(x * v, v * v).unwrap().raw.ln();
        let e_var = bennett_variance_form(x / v, v * v).unwrap().raw.ln();
        let scale = e_peel.abs().max(1e-300);
        if (e_peel - e_sum).abs() > 1e-12 * scale || (e_peel - e_var).abs() > 1e-12 * scale {
            violations += 1;
        }
    }
    report(6, "Bennett reduction identity", violations);
}

/// Criterion 7: the t-statistic event and its self-normalized transform
/// coincide path by path.
#[test]
fn criterion_7_efron_identity() {
    let dist = DistSpec::UniformSym { half_width: 1.0 };
    let mut violations = 0;
    for (ni, &n) in [5usize, 20, 100].iter().enumerate() {
        let grid: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99]
            .iter()
            .map(|f| f * (n as f64).sqrt())
            .collect();
        let u_grid: Vec<f64> = grid
            .iter()
            .map(|&x| tstat_transform(x, n as u64).unwrap())
            .collect();
        for rep in 0..10_000u64 {
            let mut rng = ReplicationRng::new(707 + ni as u64, 0, rep);
            let sample: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let t = t_statistic(&sample).unwrap();
            let s: f64 = sample.iter().sum();
            let sqv: f64 = sample.iter().map(|v| v * v).sum();
            let ssn = s / sqv.sqrt();
            for (x, u) in grid.iter().zip(&u_grid) {
                if (t >= *x) != (ssn >= *u) {
                    violations += 1;
                }
            }
        }
    }
    report(7, "Efron event identity", violations);
}

/// Criterion 8: AR(1) pipeline — estimator identity, envelope, confidence
/// radius plug-back, and empirical coverage.
#[test]
fn criterion_8_ar_pipeline() {
    let (n, theta, c) = (200usize, 0.5f64, 1.0f64);
    let noise = DistSpec::UniformNoise { c };
    let envelope = c / (1.0 - theta.abs());
    let sigma2 = c * c / 3.0;
    let alpha = 0.05;
    let mut violations = 0;
    let mut covered = 0;
    for seed in 0..1000u64 {
        let path = simulate_ar1(n, theta, noise, 808 + seed).unwrap();
        let fit = ls_estimate(&path).unwrap();

        // estimator identity
        let identity = path.noise_cross() / path.design_energy();
        if (fit.theta_hat - theta - identity).abs() > 1e-12 {
            violations += 1;
        }
        // envelope (1e-12 headroom for accumulated rounding)
        if path
            .observations
            .iter()
            .any(|x| x.abs() > envelope * (1.0 + 1e-12))
        {
            violations += 1;
        }
        // confidence radius: plug-back and coverage
        let radius =
            ar_confidence_radius(fit.design_energy, sigma2, c, theta.abs(), alpha).unwrap();
        let back = ar_joint(radius, fit.design_energy, sigma2, c, theta.abs()).unwrap();
        if (back.raw - alpha).abs() > 1e-10 * alpha {
            violations += 1;
        }
        if (fit.theta_hat - theta).abs() <= radius {
            covered += 1;
        }
    }
    // randomized plug-back sweeps over the whole parameter box
    let mut rng = ReplicationRng::from_seed(809);
    for _ in 0..1000 {
        let y = uniform_grid(&mut rng, 1.0, 1e5);
        let s2 = uniform_grid(&mut rng, 0.01, 5.0);
        let cc = uniform_grid(&mut rng, 0.01, 4.0);
        let th = uniform_grid(&mut rng, 0.0, 0.99);
        let a = uniform_grid(&mut rng, 0.001, 0.999);
        let r = ar_confidence_radius(y, s2, cc, th, a).unwrap();
        let back = ar_joint(r, y, s2, cc, th).unwrap();
        if (back.raw - a).abs() > 1e-10 * a {
            violations += 1;
        }
    }
    // conservative bound: expect over-coverage, require >= 95%
    if covered < 950 {
        eprintln!("coverage {covered}/1000 below 950");
        violations += 1;
    }
    report(8, "AR pipeline", violations);
}

/// Criterion 9: byte-identical reports across 1, 2, and 8 workers.
#[test]
fn criterion_9_determinism_across_workers() {
    let config = ExperimentConfig::from_json(
        r#"{
        "schema_version": 1,
        "master_seed": 909,
        "reps": 5000,
        "cases": [
            {
                "name": "det-joint",
                "model": {"type": "iid", "dist": {"type": "uniform_sym", "half_width": 1.0}},
                "n": 50,
                "event": {"type": "self_norm_upper_joint", "x": 0.5, "y": 10.0},
                "bounds": [{"formula": "self_norm_joint_exact"}, {"formula": "sym_gaussian_joint"}]
            },
            {
                "name": "det-mc",
                "model": {"type": "cond_symmetric", "base": {"type": "rademacher"}},
                "n": 30,
                "event": {"type": "self_norm_upper", "x": 0.4},
                "bounds": [{"formula": "self_norm_mc_exact"}, {"formula": "sym_gaussian_inf_p"}]
            },
            {
                "name": "det-ar",
                "model": {"type": "ar1", "theta": 0.5, "noise_c": 1.0},
                "n": 100,
                "event": {"type": "ar_abs", "x": 0.2, "y": 20.0},
                "bounds": [{"formula": "ar_joint"}, {"formula": "ar_mc"}]
            }
        ]
    }"#,
    )
    .unwrap();

    let render = |workers: usize| -> Vec<u8> {
        let run = || {
            let report = run_config(&config, None).unwrap();
            let mut csv = Vec::new();
            write_report_csv(&report, &mut csv).unwrap();
            csv
        };
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            pool.install(run)
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            run()
        }
    };

    let one = render(1);
    let two = render(2);
    let eight = render(8);
    let mut violations = 0;
    if one != two {
        violations += 1;
    }
    if one != eight {
        violations += 1;
    }
    report(9, "worker-count determinism", violations);
}

/// Companion to the matrix: the two-term variance-shortfall split, checked on a
/// continuous model where the variance-shortfall term is active, plus the
/// rescaling consistency of the deviation-level mapping.
#[test]
fn decomposition_and_rescaling_consistency() {
    let report_dec = selfnorm::verify::two_term_decomposition_check(
        DistSpec::UniformSym { half_width: 1.0 },
        200,
        0.3,
        0.2,
        2.0,
        100_000,
        1001,
        0.99,
    )
    .unwrap();
    assert!(report_dec.subadditive);
    assert!(report_dec.joint_pass);
    assert!(report_dec.shortfall_pass);
    assert!(report_dec.pass);

    // increments bounded below by -2: rescale by a = 2 and check the event
    // mapping path by path, then domination of the mapped joint bound
    let model = IncrementModel::iid(DistSpec::UniformSym { half_width: 1.0 }, 50);
    let (x, y) = (0.25, 40.0);
    let x_mapped = bounds::rescale_deviation(2.0, x).unwrap();
    let mut hits = 0u64;
    let reps = 50_000u64;
    for rep in 0..reps {
        let mut rng = ReplicationRng::new(1002, 0, rep);
        let base = selfnorm::sim::simulate_summary(&model, &mut rng);
        // raw sequence xi = 2 xi' has sum 2s', squared variation 4 sqv'
        let (s_raw, sqv_raw) = (2.0 * base.sum, 4.0 * base.sq_variation);
        let raw_event = s_raw >= x * sqv_raw && sqv_raw >= y;
        let mapped_event = base.sum >= x_mapped * base.sq_variation && base.sq_variation >= y / 4.0;
        assert_eq!(raw_event, mapped_event, "rep {rep}");
        if mapped_event {
            hits += 1;
        }
    }
    let tail = selfnorm::verify::clopper_pearson(hits, reps, 0.99).unwrap();
    let (mapped_bound, _) = self_norm_joint(x_mapped, y / 4.0).unwrap();
    assert!(tail.0 <= mapped_bound.clamped);

    println!("acceptance companion (decomposition + rescaling): PASS");
}

/// Companion: a custom predictable scale rule exercises the conditionally
/// symmetric machinery end to end.
#[test]
fn custom_scale_rule_suite() {
    let rule = ScaleRule::Custom(Arc::new(|k, _s, sqv| 1.0 / (1.0 + sqv / (2 * k) as f64)));
    let model = IncrementModel::CondSymmetric {
        base: DistSpec::UniformSym { half_width: 1.0 },
        scale_rule: rule,
        n: 30,
    };
    let pts = supermartingale_suite(
        &model,
        FunctionalKind::SqVariation,
        &[0.3, 0.6],
        50_000,
        1100,
        0,
    )
    .unwrap();
    for p in pts {
        assert!(p.pass, "custom rule U at {}", p.lambda);
    }
    println!("acceptance companion (custom scale rule): PASS");
}
