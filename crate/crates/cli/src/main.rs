//! `selfnorm` — evaluate martingale tail bounds, run Monte Carlo
//! verification matrices, simulate trajectories, and fit AR(1) series with
//! finite-sample confidence radii.
//!
//! Exit codes: 0 success / all checks pass, 1 verification failure,
//! 2 usage or config error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use selfnorm::bounds;
use selfnorm::sim::{
    ls_estimate_series, read_ar_csv, simulate_ar1, simulate_trajectory, write_ar_csv,
    write_trajectory_csv, DistSpec, IncrementModel,
};
use selfnorm::verify::{run_config, write_report_csv, ExperimentConfig, Verdict};

#[derive(Parser)]
#[command(
    name = "selfnorm",
    version,
    about = "Tail bounds for self-normalized martingales: evaluation, simulation, Monte Carlo verification, AR(1) confidence intervals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form bound and print it as JSON.
    Bound(BoundArgs),
    /// Run a verification config; exits 1 if any domination check fails.
    Verify(VerifyArgs),
    /// Simulate a martingale trajectory or AR(1) path and write it as CSV.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Least-squares AR(1) fit with a finite-sample confidence radius.
    ArFit(ArFitArgs),
}

#[derive(Args)]
struct BoundArgs {
    /// Formula id, e.g. self_norm_joint, peeling_normalized, ar_joint.
    /// Run with an unknown id to list the available formulas.
    formula: String,
    /// Formula parameter as key=value; repeat per parameter
    /// (e.g. --param x=1 --param y=10).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory for report.json and report.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Multiply every bound by this factor before the verdict. A harness
    /// self-test: a tiny factor must make the run fail.
    #[arg(long, value_name = "FACTOR")]
    debug_bound_scale: Option<f64>,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// I.i.d. martingale increments; writes the trajectory debug CSV.
    Iid(SimulateIidArgs),
    /// AR(1) path with uniform bounded noise; writes `k,x` CSV.
    Ar(SimulateArArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Rademacher,
    TwoPoint,
    UniformSym,
}

#[derive(Args)]
struct SimulateIidArgs {
    #[arg(long, value_enum)]
    dist: DistArg,
    /// Success probability of the two_point law.
    #[arg(long)]
    q: Option<f64>,
    /// Half-width of the uniform_sym law.
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArArgs {
    #[arg(long)]
    theta: f64,
    /// Noise bound C (noise is uniform on [-C, C]).
    #[arg(long)]
    noise_c: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ArFitArgs {
    /// Observation series CSV with header `k,x`.
    series: PathBuf,
    /// Noise variance sigma^2 (assumed known; see --estimate-sigma2).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Noise bound C.
    #[arg(long = "noise-c", visible_alias = "c")]
    noise_c: f64,
    /// Certified upper bound on |theta| (must come from prior knowledge,
    /// not from the estimate).
    #[arg(long = "theta-max")]
    theta_max: f64,
    /// Confidence level parameter: the radius satisfies
    /// P(|theta_hat - theta| >= radius, energy >= observed) <= alpha.
    #[arg(long)]
    alpha: f64,
    /// Estimate sigma^2 from the fit residuals instead of requiring it.
    /// The resulting radius is NOT certified: the bound needs the true
    /// noise variance.
    #[arg(long)]
    estimate_sigma2: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bound(args) => cmd_bound(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::ArFit(args) => cmd_ar_fit(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for entry in raw {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("expected KEY=VALUE, got \"{entry}\""))?;
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("bad numeric value in \"{entry}\""))?;
        map.insert(key.trim().to_string(), value);
    }
    Ok(map)
}

struct ParamReader<'a> {
    map: &'a BTreeMap<String, f64>,
}

impl ParamReader<'_> {
    fn get(&self, key: &str) -> Result<f64> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| anyhow!("missing parameter {key}= (pass --param {key}=VALUE)"))
    }

    fn get_or(&self, key: &str, default: f64) -> f64 {
        self.map.get(key).copied().unwrap_or(default)
    }

    fn get_count(&self, key: &str) -> Result<u64> {
        let v = self.get(key)?;
        if v.fract() != 0.0 || v < 0.0 {
            bail!("{key} must be a nonnegative integer, got {v}");
        }
        Ok(v as u64)
    }
}

const FORMULAS: &[&str] = &[
    "bennett_variance",
    "bennett_sum",
    "sym_gaussian_joint",
    "self_norm_joint",
    "norm_lower_joint",
    "peeling_self_norm",
    "peeling_normalized",
    "iid_self_norm",
    "iid_self_norm_auto",
    "tstat_peeling",
    "ar_joint",
    "ar_gaussian_baseline",
    "ar_peeling",
    "chen_lower_tail",
];

fn cmd_bound(args: &BoundArgs) -> Result<ExitCode> {
    let map = parse_params(&args.params)?;
    let p = ParamReader { map: &map };
    let value = match args.formula.as_str() {
        "bennett_variance" => {
            serde_json::to_value(bounds::bennett_variance_form(p.get("x")?, p.get("v2")?)?)?
        }
        "bennett_sum" => {
            serde_json::to_value(bounds::bennett_sum_form(p.get("x")?, p.get("v2")?)?)?
        }
        "sym_gaussian_joint" => {
            serde_json::to_value(bounds::sym_gaussian_joint(p.get("x")?, p.get("y")?)?)?
        }
        "self_norm_joint" => {
            let (exact, relaxed) = bounds::self_norm_joint(p.get("x")?, p.get("y")?)?;
            json!({ "exact": exact, "relaxed": relaxed })
        }
        "norm_lower_joint" => {
            let (exact, relaxed) = bounds::norm_lower_joint(p.get("x")?, p.get("y")?)?;
            json!({ "exact": exact, "relaxed": relaxed })
        }
        "peeling_self_norm" => serde_json::to_value(bounds::peeling_self_norm(
            p.get("x")?,
            p.get("b")?,
            p.get("M")?,
        )?)?,
        "peeling_normalized" => serde_json::to_value(bounds::peeling_normalized(
            p.get("x")?,
            p.get("b")?,
            p.get("M")?,
        )?)?,
        "iid_self_norm" => serde_json::to_value(bounds::iid_self_norm(
            p.get("x")?,
            p.get("y")?,
            p.get_count("n")?,
            p.get("sigma2")?,
            p.get("m2p")?,
            p.get_or("moment_p", 2.0),
        )?)?,
        "iid_self_norm_auto" => serde_json::to_value(bounds::iid_self_norm_auto(
            p.get("x")?,
            p.get_count("n")?,
            p.get("sigma2")?,
            p.get("m2p")?,
            p.get_or("moment_p", 2.0),
        )?)?,
        "tstat_peeling" => serde_json::to_value(bounds::tstat_peeling(
            p.get("x")?,
            p.get_count("n")?,
            p.get("b")?,
            p.get("M")?,
        )?)?,
        "ar_joint" => serde_json::to_value(bounds::ar_joint(
            p.get("x")?,
            p.get("y")?,
            p.get("sigma2")?,
            p.get("C")?,
            p.get("theta_abs")?,
        )?)?,
        "ar_gaussian_baseline" => {
            serde_json::to_value(bounds::ar_gaussian_baseline(p.get("x")?, p.get("y")?)?)?
        }
        "ar_peeling" => serde_json::to_value(bounds::ar_peeling(
            p.get("x")?,
            p.get("b")?,
            p.get("M")?,
            p.get("sigma2")?,
            p.get("C")?,
            p.get("theta_abs")?,
        )?)?,
        "chen_lower_tail" => serde_json::to_value(bounds::chen_lower_tail(
            p.get("y")?,
            p.get("sum_pmoment")?,
            p.get_or("moment_p", 2.0),
        )?)?,
        other => bail!(
            "unknown formula \"{other}\"; available: {}",
            FORMULAS.join(", ")
        ),
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config = ExperimentConfig::from_json(&text)?;
    if let Some(scale) = args.debug_bound_scale {
        eprintln!(
            "warning: bounds scaled by {scale} (debug self-test, verdicts are not meaningful)"
        );
    }
    let report = run_config(&config, args.debug_bound_scale)?;

    // ignore EPIPE etc. on progress output; the report files and exit code
    // carry the result
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for case in &report.cases {
        for outcome in &case.bounds {
            let _ = writeln!(
                out,
                "[{}] {} ({} on {}, n={}) p_hat={} vs {}={}",
                outcome.verdict,
                case.name,
                case.event.kind(),
                case.model,
                case.n,
                case.tail.p_hat,
                outcome.bound.formula,
                outcome.bound.clamped,
            );
        }
    }
    let checks: usize = report.cases.iter().map(|c| c.bounds.len()).sum();
    let failures: usize = report
        .cases
        .iter()
        .flat_map(|c| &c.bounds)
        .filter(|b| b.verdict == Verdict::Fail)
        .count();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json_path = args.out.join("report.json");
    let csv_path = args.out.join("report.csv");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    let mut csv = Vec::new();
    write_report_csv(&report, &mut csv)?;
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let _ = writeln!(
        out,
        "{} of {checks} checks passed; reports in {}",
        checks - failures,
        args.out.display()
    );
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_simulate(cmd: &SimulateCmd) -> Result<ExitCode> {
    match cmd {
        SimulateCmd::Iid(args) => {
            let dist = match args.dist {
                DistArg::Rademacher => DistSpec::Rademacher,
                DistArg::TwoPoint => DistSpec::TwoPoint {
                    q: args.q.ok_or_else(|| anyhow!("two-point needs --q"))?,
                },
                DistArg::UniformSym => DistSpec::UniformSym {
                    half_width: args
                        .half_width
                        .ok_or_else(|| anyhow!("uniform-sym needs --half-width"))?,
                },
            };
            let model = IncrementModel::iid(dist, args.n);
            let traj = simulate_trajectory(&model, args.seed)?;
            let mut buf = Vec::new();
            write_trajectory_csv(&traj, &mut buf)?;
            write_output(args.out.as_deref(), &buf)?;
        }
        SimulateCmd::Ar(args) => {
            let path = simulate_ar1(
                args.n,
                args.theta,
                DistSpec::UniformNoise { c: args.noise_c },
                args.seed,
            )?;
            let mut buf = Vec::new();
            write_ar_csv(&path.observations, &mut buf)?;
            write_output(args.out.as_deref(), &buf)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_ar_fit(args: &ArFitArgs) -> Result<ExitCode> {
    let file = fs::File::open(&args.series)
        .with_context(|| format!("opening {}", args.series.display()))?;
    let observations = read_ar_csv(BufReader::new(file))?;
    let fit = ls_estimate_series(&observations)?;

    let (sigma2, sigma2_estimated) = if args.estimate_sigma2 {
        let residual_ss: f64 = (1..observations.len())
            .map(|k| {
                let r = observations[k] - fit.theta_hat * observations[k - 1];
                r * r
            })
            .sum();
        let est = residual_ss / (fit.n as f64 - 1.0).max(1.0);
        eprintln!(
            "warning: sigma2 estimated from residuals ({est}); the confidence radius is not \
             certified without the true noise variance"
        );
        (est, true)
    } else {
        (
            args.sigma2
                .ok_or_else(|| anyhow!("pass --sigma2 or --estimate-sigma2"))?,
            false,
        )
    };

    let radius = bounds::ar_confidence_radius(
        fit.design_energy,
        sigma2,
        args.noise_c,
        args.theta_max,
        args.alpha,
    )?;
    // Gaussian-noise reference radius (kappa = 0 limit)
    let gaussian_radius =
        bounds::ar_confidence_radius(fit.design_energy, sigma2, 0.0, args.theta_max, args.alpha)?;

    let consistency_warning = fit.theta_hat.abs() + radius >= args.theta_max;
    if consistency_warning {
        eprintln!(
            "warning: |theta_hat| + radius = {} >= theta_max = {}; the certified bound on \
             |theta| does not cover the whole interval",
            fit.theta_hat.abs() + radius,
            args.theta_max
        );
    }

    let out = json!({
        "schema_version": 1,
        "n": fit.n,
        "theta_hat": fit.theta_hat,
        "design_energy": fit.design_energy,
        "sigma2": sigma2,
        "sigma2_estimated": sigma2_estimated,
        "noise_bound": args.noise_c,
        "theta_abs_max": args.theta_max,
        "alpha": args.alpha,
        "confidence_radius": radius,
        "interval": [fit.theta_hat - radius, fit.theta_hat + radius],
        "gaussian_baseline_radius": gaussian_radius,
        "consistency_warning": consistency_warning,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}
