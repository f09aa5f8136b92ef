//! `frechet`: verification sweeps, counter-examples, mean estimation, rate
//! experiments, entropy tools, and CSV-to-SVG reports.
//!
//! Exit codes: 0 success, 2 an inequality sweep found violations,
//! 1 usage/config/IO errors.

mod config;
mod svg;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use frechet_core::cost::QuadrupleStructure;
use frechet_core::entropy::{
    covering_number, entrn_estimate, entropy_fit, eta, EntropyModel, Region,
};
use frechet_core::estimator::{
    brute_force_mean, frechet_mean_constrained_plane, frechet_mean_tree, frechet_mean_vector,
    EstimatorConfig,
};
use frechet_core::harness::{fit_rate, run_experiment, tail_check, ExperimentConfig, Statistic};
use frechet_core::lab::{
    arithmetic_form_sweep, lemma_battery, optimality_case, sweep_structure,
    tripod_strong_counterexample, LemmaId, OptimalityCase,
};
use frechet_core::space::{DistanceKind, MetricSpaceDescriptor, SampleWindow, SpacePoint};
use frechet_core::sweep::ViolationReport;

use config::{cost_preset, space_preset, structure_preset, write_manifest, RunConfig};

#[derive(Parser)]
#[command(name = "frechet", version, about = "Fréchet means, quadruple inequalities, and rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized inequality sweeps and the proof-lemma battery.
    Verify(VerifyArgs),
    /// Counter-example evaluators (tripod strong-metric, power optimality).
    Counterexample {
        #[command(subcommand)]
        which: CounterexampleCmd,
    },
    /// Estimate a Fréchet mean from a CSV of sample points.
    Mean(MeanArgs),
    /// Monte Carlo rate experiment: losses, log-log fit, tail check.
    Rates(RatesArgs),
    /// Covering numbers, entropy integrals, eta, and entropy-model fits.
    Entropy {
        #[command(subcommand)]
        which: EntropyCmd,
    },
    /// Render a CSV as a log-log SVG line plot.
    Report(ReportArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Structure preset (nice, ip, wip, bregman_exp, bregman_sq,
    /// bounded_lipschitz[:D], power:ALPHA).
    #[arg(long)]
    structure: Option<String>,
    /// Space preset (tripod, tree8, unit_square, plane_hole, rN).
    #[arg(long)]
    space: Option<String>,
    /// JSON config supplying space/structure instead of presets.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also run the arithmetic-form sweep and every proof lemma.
    #[arg(long)]
    lemmas: bool,
    /// Run the full standard battery (structure sweeps on all catalog
    /// space pairs plus the lemma battery).
    #[arg(long)]
    all: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CounterexampleCmd {
    /// Four-point tripod configuration against the projection metric.
    Tripod {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
    },
    /// Four-point optimality ratios for the power inequality constant.
    Optimality {
        /// a (sharp constant), b (alpha > 1), or c (alpha < 1/2).
        #[arg(long)]
        case: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        eps: f64,
    },
}

#[derive(Args)]
struct MeanArgs {
    /// Space preset or JSON config path.
    #[arg(long)]
    space: String,
    /// Cost preset (squared, median, power:TWO_ALPHA, bregman_exp).
    #[arg(long, default_value = "squared")]
    cost: String,
    /// CSV of samples: one point per row; vector coords comma separated,
    /// tree points as edge,offset.
    #[arg(long)]
    samples: PathBuf,
    /// Verify against the brute-force grid oracle at this step.
    #[arg(long)]
    oracle_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    /// JSON config with space/cost and an experiment section.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Statistic for the log-log fit: median or mean.
    #[arg(long, default_value = "median")]
    statistic: String,
}

#[derive(Subcommand)]
enum EntropyCmd {
    /// The three-branch rate function.
    Eta {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: usize,
    },
    /// Greedy covering numbers of a Euclidean ball.
    Covering {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        resolution: Option<f64>,
        /// Comma-separated radii.
        #[arg(long)]
        radii: String,
    },
    /// Truncated entropy integral of a Euclidean ball.
    Entrn {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        n: usize,
    },
    /// Entropy-model fit over covering numbers of centered balls.
    Fit {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        resolution: Option<f64>,
        /// Comma-separated ball radii (deltas).
        #[arg(long)]
        deltas: String,
        /// Comma-separated covering radii.
        #[arg(long)]
        radii: String,
        #[arg(long, default_value = "power")]
        model: String,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "log-log report")]
    title: String,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is a
            // usage error (exit 1 by this tool's convention).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Verify(args) => verify(args),
        Command::Counterexample { which } => counterexample(which),
        Command::Mean(args) => mean(args),
        Command::Rates(args) => rates(args),
        Command::Entropy { which } => entropy(which),
        Command::Report(args) => report(args),
    }
}

#[derive(Serialize)]
struct SweepResult {
    name: String,
    space: String,
    seed: u64,
    trials: u64,
    violations: u64,
    worst_residual: f64,
}

struct SweepRun {
    result: SweepResult,
    report: ViolationReport,
}

fn push_sweep(
    runs: &mut Vec<SweepRun>,
    name: &str,
    space_label: &str,
    seed: u64,
    report: ViolationReport,
) {
    runs.push(SweepRun {
        result: SweepResult {
            name: name.to_string(),
            space: space_label.to_string(),
            seed,
            trials: report.trials,
            violations: report.violations,
            worst_residual: report.worst_residual,
        },
        report,
    });
}

fn verify(args: VerifyArgs) -> Result<i32> {
    let mut runs: Vec<SweepRun> = Vec::new();
    let config = match &args.config {
        Some(path) => Some(RunConfig::load(path)?),
        None => None,
    };

    let standard_battery: &[(&str, &str)] = &[
        ("nice", "tripod"),
        ("nice", "tree8"),
        ("power:0.5", "r3"),
        ("power:0.721", "r3"),
        ("power:1.0", "r3"),
        ("power:0.721", "tripod"),
        ("ip", "r5"),
        ("wip", "r5"),
        ("bregman_exp", "r3"),
        ("bounded_lipschitz", "unit_square"),
    ];

    if args.all {
        for (i, (structure, space)) in standard_battery.iter().enumerate() {
            let (space_desc, window) = space_preset(space)?;
            let structure_desc = structure_preset(structure, &space_desc)?;
            let report = sweep_structure(
                &space_desc,
                &structure_desc,
                window.as_ref(),
                args.trials,
                args.seed + i as u64,
                args.tol,
            )?;
            push_sweep(&mut runs, structure, space, args.seed + i as u64, report);
        }
    } else if args.structure.is_some() || config.as_ref().is_some_and(|c| c.structure.is_some()) {
        let (space_desc, window) = resolve_space(&args.space, &config)?;
        let structure_desc: QuadrupleStructure = match (&args.structure, &config) {
            (Some(name), _) => structure_preset(name, &space_desc)?,
            (None, Some(cfg)) => cfg
                .structure
                .clone()
                .ok_or_else(|| anyhow!("config has no structure section"))?,
            (None, None) => unreachable!("guarded above"),
        };
        let report = sweep_structure(
            &space_desc,
            &structure_desc,
            window.as_ref(),
            args.trials,
            args.seed,
            args.tol,
        )?;
        let label = args.space.clone().unwrap_or_else(|| "config".into());
        push_sweep(&mut runs, structure_desc.name(), &label, args.seed, report);
    } else if !args.lemmas {
        bail!("nothing to verify: pass --structure/--space, --config, --lemmas, or --all");
    }

    if args.lemmas || args.all {
        let report = arithmetic_form_sweep(args.trials, args.seed + 50, args.tol);
        push_sweep(&mut runs, "arithmetic_form", "-", args.seed + 50, report);
        for (i, lemma) in LemmaId::ALL.iter().enumerate() {
            let report = lemma_battery(*lemma, args.trials, args.seed + 60 + i as u64, args.tol);
            push_sweep(&mut runs, lemma.name(), "-", args.seed + 60 + i as u64, report);
        }
    }

    let total_violations: u64 = runs.iter().map(|r| r.result.violations).sum();
    for run in &runs {
        println!(
            "{:<24} {:<12} trials {:>8}  violations {:>4}  worst {:>12.3e}",
            run.result.name,
            run.result.space,
            run.result.trials,
            run.result.violations,
            run.result.worst_residual
        );
    }

    std::fs::create_dir_all(&args.out)?;
    let results: Vec<&SweepResult> = runs.iter().map(|r| &r.result).collect();
    std::fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&results)? + "\n",
    )?;
    let mut violations_csv = String::from("structure,space,seed,trial,residual,y,z,q,p\n");
    for run in &runs {
        if let Some(w) = &run.report.witness {
            let mut points = w.points.clone();
            points.resize(4, "-".to_string());
            violations_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                run.result.name,
                run.result.space,
                run.result.seed,
                w.trial,
                w.residual,
                points[0],
                points[1],
                points[2],
                points[3]
            ));
        }
    }
    std::fs::write(args.out.join("violations.csv"), violations_csv)?;
    write_manifest(
        &args.out,
        "verify",
        args.seed,
        serde_json::json!({
            "trials": args.trials,
            "tol": args.tol,
            "all": args.all,
            "lemmas": args.lemmas,
            "structure": args.structure,
            "space": args.space,
            "results": results,
        }),
    )?;

    if total_violations > 0 {
        println!("FOUND {total_violations} violations; details in violations.csv");
        Ok(2)
    } else {
        println!("all sweeps clean");
        Ok(0)
    }
}

fn resolve_space(
    preset: &Option<String>,
    config: &Option<RunConfig>,
) -> Result<(MetricSpaceDescriptor, Option<SampleWindow>)> {
    match (preset, config) {
        (Some(name), _) => space_preset(name),
        (None, Some(cfg)) => {
            let space = cfg
                .space
                .clone()
                .ok_or_else(|| anyhow!("config has no space section"))?;
            Ok((space, cfg.window.clone()))
        }
        (None, None) => bail!("pass --space or --config"),
    }
}

fn counterexample(which: CounterexampleCmd) -> Result<i32> {
    match which {
        CounterexampleCmd::Tripod { r, eps } => {
            let out = tripod_strong_counterexample(r, eps)?;
            println!(
                "tripod strong-quadruple counter-example at r = {r}, eps = {eps}"
            );
            println!("  left side (direct)   = {:.12e}", out.left_side);
            println!("  2*eps                = {:.12e}", 2.0 * eps);
            println!("  b_m(q, p)            = {:.12e}", out.bm_value);
            println!("  required K           = {:.6}", out.required_k);
        }
        CounterexampleCmd::Optimality { case, alpha, eps } => {
            let case = match case.as_str() {
                "a" => OptimalityCase::A,
                "b" => OptimalityCase::B,
                "c" => OptimalityCase::C,
                other => bail!("unknown case {other}; use a, b, or c"),
            };
            let ratio = optimality_case(case, alpha, eps)?;
            println!("optimality case {case:?} at alpha = {alpha}, eps = {eps}");
            println!("  ratio                = {ratio:.6}");
            if matches!(case, OptimalityCase::A) {
                let constant = frechet_core::cost::power_structure_constant(alpha);
                println!("  8a2^-2a              = {constant:.6}");
            }
        }
    }
    Ok(0)
}

fn parse_samples(space: &MetricSpaceDescriptor, text: &str) -> Result<Vec<SpacePoint>> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // A header row is tolerated.
        if i == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let point = match space {
            MetricSpaceDescriptor::MetricTree { .. } => {
                if fields.len() != 2 {
                    bail!("tree sample rows are edge,offset; got: {line}");
                }
                SpacePoint::tree(
                    fields[0].parse().context("edge id")?,
                    fields[1].parse().context("offset")?,
                )
            }
            _ => {
                let coords: Result<Vec<f64>, _> =
                    fields.iter().map(|f| f.parse::<f64>()).collect();
                SpacePoint::Vector {
                    coords: coords.with_context(|| format!("coordinates in: {line}"))?,
                }
            }
        };
        space.check_point(&point).map_err(|e| anyhow!("row {i}: {e}"))?;
        samples.push(point);
    }
    if samples.is_empty() {
        bail!("no samples in {}", "input");
    }
    Ok(samples)
}

fn mean(args: MeanArgs) -> Result<i32> {
    let (space, window) = if args.space.ends_with(".json") {
        let cfg = RunConfig::load(Path::new(&args.space))?;
        (
            cfg.space.ok_or_else(|| anyhow!("config has no space"))?,
            cfg.window,
        )
    } else {
        space_preset(&args.space)?
    };
    let cost = cost_preset(&args.cost)?;
    let text = std::fs::read_to_string(&args.samples)
        .with_context(|| format!("reading {}", args.samples.display()))?;
    let samples = parse_samples(&space, &text)?;
    let cfg = EstimatorConfig::default();
    let result = match &space {
        MetricSpaceDescriptor::MetricTree { .. } => {
            frechet_mean_tree(&cost, &space, &samples, &cfg)?
        }
        MetricSpaceDescriptor::PlaneWithHole { .. } => {
            frechet_mean_constrained_plane(&samples, &space, &cfg)?
        }
        _ => frechet_mean_vector(&cost, &space, &samples, &cfg)?,
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    if let Some(step) = args.oracle_step {
        let oracle = brute_force_mean(
            &cost,
            &space,
            &samples,
            step,
            window
                .or_else(|| {
                    space
                        .vector_dim()
                        .map(|d| SampleWindow::symmetric(d, 10.0))
                })
                .as_ref(),
        )?;
        println!(
            "oracle objective at grid step {step}: {:.9} (estimator {:.9})",
            oracle.objective, result.objective
        );
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(
            out.join("mean.json"),
            serde_json::to_string_pretty(&result)? + "\n",
        )?;
        write_manifest(
            out,
            "mean",
            0,
            serde_json::json!({
                "space": space,
                "cost": cost,
                "samples": args.samples.display().to_string(),
                "n": samples.len(),
            }),
        )?;
    }
    Ok(0)
}

fn rates(args: RatesArgs) -> Result<i32> {
    let cfg = RunConfig::load(&args.config)?;
    let space = cfg
        .space
        .clone()
        .ok_or_else(|| anyhow!("rates config needs a space section"))?;
    let cost = cfg
        .cost
        .clone()
        .ok_or_else(|| anyhow!("rates config needs a cost section"))?;
    let exp = cfg
        .experiment
        .clone()
        .ok_or_else(|| anyhow!("rates config needs an experiment section"))?;
    let distribution = exp
        .distribution
        .clone()
        .ok_or_else(|| anyhow!("experiment section needs a distribution"))?;
    let experiment = ExperimentConfig {
        space,
        cost,
        loss: exp.loss.clone().unwrap_or(DistanceKind::Base),
        distribution,
        n_grid: exp.n_grid.clone(),
        replications: exp.replications,
        seed: exp.seed,
        estimator: exp.estimator.clone().unwrap_or_default(),
        known_m: exp.known_m.clone(),
        kappa: exp.kappa,
    };
    let statistic = match args.statistic.as_str() {
        "median" => Statistic::Median,
        "mean" => Statistic::Mean,
        other => match other.strip_prefix("q") {
            Some(p) => Statistic::Quantile {
                p: p.parse().context("quantile level")?,
            },
            None => bail!("unknown statistic {other}; use median, mean, or qP"),
        },
    };

    let table = run_experiment(&experiment)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("losses.csv"), table.to_csv())?;

    let fit = fit_rate(&table, statistic)?;
    std::fs::write(
        args.out.join("rate_fit.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "stderr": fit.stderr_slope,
            "r2": fit.r_squared,
        }))? + "\n",
    )?;
    println!(
        "rate fit ({}): slope {:.4} +- {:.4}, r2 {:.4}",
        args.statistic, fit.slope, fit.stderr_slope, fit.r_squared
    );

    // Summary per n for reporting.
    let mut summary = String::from("n,median_loss,mean_loss\n");
    for n in table.n_values() {
        let losses = table.losses_at(n);
        let median = frechet_core::fit::median(&losses).unwrap_or(f64::NAN);
        let mean = frechet_core::fit::mean(&losses).unwrap_or(f64::NAN);
        summary.push_str(&format!("{n},{median},{mean}\n"));
    }
    std::fs::write(args.out.join("summary.csv"), summary)?;

    // Tail check at the largest n when enough replications are present;
    // exponents default to the Hadamard squared-distance case.
    let n_max = *experiment.n_grid.last().expect("validated grid");
    if experiment.replications >= 500 {
        let eta_value = eta(0.5, n_max);
        let check = tail_check(&table, n_max, eta_value, 1.0, experiment.kappa, 1.0)?;
        std::fs::write(
            args.out.join("tail.json"),
            serde_json::to_string_pretty(&check)? + "\n",
        )?;
        println!(
            "tail check at n = {n_max}: fitted slope {:.3} (theoretical {:.3})",
            check.fitted_slope, check.theoretical_slope
        );
    }

    write_manifest(&args.out, "rates", experiment.seed, &cfg)?;
    Ok(0)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("{e}: {v}")))
        .collect()
}

fn entropy(which: EntropyCmd) -> Result<i32> {
    match which {
        EntropyCmd::Eta { beta, n } => {
            println!("{}", eta(beta, n));
        }
        EntropyCmd::Covering {
            dim,
            radius,
            resolution,
            radii,
        } => {
            let radii = parse_list(&radii)?;
            let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            let resolution = resolution.unwrap_or(r_min / 4.0);
            let center = vec![0.0; dim];
            let region = Region::ball(dim, &center, radius, resolution)?;
            println!("r,covering_number,pollard_bound");
            for r in radii {
                let n = covering_number(&region, r)?;
                println!(
                    "{r},{n},{}",
                    frechet_core::entropy::pollard_bound(dim, radius, r)
                );
            }
        }
        EntropyCmd::Entrn {
            dim,
            radius,
            resolution,
            n,
        } => {
            let resolution = resolution.unwrap_or(radius / 64.0);
            let center = vec![0.0; dim];
            let region = Region::ball(dim, &center, radius, resolution)?;
            println!("{}", entrn_estimate(&region, n, 48)?);
        }
        EntropyCmd::Fit {
            dim,
            radius,
            resolution,
            deltas,
            radii,
            model,
        } => {
            let deltas = parse_list(&deltas)?;
            let radii = parse_list(&radii)?;
            let model = match model.as_str() {
                "power" => EntropyModel::Power,
                "log_power" => EntropyModel::LogPower,
                other => bail!("unknown model {other}; use power or log_power"),
            };
            let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            let resolution = resolution.unwrap_or(r_min / 4.0);
            let center = vec![0.0; dim];
            let region = Region::ball(dim, &center, radius, resolution)?;
            let fit = entropy_fit(
                &region,
                &SpacePoint::Vector { coords: center },
                &deltas,
                &radii,
                model,
            )?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
    }
    Ok(0)
}

fn report(args: ReportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let table = svg::parse_csv(&text)?;
    let rendered = svg::render(&table, &args.title)?;
    std::fs::write(&args.output, rendered)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("wrote {}", args.output.display());
    Ok(0)
}
