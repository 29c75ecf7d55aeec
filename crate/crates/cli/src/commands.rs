use std::fs;
use std::path::Path;
use std::time::Instant;

use pdsir_core::diagnostics::{
    coverage_experiment, rho_sweep, CoverageSettings, ParamSummary, SweepScenario,
};
use pdsir_core::minorization::{certify, envelope_grid_check, GammaBox};
use pdsir_core::simulate::simulate_dataset_conditioned;
use pdsir_core::{
    run_chain, ChainOutput, IncidenceCounts, McmcConfig, ObservationGrid, Params, PriorHyper, SamplerMode,
    SimConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::cli::{BoundsArgs, Command, CoverageArgs, FitArgs, ReplayArgs, SimulateArgs, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::io::{load_incidence_csv, write_incidence_csv, write_json, write_path_csv, write_rows, write_samples_csv};
use crate::manifest::RunManifest;

/// Run one subcommand to completion.
pub fn run(command: &Command) -> CliResult<()> {
    let start = Instant::now();
    let config = match command {
        Command::Simulate(a) => simulate(a)?,
        Command::Fit(a) => fit(a, SamplerMode::Block)?,
        Command::SingleSite(a) => fit(a, SamplerMode::SingleSite)?,
        Command::RhoSweep(a) => sweep(a)?,
        Command::Coverage(a) => coverage(a)?,
        Command::VerifyBounds(a) => verify_bounds(a)?,
        Command::Replay(a) => return replay(a),
    };
    let out = match command {
        Command::Simulate(a) => &a.out,
        Command::Fit(a) | Command::SingleSite(a) => &a.out,
        Command::RhoSweep(a) => &a.out,
        Command::Coverage(a) => &a.out,
        Command::VerifyBounds(a) => &a.out,
        Command::Replay(_) => unreachable!(),
    };
    RunManifest::new(command, config, start.elapsed().as_secs_f64())?.write(out)?;
    Ok(())
}

fn replay(args: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    let mut command = manifest.command;
    if matches!(command, Command::Replay(_)) {
        return Err(CliError::Data("manifest records a replay".into()));
    }
    if let (Some(path), Some(expected)) = (command.data(), manifest.data_checksum.as_deref()) {
        let actual = crate::io::sha256_file(path)?;
        if actual != expected {
            return Err(CliError::Data(format!(
                "{} has checksum {actual}, manifest records {expected}",
                path.display()
            )));
        }
    }
    if let (Some(out), Some(dir)) = (command.out_mut(), &args.out) {
        *out = dir.clone();
    }
    run(&command)
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn simulate(a: &SimulateArgs) -> CliResult<serde_json::Value> {
    let cfg = SimConfig {
        s0: a.s0,
        i0: a.i0,
        params: Params {
            beta: a.beta,
            lambda: a.lambda,
            shape: a.shape,
        },
        horizon: a.horizon,
        seed: a.seed,
    };
    cfg.validate()?;
    let grid = ObservationGrid::uniform(a.horizon, a.k)?;
    let data = simulate_dataset_conditioned(&cfg, &grid, a.min_infections, 100_000)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    create_out(&a.out)?;
    write_incidence_csv(&a.out.join("incidence.csv"), &grid, &data.counts, &a.units)?;
    write_path_csv(&a.out.join("path.csv"), &data.path)?;
    Ok(json!({
        "sim": cfg,
        "breakpoints": grid.breakpoints(),
        "n_infected": data.counts.total(),
        "attempts": data.attempts,
    }))
}

/// Starting values when none are given: a mean infectious period of one
/// interval and a per-pair rate giving about 1.5 infections per
/// infective per interval.
pub fn default_init(grid: &ObservationGrid, s0: usize, shape: f64) -> (f64, f64) {
    let delta = grid.horizon() / grid.num_intervals() as f64;
    // Weibull(1, a) has mean Γ(1 + 1/a).
    let unit_mean = Params {
        beta: 1.0,
        lambda: 1.0,
        shape,
    }
    .mean_infectious_period();
    let lambda = (unit_mean / delta).powf(shape);
    let beta = 1.5 / (s0.max(1) as f64 * delta);
    (beta, lambda)
}

#[derive(Serialize)]
struct FitSummary {
    n_infected: usize,
    s0: usize,
    i0: usize,
    iterations: usize,
    thin: usize,
    burn_in: usize,
    draws_used: usize,
    acceptance_rate: f64,
    credible_mass: f64,
    beta: ParamSummary,
    lambda: ParamSummary,
    r0: ParamSummary,
    infectious_period: ParamSummary,
}

#[derive(Serialize)]
struct EssPerSec {
    beta: f64,
    lambda: f64,
    r0: f64,
    infectious_period: f64,
}

#[derive(Serialize)]
struct Timing {
    wall_time_sec: f64,
    ess_per_sec: EssPerSec,
}

fn fit(a: &FitArgs, mode: SamplerMode) -> CliResult<serde_json::Value> {
    if a.i0 == 0 {
        return usage("--i0 must be at least 1");
    }
    if !(a.mass > 0.0 && a.mass < 1.0) {
        return usage(format!("--mass must lie in (0, 1), got {}", a.mass));
    }
    let (grid, y) = load_incidence_csv(&a.data)?;
    y.validate_against(&grid, a.s0)?;
    let (beta0, lambda0) = default_init(&grid, a.s0, a.shape);
    let init = Params {
        beta: a.init_beta.unwrap_or(beta0),
        lambda: a.init_lambda.unwrap_or(lambda0),
        shape: a.shape,
    };
    let cfg = McmcConfig {
        iterations: a.iters,
        thin: a.thin,
        rho: a.rho,
        mode,
        seed: a.seed,
        init,
        priors: a.priors.unwrap_or_default(),
    };
    cfg.validate()?;
    let burn_in = a.burn_in.unwrap_or(a.iters / 10);
    if burn_in >= a.iters {
        return usage(format!("--burn-in {burn_in} leaves no draws out of {} iterations", a.iters));
    }

    let chain = run_chain(&y, &grid, a.s0, a.i0, &cfg)?;
    create_out(&a.out)?;
    write_samples_csv(&a.out.join("samples.csv"), &chain)?;
    let summary = fit_summary(&chain, &y, a, &cfg, burn_in);
    write_json(&a.out.join("summary.json"), &summary)?;
    let w = chain.wall_time.max(f64::MIN_POSITIVE);
    write_json(
        &a.out.join("timing.json"),
        &Timing {
            wall_time_sec: chain.wall_time,
            ess_per_sec: EssPerSec {
                beta: summary.beta.ess / w,
                lambda: summary.lambda.ess / w,
                r0: summary.r0.ess / w,
                infectious_period: summary.infectious_period.ess / w,
            },
        },
    )?;
    Ok(json!({ "mcmc": cfg, "burn_in": burn_in, "mass": a.mass, "breakpoints": grid.breakpoints() }))
}

fn fit_summary(chain: &ChainOutput, y: &IncidenceCounts, a: &FitArgs, cfg: &McmcConfig, burn_in: usize) -> FitSummary {
    let kept: Vec<_> = chain.draws.iter().filter(|d| d.iteration > burn_in).collect();
    let series = |f: &dyn Fn(&pdsir_core::Draw) -> f64| kept.iter().map(|d| f(d)).collect::<Vec<f64>>();
    let period = series(&|d| {
        Params {
            beta: d.beta,
            lambda: d.lambda,
            shape: cfg.init.shape,
        }
        .mean_infectious_period()
    });
    FitSummary {
        n_infected: y.total(),
        s0: a.s0,
        i0: a.i0,
        iterations: cfg.iterations,
        thin: cfg.thin,
        burn_in,
        draws_used: kept.len(),
        acceptance_rate: chain.acceptance_rate(),
        credible_mass: a.mass,
        beta: ParamSummary::from_draws(&series(&|d| d.beta), a.mass),
        lambda: ParamSummary::from_draws(&series(&|d| d.lambda), a.mass),
        r0: ParamSummary::from_draws(&series(&|d| d.r0), a.mass),
        infectious_period: ParamSummary::from_draws(&period, a.mass),
    }
}

fn beta_for_r0(r0: f64, s0: usize, lambda: f64, shape: f64) -> CliResult<Params> {
    let unit = Params {
        beta: 1.0,
        lambda,
        shape,
    };
    unit.validate()?;
    let beta = r0 / (s0 as f64 * unit.mean_infectious_period());
    Ok(Params::new(beta, lambda, shape)?)
}

#[derive(Serialize)]
struct SweepOutRow {
    s0: usize,
    n: usize,
    n_infected: usize,
    rho: f64,
    acceptance: f64,
    ess_beta: f64,
    ess_lambda: f64,
    ess_r0: f64,
}

#[derive(Serialize)]
struct SweepTimingRow {
    s0: usize,
    rho: f64,
    runtime_sec: f64,
    ess_per_sec: f64,
}

fn sweep(a: &SweepArgs) -> CliResult<serde_json::Value> {
    if a.s0.len() != a.r0.len() {
        return usage(format!("--s0 has {} values but --r0 has {}", a.s0.len(), a.r0.len()));
    }
    if a.rho.is_empty() {
        return usage("--rho needs at least one value");
    }
    let grid = ObservationGrid::uniform(a.horizon, a.k)?;
    let scenarios = a
        .s0
        .iter()
        .zip(&a.r0)
        .enumerate()
        .map(|(m, (&s0, &r0))| {
            Ok(SweepScenario {
                s0,
                i0: a.i0,
                truth: beta_for_r0(r0, s0, a.lambda, a.shape)?,
                grid: grid.clone(),
                seed: pdsir_core::rng::derive_seed(a.seed, m as u64),
                min_infections: a.min_infections,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let template = McmcConfig {
        thin: a.thin,
        ..McmcConfig::new(a.iters, 1.0, a.seed, scenarios[0].truth)
    };
    template.validate()?;
    let burn_in = a.burn_in.unwrap_or(a.iters / 10);
    let rows = rho_sweep(&scenarios, &a.rho, &template, burn_in)?;
    create_out(&a.out)?;
    write_rows(
        &a.out.join("sweep.csv"),
        rows.iter().map(|r| SweepOutRow {
            s0: r.s0,
            n: r.n,
            n_infected: r.n_infected,
            rho: r.rho,
            acceptance: r.acceptance,
            ess_beta: r.ess_beta,
            ess_lambda: r.ess_lambda,
            ess_r0: r.ess_r0,
        }),
    )?;
    write_rows(
        &a.out.join("sweep_timing.csv"),
        rows.iter().map(|r| SweepTimingRow {
            s0: r.s0,
            rho: r.rho,
            runtime_sec: r.runtime,
            ess_per_sec: r.ess_per_sec,
        }),
    )?;
    Ok(json!({ "scenarios": scenarios, "rho": a.rho, "mcmc": template, "burn_in": burn_in }))
}

#[derive(Serialize)]
struct CoverageOutRow {
    replicate: usize,
    sim_seed: u64,
    chain_seed: u64,
    n_infected: usize,
    discarded: usize,
    acceptance: f64,
    beta_mean: f64,
    beta_lower: f64,
    beta_upper: f64,
    covers_beta: u8,
    lambda_mean: f64,
    lambda_lower: f64,
    lambda_upper: f64,
    covers_lambda: u8,
    r0_mean: f64,
    r0_lower: f64,
    r0_upper: f64,
    covers_r0: u8,
}

fn coverage(a: &CoverageArgs) -> CliResult<serde_json::Value> {
    let truth = beta_for_r0(a.r0, a.s0, a.lambda, a.shape)?;
    let burn_in = a.burn_in.unwrap_or(a.iters / 10);
    let settings = CoverageSettings {
        s0: a.s0,
        i0: a.i0,
        truth,
        grid: ObservationGrid::uniform(a.horizon, a.k)?,
        replications: a.replications,
        min_infections: a.min_infections,
        max_sim_attempts: 100_000,
        mcmc: McmcConfig {
            thin: a.thin,
            ..McmcConfig::new(a.iters, a.rho, a.seed, truth)
        },
        burn_in,
        mass: a.mass,
        seed: a.seed,
    };
    settings.mcmc.validate()?;
    let report = coverage_experiment(&settings)?;
    create_out(&a.out)?;
    write_rows(
        &a.out.join("coverage.csv"),
        report.rows.iter().map(|r| CoverageOutRow {
            replicate: r.replicate,
            sim_seed: r.sim_seed,
            chain_seed: r.chain_seed,
            n_infected: r.n_infected,
            discarded: r.discarded,
            acceptance: r.summary.acceptance_rate,
            beta_mean: r.summary.beta.mean,
            beta_lower: r.summary.beta.ci_lower,
            beta_upper: r.summary.beta.ci_upper,
            covers_beta: u8::from(r.covers_beta),
            lambda_mean: r.summary.lambda.mean,
            lambda_lower: r.summary.lambda.ci_lower,
            lambda_upper: r.summary.lambda.ci_upper,
            covers_lambda: u8::from(r.covers_lambda),
            r0_mean: r.summary.r0.mean,
            r0_lower: r.summary.r0.ci_lower,
            r0_upper: r.summary.r0.ci_upper,
            covers_r0: u8::from(r.covers_r0),
        }),
    )?;
    write_json(
        &a.out.join("coverage_summary.json"),
        &json!({
            "truth": report.truth,
            "truth_r0": report.truth_r0,
            "replications": report.replications,
            "discarded": report.discarded,
            "beta": report.beta,
            "lambda": report.lambda,
            "r0": report.r0,
        }),
    )?;
    Ok(json!({ "settings": settings }))
}

#[derive(Serialize)]
struct BoundsRow {
    check: &'static str,
    instances: usize,
    violations: usize,
    min_margin: f64,
}

fn verify_bounds(a: &BoundsArgs) -> CliResult<serde_json::Value> {
    let (grid, y) = load_incidence_csv(&a.data)?;
    y.validate_against(&grid, a.s0)?;
    let centre = Params::new(a.beta, a.lambda, a.shape)?;
    let priors: PriorHyper = a.priors.unwrap_or_default();
    let report = certify(&y, &grid, a.s0, a.i0, &priors, &centre, a.instances, a.seed)?;

    // Envelope of the lambda full conditional family for this dataset.
    let ever = (y.total() + a.i0) as f64;
    let gbox = GammaBox::new(
        priors.a_lambda,
        priors.b_lambda,
        ever,
        ever * grid.horizon().powf(a.shape),
    )?;
    let xs: Vec<f64> = (1..=100).map(|i| a.lambda * 10f64.powf(-1.0 + 2.0 * i as f64 / 100.0)).collect();
    let envelope = envelope_grid_check(&gbox, &xs, 50);

    create_out(&a.out)?;
    let rows = [
        BoundsRow {
            check: "k_r",
            instances: report.instances,
            violations: report.kr_violations,
            min_margin: report.kr_min_margin,
        },
        BoundsRow {
            check: "k_theta",
            instances: report.instances,
            violations: report.ktheta_violations,
            min_margin: report.ktheta_min_margin,
        },
        BoundsRow {
            check: "gamma_envelope",
            instances: envelope.points,
            violations: envelope.violations + usize::from(envelope.max_gap > 1e-6),
            min_margin: -envelope.max_gap,
        },
    ];
    write_rows(&a.out.join("bounds.csv"), rows.iter())?;
    let failures: usize = rows.iter().map(|r| r.violations).sum();
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} bound violations, see bounds.csv")));
    }
    Ok(json!({ "centre": centre, "priors": priors, "breakpoints": grid.breakpoints() }))
}
