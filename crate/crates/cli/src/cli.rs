//! Command-line surface. Every subcommand's arguments are serialisable so
//! a run manifest can replay the exact invocation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pdsir_core::PriorHyper;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser)]
#[command(name = "pdsir", version, about = "Bayesian inference for partially observed SIR epidemics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an epidemic; writes incidence and latent-path CSVs
    Simulate(SimulateArgs),
    /// Fit (beta, lambda) with block updates of the latent path
    Fit(FitArgs),
    /// Fit refreshing one individual per iteration
    SingleSite(FitArgs),
    /// Acceptance, ESS and runtime across refresh fractions
    RhoSweep(SweepArgs),
    /// Credible-interval coverage over replicated simulations
    Coverage(CoverageArgs),
    /// Check the minorization inequalities on random instances
    VerifyBounds(BoundsArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::SingleSite(_) => "single-site",
            Command::RhoSweep(_) => "rho-sweep",
            Command::Coverage(_) => "coverage",
            Command::VerifyBounds(_) => "verify-bounds",
            Command::Replay(_) => "replay",
        }
    }

    /// Input data file, if the command reads one.
    pub fn data(&self) -> Option<&Path> {
        match self {
            Command::Fit(a) | Command::SingleSite(a) => Some(&a.data),
            Command::VerifyBounds(a) => Some(&a.data),
            _ => None,
        }
    }

    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Simulate(a) => Some(&mut a.out),
            Command::Fit(a) | Command::SingleSite(a) => Some(&mut a.out),
            Command::RhoSweep(a) => Some(&mut a.out),
            Command::Coverage(a) => Some(&mut a.out),
            Command::VerifyBounds(a) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Fit(a) | Command::SingleSite(a) => Some(a.seed),
            Command::RhoSweep(a) => Some(a.seed),
            Command::Coverage(a) => Some(a.seed),
            Command::VerifyBounds(a) => Some(a.seed),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Initially susceptible individuals
    #[arg(long)]
    pub s0: usize,
    /// Initially infectious individuals
    #[arg(long)]
    pub i0: usize,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Weibull shape of the infectious period
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    #[arg(long)]
    pub horizon: f64,
    /// Number of equal observation intervals
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Redraw until at least this many infections occur
    #[arg(long, default_value_t = 0)]
    pub min_infections: usize,
    /// Time unit recorded in the incidence file
    #[arg(long, default_value = "time")]
    pub units: String,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Incidence CSV (`interval_end_time,count`)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub s0: usize,
    #[arg(long)]
    pub i0: usize,
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Fraction of infected individuals refreshed per iteration
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gamma priors as `a_beta,b_beta,a_lambda,b_lambda` (default 0.01,1,0.01,1)
    #[arg(long, value_parser = parse_priors)]
    pub priors: Option<PriorHyper>,
    /// Starting beta (default 1.5 / (s0 * mean interval length))
    #[arg(long)]
    pub init_beta: Option<f64>,
    /// Starting lambda (default: mean infectious period of one interval)
    #[arg(long)]
    pub init_lambda: Option<f64>,
    /// Iterations discarded before summarising (default iters / 10)
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Credible-interval mass
    #[arg(long, default_value_t = 0.9)]
    pub mass: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Susceptible population of each scenario
    #[arg(long, value_delimiter = ',', default_values_t = [250, 500, 1000])]
    pub s0: Vec<usize>,
    /// Basic reproduction number of each scenario
    #[arg(long, value_delimiter = ',', default_values_t = [2.2, 2.5, 3.0])]
    pub r0: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub i0: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 6.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.05, 0.1, 0.25, 0.5, 1.0])]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub min_infections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CoverageArgs {
    #[arg(long, default_value_t = 250)]
    pub s0: usize,
    #[arg(long, default_value_t = 10)]
    pub i0: usize,
    /// True basic reproduction number; sets beta
    #[arg(long, default_value_t = 2.2)]
    pub r0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 6.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = 50_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Simulated epidemics below this size are redrawn
    #[arg(long, default_value_t = 20)]
    pub min_infections: usize,
    #[arg(long, default_value_t = 0.9)]
    pub mass: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub s0: usize,
    #[arg(long)]
    pub i0: usize,
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    /// Centre of the log-uniform beta range (one decade either side)
    #[arg(long)]
    pub beta: f64,
    /// Centre of the log-uniform lambda range
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_parser = parse_priors)]
    pub priors: Option<PriorHyper>,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_priors(s: &str) -> Result<PriorHyper, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [a_beta, b_beta, a_lambda, b_lambda] = v[..] else {
        return Err(format!("expected 4 comma-separated values, got {}", v.len()));
    };
    let p = PriorHyper {
        a_beta,
        b_beta,
        a_lambda,
        b_lambda,
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}
