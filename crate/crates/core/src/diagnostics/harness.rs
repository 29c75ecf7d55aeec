//! Simulation experiments: interval coverage over replicated datasets and
//! the mixing/runtime trade-off across refresh fractions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{summarize_chain, PosteriorSummary};
use crate::error::{Error, Result};
use crate::mcmc::{run_chain, ChainOutput, McmcConfig};
use crate::model::{r0, IncidenceCounts, ObservationGrid, Params};
use crate::rng::derive_seed;
use crate::simulate::{simulate_dataset_conditioned, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub s0: usize,
    pub i0: usize,
    pub truth: Params,
    pub grid: ObservationGrid,
    pub replications: usize,
    /// Simulated epidemics with fewer infections are discarded and redrawn.
    pub min_infections: usize,
    pub max_sim_attempts: usize,
    /// Chain template; `seed` and `init` are set per replicate.
    pub mcmc: McmcConfig,
    /// Iterations discarded before summarising.
    pub burn_in: usize,
    pub mass: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRate {
    pub rate: f64,
    /// Binomial standard error `sqrt(p (1 - p) / R)`.
    pub se: f64,
    /// Average posterior mean across replicates.
    pub mean_of_means: f64,
}

impl CoverageRate {
    fn from_hits(hits: &[bool], means: &[f64]) -> Self {
        let r = hits.len().max(1) as f64;
        let rate = hits.iter().filter(|&&h| h).count() as f64 / r;
        Self {
            rate,
            se: (rate * (1.0 - rate) / r).sqrt(),
            mean_of_means: means.iter().sum::<f64>() / r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub sim_seed: u64,
    pub chain_seed: u64,
    pub n_infected: usize,
    /// Simulations discarded for falling below the infection threshold.
    pub discarded: usize,
    pub summary: PosteriorSummary,
    pub covers_beta: bool,
    pub covers_lambda: bool,
    pub covers_r0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub truth: Params,
    pub truth_r0: f64,
    pub replications: usize,
    pub discarded: usize,
    pub beta: CoverageRate,
    pub lambda: CoverageRate,
    pub r0: CoverageRate,
    pub rows: Vec<ReplicateRow>,
}

/// Coverage of the credible intervals produced by the standard sampler.
pub fn coverage_experiment(settings: &CoverageSettings) -> Result<CoverageReport> {
    coverage_experiment_with(settings, run_chain)
}

/// Coverage with a caller-supplied fitter. Replicates run in parallel;
/// replicate `r` simulates with `derive_seed(seed, 2r)` and fits with
/// `derive_seed(seed, 2r + 1)`, so results do not depend on scheduling.
pub fn coverage_experiment_with<F>(settings: &CoverageSettings, fitter: F) -> Result<CoverageReport>
where
    F: Fn(&IncidenceCounts, &ObservationGrid, usize, usize, &McmcConfig) -> Result<ChainOutput> + Sync,
{
    if settings.replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    settings.truth.validate()?;
    let truth_r0 = r0(&settings.truth, settings.s0);

    let rows: Vec<ReplicateRow> = (0..settings.replications)
        .into_par_iter()
        .map(|rep| {
            let sim_seed = derive_seed(settings.seed, 2 * rep as u64);
            let chain_seed = derive_seed(settings.seed, 2 * rep as u64 + 1);
            let sim = SimConfig {
                s0: settings.s0,
                i0: settings.i0,
                params: settings.truth,
                horizon: settings.grid.horizon(),
                seed: sim_seed,
            };
            let data = simulate_dataset_conditioned(
                &sim,
                &settings.grid,
                settings.min_infections,
                settings.max_sim_attempts,
            )?;
            let cfg = McmcConfig {
                seed: chain_seed,
                init: settings.truth,
                ..settings.mcmc
            };
            let out = fitter(&data.counts, &settings.grid, settings.s0, settings.i0, &cfg)?;
            let summary = summarize_chain(&out, settings.burn_in, settings.mass);
            Ok(ReplicateRow {
                replicate: rep,
                sim_seed,
                chain_seed,
                n_infected: data.counts.total(),
                discarded: data.attempts - 1,
                covers_beta: summary.beta.covers(settings.truth.beta),
                covers_lambda: summary.lambda.covers(settings.truth.lambda),
                covers_r0: summary.r0.covers(truth_r0),
                summary,
            })
        })
        .collect::<Result<_>>()?;

    let rate = |hit: fn(&ReplicateRow) -> bool, mean: fn(&ReplicateRow) -> f64| {
        let hits: Vec<bool> = rows.iter().map(hit).collect();
        let means: Vec<f64> = rows.iter().map(mean).collect();
        CoverageRate::from_hits(&hits, &means)
    };
    Ok(CoverageReport {
        truth: settings.truth,
        truth_r0,
        replications: settings.replications,
        discarded: rows.iter().map(|r| r.discarded).sum(),
        beta: rate(|r| r.covers_beta, |r| r.summary.beta.mean),
        lambda: rate(|r| r.covers_lambda, |r| r.summary.lambda.mean),
        r0: rate(|r| r.covers_r0, |r| r.summary.r0.mean),
        rows,
    })
}

/// One dataset of a refresh-fraction sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepScenario {
    pub s0: usize,
    pub i0: usize,
    pub truth: Params,
    pub grid: ObservationGrid,
    pub seed: u64,
    pub min_infections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s0: usize,
    /// Population size `s0 + i0`.
    pub n: usize,
    pub n_infected: usize,
    pub rho: f64,
    pub runtime: f64,
    pub acceptance: f64,
    pub ess_beta: f64,
    pub ess_lambda: f64,
    pub ess_r0: f64,
    /// Smallest of the three ESS values per second of runtime.
    pub ess_per_sec: f64,
}

/// Fit every scenario at every refresh fraction. Runs sequentially so the
/// runtimes are comparable.
pub fn rho_sweep(
    scenarios: &[SweepScenario],
    rho_values: &[f64],
    mcmc: &McmcConfig,
    burn_in: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(scenarios.len() * rho_values.len());
    for sc in scenarios {
        let sim = SimConfig {
            s0: sc.s0,
            i0: sc.i0,
            params: sc.truth,
            horizon: sc.grid.horizon(),
            seed: sc.seed,
        };
        let data = simulate_dataset_conditioned(&sim, &sc.grid, sc.min_infections, 10_000)?;
        for (m, &rho) in rho_values.iter().enumerate() {
            let cfg = McmcConfig {
                rho,
                init: sc.truth,
                seed: derive_seed(sc.seed, m as u64 + 1),
                ..*mcmc
            };
            let out = run_chain(&data.counts, &sc.grid, sc.s0, sc.i0, &cfg)?;
            let summary = summarize_chain(&out, burn_in, 0.9);
            let runtime = out.wall_time;
            let min_ess = summary.beta.ess.min(summary.lambda.ess).min(summary.r0.ess);
            rows.push(SweepRow {
                s0: sc.s0,
                n: sc.s0 + sc.i0,
                n_infected: data.counts.total(),
                rho,
                runtime,
                acceptance: out.acceptance_rate(),
                ess_beta: summary.beta.ess,
                ess_lambda: summary.lambda.ess,
                ess_r0: summary.r0.ess,
                ess_per_sec: min_ess / runtime.max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(replications: usize) -> CoverageSettings {
        let truth = Params::new(0.0099, 1.0, 2.0).unwrap();
        let mut mcmc = McmcConfig::new(600, 1.0, 0, truth);
        mcmc.thin = 2;
        CoverageSettings {
            s0: 250,
            i0: 10,
            truth,
            grid: ObservationGrid::uniform(6.0, 10).unwrap(),
            replications,
            min_infections: 20,
            max_sim_attempts: 1000,
            mcmc,
            burn_in: 100,
            mass: 0.9,
            seed: 5,
        }
    }

    #[test]
    fn coverage_is_reproducible() {
        let s = settings(4);
        let a = coverage_experiment(&s).unwrap();
        let b = coverage_experiment(&s).unwrap();
        assert_eq!(a, b);
        let seeds: std::collections::HashSet<u64> =
            a.rows.iter().flat_map(|r| [r.sim_seed, r.chain_seed]).collect();
        assert_eq!(seeds.len(), 8);
        assert!(a.rows.iter().all(|r| r.n_infected >= 20));
    }

    #[test]
    fn wrong_fitter_misses() {
        let s = settings(3);
        let half = s.truth.lambda / 2.0;
        let rep = coverage_experiment_with(&s, |y, g, s0, i0, cfg| {
            let mut out = run_chain(y, g, s0, i0, cfg)?;
            for d in &mut out.draws {
                d.lambda = half;
            }
            Ok(out)
        })
        .unwrap();
        assert_eq!(rep.lambda.rate, 0.0);
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(coverage_experiment(&settings(0)).is_err());
    }

    #[test]
    fn sweep_rows() {
        let truth = Params::new(0.0099, 1.0, 2.0).unwrap();
        let sc = SweepScenario {
            s0: 250,
            i0: 10,
            truth,
            grid: ObservationGrid::uniform(6.0, 10).unwrap(),
            seed: 3,
            min_infections: 20,
        };
        let mcmc = McmcConfig::new(300, 1.0, 0, truth);
        let rows = rho_sweep(&[sc], &[0.1, 1.0], &mcmc, 50).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.n == 260 && r.runtime > 0.0));
    }
}
