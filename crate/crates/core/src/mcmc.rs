//! Data-augmentation MCMC: conjugate Gibbs updates for `(β, λ)` alternated
//! with Metropolis-Hastings refreshes of the latent path.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{open01, sample_gamma};
use crate::error::{Error, Result};
use crate::model::{
    r0, summarize_path_with, Event, IncidenceCounts, LatentPath, ObservationGrid, Params, PathSummary,
    PriorHyper, SufficientStats,
};
use crate::proposal::{subset_size, PdSir};
use crate::rng::{seeded_rng, SimRng};

/// Attempts at drawing a feasible starting path before giving up.
pub const MAX_INIT_ATTEMPTS: usize = 1000;

/// How the latent path is refreshed each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Every initial infective plus `⌈ρ n_I⌉` random infected individuals.
    Block,
    /// One individual chosen uniformly among all latent individuals.
    SingleSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub thin: usize,
    pub rho: f64,
    pub mode: SamplerMode,
    pub seed: u64,
    /// Starting values; `init.shape` is the fixed Weibull shape.
    pub init: Params,
    pub priors: PriorHyper,
}

impl McmcConfig {
    pub fn new(iterations: usize, rho: f64, seed: u64, init: Params) -> Self {
        Self {
            iterations,
            thin: 1,
            rho,
            mode: SamplerMode::Block,
            seed,
            init,
            priors: PriorHyper::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.mode == SamplerMode::Block && !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        self.init.validate()?;
        self.priors.validate()
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub beta: f64,
    pub lambda: f64,
    pub r0: f64,
    /// Complete-data log-likelihood of the current path at the current
    /// parameters.
    pub loglik: f64,
    /// Whether this iteration's path proposal was accepted.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub draws: Vec<Draw>,
    pub acceptance_count: usize,
    pub proposal_count: usize,
    /// Wall-clock seconds spent iterating, initialisation excluded.
    pub wall_time: f64,
    /// Redraws needed to find a feasible starting path.
    pub init_attempts: usize,
}

impl ChainOutput {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposal_count == 0 {
            0.0
        } else {
            self.acceptance_count as f64 / self.proposal_count as f64
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.beta).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.lambda).collect()
    }

    pub fn r0s(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.r0).collect()
    }
}

/// Draw `β | Z ~ Ga(a_β + n_I, b_β + ∫ S I)`.
pub fn gibbs_beta<R: Rng + ?Sized>(stats: &SufficientStats, priors: &PriorHyper, rng: &mut R) -> f64 {
    sample_gamma(
        priors.a_beta + stats.n_infections as f64,
        priors.b_beta + stats.integral_si,
        rng,
    )
}

/// Draw `λ | Z ~ Ga(a_λ + n_R, b_λ + Σ d^a)`.
pub fn gibbs_lambda<R: Rng + ?Sized>(stats: &SufficientStats, priors: &PriorHyper, rng: &mut R) -> f64 {
    sample_gamma(
        priors.a_lambda + stats.n_removals as f64,
        priors.b_lambda + stats.sum_powered_durations,
        rng,
    )
}

/// Log Metropolis-Hastings ratio for replacing the `updated` coordinates
/// of `current` by those of `proposed`, all other coordinates shared.
pub fn log_acceptance_ratio(
    kernel: &PdSir,
    params: &Params,
    current: &LatentPath,
    proposed: &LatentPath,
    updated: &[usize],
) -> f64 {
    if current == proposed {
        return 0.0;
    }
    let horizon = kernel.grid().horizon();
    let mut events = Vec::new();
    let ll_prop = summarize_path_with(proposed, horizon, params.shape, &mut events).log_likelihood(params);
    if ll_prop == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ll_cur = summarize_path_with(current, horizon, params.shape, &mut events).log_likelihood(params);
    ll_prop - ll_cur + kernel.log_density(current, params, updated) - kernel.log_density(proposed, params, updated)
}

/// Stand-alone path update at fixed parameters: propose from `current`
/// with the given refresh fraction and accept or reject. Returns the new
/// state and whether the proposal was accepted.
pub fn mh_latent_step<R: Rng + ?Sized>(
    kernel: &PdSir,
    params: &Params,
    current: &LatentPath,
    rho: f64,
    rng: &mut R,
) -> Result<(LatentPath, bool)> {
    let selected = kernel.select_subset(rho, rng);
    let res = kernel.propose_selected(current, params, &selected, rng)?;
    let log_alpha = log_acceptance_ratio(kernel, params, current, &res.path, &res.updated_set);
    let accept = log_alpha >= 0.0 || open01(rng).ln() < log_alpha;
    Ok(if accept { (res.path, true) } else { (current.clone(), false) })
}

/// The current chain state.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub params: Params,
    pub path: LatentPath,
    pub summary: PathSummary,
}

/// A running chain. Owns its generator, so a chain seeded identically
/// replays identically.
pub struct Sampler {
    kernel: PdSir,
    cfg: McmcConfig,
    rng: SimRng,
    state: ChainState,
    proposed: LatentPath,
    proposed_summary: PathSummary,
    events: Vec<Event>,
    mask: Vec<bool>,
    selected: Vec<usize>,
    accepted: usize,
    proposals: usize,
    init_attempts: usize,
}

impl Sampler {
    pub fn new(
        y: &IncidenceCounts,
        grid: &ObservationGrid,
        s0: usize,
        i0: usize,
        cfg: &McmcConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let kernel = PdSir::new(grid.clone(), y.clone(), s0, i0)?;
        let mut rng = seeded_rng(cfg.seed);
        let horizon = grid.horizon();
        let mut events = Vec::new();
        let mut start = None;
        for attempt in 1..=MAX_INIT_ATTEMPTS {
            let path = kernel.propose_full(&cfg.init, &mut rng).path;
            let summary = summarize_path_with(&path, horizon, cfg.init.shape, &mut events);
            if summary.is_feasible() {
                start = Some((path, summary, attempt));
                break;
            }
        }
        let (path, summary, init_attempts) = start.ok_or(Error::DegenerateInitialisation {
            attempts: MAX_INIT_ATTEMPTS,
        })?;
        let n = kernel.n_latent();
        Ok(Self {
            proposed: path.clone(),
            proposed_summary: summary,
            state: ChainState {
                params: cfg.init,
                path,
                summary,
            },
            kernel,
            cfg: *cfg,
            rng,
            events,
            mask: vec![false; n],
            selected: Vec::with_capacity(n),
            accepted: 0,
            proposals: 0,
            init_attempts,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn kernel(&self) -> &PdSir {
        &self.kernel
    }

    pub fn acceptance_count(&self) -> usize {
        self.accepted
    }

    pub fn proposal_count(&self) -> usize {
        self.proposals
    }

    /// One full iteration: Gibbs for `β` and `λ`, then a path update.
    /// Returns whether the path proposal was accepted.
    pub fn step(&mut self) -> bool {
        self.gibbs_update();
        self.path_update()
    }

    pub fn gibbs_update(&mut self) {
        let stats = self.state.summary.stats;
        let beta = gibbs_beta(&stats, &self.cfg.priors, &mut self.rng);
        let lambda = gibbs_lambda(&stats, &self.cfg.priors, &mut self.rng);
        self.state.params = Params {
            beta,
            lambda,
            shape: self.cfg.init.shape,
        };
    }

    fn select(&mut self) {
        self.selected.clear();
        let i0 = self.kernel.i0();
        match self.cfg.mode {
            SamplerMode::Block => {
                let n = self.kernel.n_infected();
                self.selected.extend(0..i0);
                let m = subset_size(self.cfg.rho, n);
                if m == n {
                    self.selected.extend(i0..i0 + n);
                } else {
                    let picks = rand::seq::index::sample(&mut self.rng, n, m);
                    self.selected.extend(picks.into_iter().map(|j| i0 + j));
                }
            }
            SamplerMode::SingleSite => {
                let j = self.rng.random_range(0..self.kernel.n_latent());
                self.selected.push(j);
            }
        }
        for &j in &self.selected {
            self.mask[j] = true;
        }
    }

    /// Metropolis-Hastings update of the latent path at the current
    /// parameters.
    pub fn path_update(&mut self) -> bool {
        self.select();
        let params = self.state.params;
        let log_q_fwd = self
            .kernel
            .propose_into(&params, &self.state.path, &self.mask, &mut self.proposed, &mut self.rng);
        self.proposed_summary =
            summarize_path_with(&self.proposed, self.kernel.grid().horizon(), params.shape, &mut self.events);
        let ll_prop = self.proposed_summary.log_likelihood(&params);
        let accept = if ll_prop == f64::NEG_INFINITY {
            false
        } else {
            let ll_cur = self.state.summary.log_likelihood(&params);
            let log_q_rev = self.kernel.log_density_masked(&self.state.path, &params, &self.mask);
            let log_alpha = ll_prop - ll_cur + log_q_rev - log_q_fwd;
            log_alpha >= 0.0 || open01(&mut self.rng).ln() < log_alpha
        };
        if accept {
            std::mem::swap(&mut self.state.path, &mut self.proposed);
            std::mem::swap(&mut self.state.summary, &mut self.proposed_summary);
            self.accepted += 1;
        }
        self.proposals += 1;
        for &j in &self.selected {
            self.mask[j] = false;
        }
        accept
    }

    fn record(&self, iteration: usize, accepted: bool, s0: usize) -> Draw {
        let p = &self.state.params;
        Draw {
            iteration,
            beta: p.beta,
            lambda: p.lambda,
            r0: r0(p, s0),
            loglik: self.state.summary.log_likelihood(p),
            accepted,
        }
    }

    /// Run the configured number of iterations, keeping every `thin`-th.
    pub fn run(mut self) -> ChainOutput {
        let s0 = self.kernel.s0();
        let iterations = self.cfg.iterations;
        let thin = self.cfg.thin;
        let mut draws = Vec::with_capacity(iterations / thin + 1);
        let start = Instant::now();
        for it in 1..=iterations {
            let accepted = self.step();
            if it % thin == 0 {
                draws.push(self.record(it, accepted, s0));
            }
        }
        ChainOutput {
            draws,
            acceptance_count: self.accepted,
            proposal_count: self.proposals,
            wall_time: start.elapsed().as_secs_f64(),
            init_attempts: self.init_attempts,
        }
    }
}

/// Run a chain with the mode recorded in `cfg`.
pub fn run_chain(
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    s0: usize,
    i0: usize,
    cfg: &McmcConfig,
) -> Result<ChainOutput> {
    Ok(Sampler::new(y, grid, s0, i0, cfg)?.run())
}

/// Run a chain that refreshes one individual per iteration.
pub fn run_single_site(
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    s0: usize,
    i0: usize,
    cfg: &McmcConfig,
) -> Result<ChainOutput> {
    let cfg = McmcConfig {
        mode: SamplerMode::SingleSite,
        ..*cfg
    };
    run_chain(y, grid, s0, i0, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sir_loglik, Individual};

    fn benchmark_data() -> (ObservationGrid, IncidenceCounts) {
        (
            ObservationGrid::uniform(6.0, 10).unwrap(),
            IncidenceCounts::new(vec![12, 13, 21, 46, 91, 127, 156, 151, 88, 41]),
        )
    }

    #[test]
    fn gibbs_moments() {
        let stats = SufficientStats {
            n_infections: 40,
            n_removals: 30,
            integral_si: 200.0,
            sum_powered_durations: 25.0,
        };
        let priors = PriorHyper::default();
        let mut rng = seeded_rng(1);
        let n = 200_000;
        let mean_b: f64 = (0..n).map(|_| gibbs_beta(&stats, &priors, &mut rng)).sum::<f64>() / n as f64;
        let mean_l: f64 = (0..n).map(|_| gibbs_lambda(&stats, &priors, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean_b - 40.01 / 201.0).abs() < 0.002);
        assert!((mean_l - 30.01 / 26.0).abs() < 0.01);
    }

    #[test]
    fn identical_proposal_has_unit_ratio() {
        let (grid, y) = benchmark_data();
        let kernel = PdSir::new(grid, y, 1000, 10).unwrap();
        let params = Params::new(0.002, 1.0, 2.0).unwrap();
        let path = kernel.propose_full(&params, &mut seeded_rng(2)).path;
        assert_eq!(log_acceptance_ratio(&kernel, &params, &path, &path, &[0, 20, 30]), 0.0);
    }

    #[test]
    fn full_refresh_ratio_is_importance_weight_ratio() {
        let (grid, y) = benchmark_data();
        let kernel = PdSir::new(grid.clone(), y, 1000, 10).unwrap();
        let params = Params::new(0.002, 1.0, 2.0).unwrap();
        let mut rng = seeded_rng(3);
        let a = kernel.propose_full(&params, &mut rng);
        let b = kernel.propose_full(&params, &mut rng);
        let all: Vec<usize> = (0..kernel.n_latent()).collect();
        let expected = (sir_loglik(&b.path, &params, &grid) - b.log_q_forward)
            - (sir_loglik(&a.path, &params, &grid) - a.log_q_forward);
        let got = log_acceptance_ratio(&kernel, &params, &a.path, &b.path, &all);
        assert!((got - expected).abs() < 1e-8 * expected.abs().max(1.0));
    }

    #[test]
    fn chains_replay_bitwise() {
        let (grid, y) = benchmark_data();
        let cfg = McmcConfig::new(300, 0.1, 42, Params::new(0.0002, 0.1, 2.0).unwrap());
        let a = run_chain(&y, &grid, 1000, 10, &cfg).unwrap();
        let b = run_chain(&y, &grid, 1000, 10, &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = run_chain(&y, &grid, 1000, 10, &McmcConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn single_iteration_and_thinning() {
        let (grid, y) = benchmark_data();
        let mut cfg = McmcConfig::new(1, 0.5, 7, Params::new(0.002, 1.0, 2.0).unwrap());
        let out = run_chain(&y, &grid, 1000, 10, &cfg).unwrap();
        assert_eq!(out.draws.len(), 1);
        assert_eq!(out.proposal_count, 1);
        cfg.iterations = 95;
        cfg.thin = 10;
        let out = run_chain(&y, &grid, 1000, 10, &cfg).unwrap();
        assert_eq!(out.draws.len(), 9);
        assert_eq!(out.draws[0].iteration, 10);
    }

    #[test]
    fn chain_stays_feasible() {
        let (grid, y) = benchmark_data();
        let cfg = McmcConfig::new(2000, 0.1, 9, Params::new(0.0002, 0.1, 2.0).unwrap());
        let out = run_chain(&y, &grid, 1000, 10, &cfg).unwrap();
        assert!(out.draws.iter().all(|d| d.loglik.is_finite()));
        assert!(out.acceptance_rate() > 0.0);
        let ss = run_single_site(&y, &grid, 1000, 10, &cfg).unwrap();
        assert!(ss.draws.iter().all(|d| d.loglik.is_finite()));
        assert!(ss.acceptance_rate() > out.acceptance_rate());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let (grid, y) = benchmark_data();
        let init = Params::new(0.002, 1.0, 2.0).unwrap();
        assert!(run_chain(&y, &grid, 1000, 10, &McmcConfig::new(0, 0.5, 0, init)).is_err());
        assert!(run_chain(&y, &grid, 1000, 10, &McmcConfig::new(10, 0.0, 0, init)).is_err());
        assert!(run_chain(&y, &grid, 500, 10, &McmcConfig::new(10, 0.5, 0, init)).is_err());
    }

    #[test]
    fn impossible_data_fails_initialisation() {
        // Two infections in (0, 1] but the only initial infective is
        // removed almost surely before anything can happen.
        let grid = ObservationGrid::uniform(1.0, 1).unwrap();
        let y = IncidenceCounts::new(vec![2]);
        let init = Params::new(1e-12, 1e12, 1.0).unwrap();
        let err = Sampler::new(&y, &grid, 5, 1, &McmcConfig::new(10, 1.0, 0, init)).err().unwrap();
        assert!(matches!(err, Error::DegenerateInitialisation { .. }));
    }

    // Detailed balance of the path kernel at fixed parameters on a tiny
    // model: the stationary average of a statistic under the MH chain must
    // match its self-normalised importance estimate under independent full
    // proposals.
    #[test]
    fn path_kernel_targets_conditional_law() {
        let grid = ObservationGrid::uniform(2.0, 2).unwrap();
        let y = IncidenceCounts::new(vec![2, 1]);
        let kernel = PdSir::new(grid.clone(), y, 5, 1).unwrap();
        let params = Params::new(0.6, 1.2, 1.5).unwrap();
        let stat = |p: &LatentPath| p.individuals()[0].removal.min(2.5) + p.individuals()[3].infection;

        let mut rng = seeded_rng(11);
        let mut num = 0.0;
        let mut den = 0.0;
        let draws: Vec<_> = (0..200_000).map(|_| kernel.propose_full(&params, &mut rng)).collect();
        let logw: Vec<f64> = draws
            .iter()
            .map(|d| sir_loglik(&d.path, &params, &grid) - d.log_q_forward)
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (d, lw) in draws.iter().zip(&logw) {
            let w = (lw - max).exp();
            num += w * stat(&d.path);
            den += w;
        }
        let is_estimate = num / den;

        let mut path = draws[0].path.clone();
        let mut total = 0.0;
        let n = 200_000;
        for _ in 0..n {
            path = mh_latent_step(&kernel, &params, &path, 0.5, &mut rng).unwrap().0;
            total += stat(&path);
        }
        let mh_estimate = total / n as f64;
        assert!((is_estimate - mh_estimate).abs() < 0.02, "{is_estimate} vs {mh_estimate}");
    }

    #[test]
    fn forced_feasible_start_is_kept() {
        let grid = ObservationGrid::uniform(1.0, 1).unwrap();
        let y = IncidenceCounts::new(vec![1]);
        let cfg = McmcConfig::new(5, 1.0, 0, Params::new(1.0, 1.0, 1.0).unwrap());
        let s = Sampler::new(&y, &grid, 3, 1, &cfg).unwrap();
        let ind: &[Individual] = s.state().path.individuals();
        assert_eq!(ind.len(), 2);
        assert!(s.state().summary.is_feasible());
    }
}
