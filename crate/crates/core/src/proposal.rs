//! Surrogate-process proposals for the latent event times.
//!
//! The surrogate freezes the per-susceptible infection rate over each
//! observation interval at `μ_k = β I(t_k)`, the prevalence at the start of
//! the interval. Within an interval the susceptible pool then follows a
//! linear death process, and conditionally on the number of deaths the
//! death times are i.i.d. truncated exponentials. Drawing the `I_k`
//! infection times of interval `k` that way reproduces the observed counts
//! by construction. Removal times follow the exact infectious-period law,
//! censored at the horizon.
//!
//! # Layout
//!
//! Paths handled here are in *canonical layout*: the `i0` initial
//! infectives first, then the individuals infected in interval 0, then
//! interval 1, and so on. Every proposal keeps each individual in its
//! interval, so the layout (and the counts) never change. Paths returned by
//! the simulator are already canonical; [`PdSir::canonicalize`] reorders any
//! other consistent path.
//!
//! # Partial refreshes
//!
//! A refresh touches a subset `U` of individuals. The kernel walks the
//! intervals in time order; `μ_k` is computed from the path being built,
//! where individuals outside `U` keep their current times and members of
//! `U` in earlier intervals already carry their new times. The same walk
//! over an existing path gives the reverse density for a Metropolis-Hastings
//! ratio restricted to `U`.

use std::ops::Range;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{RemovalLaw, TruncExp};
use crate::error::{Error, Result};
use crate::model::{IncidenceCounts, Individual, LatentPath, ObservationGrid, Params};

/// Fraction of infected individuals refreshed per proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub rho: f64,
}

impl ProposalConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1], got {rho}")));
        }
        Ok(Self { rho })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalResult {
    pub path: LatentPath,
    /// Log proposal density of the refreshed coordinates.
    pub log_q_forward: f64,
    /// Indices of the refreshed individuals, initial infectives included.
    pub updated_set: Vec<usize>,
}

/// `⌈rho · n⌉` without floating-point overshoot, clamped to `[1, n]` for
/// `n > 0`.
pub fn subset_size(rho: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let x = rho * n as f64;
    let m = (x - 1e-9 * x.max(1.0)).ceil() as usize;
    m.clamp(1, n)
}

/// The proposal kernel bound to one dataset.
#[derive(Debug, Clone)]
pub struct PdSir {
    grid: ObservationGrid,
    counts: IncidenceCounts,
    s0: usize,
    i0: usize,
    cumulative: Vec<usize>,
}

impl PdSir {
    pub fn new(grid: ObservationGrid, counts: IncidenceCounts, s0: usize, i0: usize) -> Result<Self> {
        counts.validate_against(&grid, s0)?;
        if i0 == 0 {
            return Err(Error::InvalidConfig("need at least one initial infective".into()));
        }
        let cumulative = counts.cumulative();
        Ok(Self {
            grid,
            counts,
            s0,
            i0,
            cumulative,
        })
    }

    pub fn grid(&self) -> &ObservationGrid {
        &self.grid
    }

    pub fn counts(&self) -> &IncidenceCounts {
        &self.counts
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn i0(&self) -> usize {
        self.i0
    }

    pub fn n_infected(&self) -> usize {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Number of individuals carrying latent coordinates.
    pub fn n_latent(&self) -> usize {
        self.i0 + self.n_infected()
    }

    /// Individuals infected in interval `k` under the canonical layout.
    pub fn interval_range(&self, k: usize) -> Range<usize> {
        self.i0 + self.cumulative[k]..self.i0 + self.cumulative[k + 1]
    }

    /// Check that `path` is consistent with the counts and in canonical
    /// layout.
    pub fn check_layout(&self, path: &LatentPath) -> Result<()> {
        if path.s0() != self.s0 || path.i0() != self.i0 {
            return Err(Error::InvalidPath(format!(
                "path has (s0, i0) = ({}, {}), kernel expects ({}, {})",
                path.s0(),
                path.i0(),
                self.s0,
                self.i0
            )));
        }
        if path.individuals().len() != self.n_latent() {
            return Err(Error::InvalidPath(format!(
                "path has {} infected individuals, data has {}",
                path.n_infected(),
                self.n_infected()
            )));
        }
        let ind = path.individuals();
        for k in 0..self.grid.num_intervals() {
            let (lo, hi) = self.grid.interval(k);
            for j in self.interval_range(k) {
                let z = ind[j].infection;
                if !(z > lo && z <= hi) {
                    return Err(Error::InvalidPath(format!(
                        "individual {j} infected at {z}, outside interval ({lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reorder a path consistent with the counts into canonical layout.
    pub fn canonicalize(&self, path: &LatentPath) -> Result<LatentPath> {
        let mut ind = path.individuals().to_vec();
        let start = path.i0().min(ind.len());
        ind[start..].sort_by(|a, b| a.infection.total_cmp(&b.infection));
        let out = LatentPath::new(path.s0(), path.i0(), ind)?;
        self.check_layout(&out)?;
        Ok(out)
    }

    fn blank_path(&self) -> LatentPath {
        LatentPath::from_parts_unchecked(
            self.s0,
            self.i0,
            vec![
                Individual {
                    infection: 0.0,
                    removal: f64::INFINITY,
                };
                self.n_latent()
            ],
        )
    }

    /// Indices refreshed by a `rho` block update: every initial infective
    /// plus `⌈rho n_I⌉` infected individuals chosen uniformly without
    /// replacement. Sorted.
    pub fn select_subset<R: Rng + ?Sized>(&self, rho: f64, rng: &mut R) -> Vec<usize> {
        let n = self.n_infected();
        let m = subset_size(rho, n);
        let mut out: Vec<usize> = (0..self.i0).collect();
        out.extend(sample_indices(rng, n, m).into_iter().map(|j| self.i0 + j));
        out[self.i0..].sort_unstable();
        out
    }

    /// Draw a complete latent path from the surrogate process.
    pub fn propose_full<R: Rng + ?Sized>(&self, params: &Params, rng: &mut R) -> ProposalResult {
        let mask = vec![true; self.n_latent()];
        let mut path = self.blank_path();
        let current = path.clone();
        let log_q_forward = self.propose_into(params, &current, &mask, &mut path, rng);
        ProposalResult {
            path,
            log_q_forward,
            updated_set: (0..self.n_latent()).collect(),
        }
    }

    /// Refresh `⌈rho n_I⌉` random infected individuals and every initial
    /// infective of `current`.
    pub fn propose_subset<R: Rng + ?Sized>(
        &self,
        current: &LatentPath,
        params: &Params,
        cfg: &ProposalConfig,
        rng: &mut R,
    ) -> Result<ProposalResult> {
        let selected = self.select_subset(cfg.rho, rng);
        self.propose_selected(current, params, &selected, rng)
    }

    /// Refresh exactly the individuals in `selected`.
    pub fn propose_selected<R: Rng + ?Sized>(
        &self,
        current: &LatentPath,
        params: &Params,
        selected: &[usize],
        rng: &mut R,
    ) -> Result<ProposalResult> {
        self.check_layout(current)?;
        let mask = self.mask_from(selected)?;
        let mut path = self.blank_path();
        let log_q_forward = self.propose_into(params, current, &mask, &mut path, rng);
        let mut updated_set = selected.to_vec();
        updated_set.sort_unstable();
        updated_set.dedup();
        Ok(ProposalResult {
            path,
            log_q_forward,
            updated_set,
        })
    }

    /// Log density of the coordinates of `path` listed in `updated`, with
    /// every `μ_k` computed from `path` itself. `-∞` when `path` is not in
    /// canonical layout or a coordinate is outside its support.
    pub fn log_density(&self, path: &LatentPath, params: &Params, updated: &[usize]) -> f64 {
        if self.check_layout(path).is_err() {
            return f64::NEG_INFINITY;
        }
        match self.mask_from(updated) {
            Ok(mask) => self.log_density_masked(path, params, &mask),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub(crate) fn mask_from(&self, selected: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.n_latent()];
        for &j in selected {
            if j >= mask.len() {
                return Err(Error::InvalidConfig(format!(
                    "index {j} outside the {} latent individuals",
                    mask.len()
                )));
            }
            mask[j] = true;
        }
        Ok(mask)
    }

    #[inline]
    fn removal_slot(&self, removal: f64) -> usize {
        self.grid.first_breakpoint_at_or_after(removal)
    }

    /// Build the proposal into `out`: masked individuals are redrawn,
    /// the rest copied from `current`. Both paths must be in canonical
    /// layout. Returns the log density of the redrawn coordinates.
    pub(crate) fn propose_into<R: Rng + ?Sized>(
        &self,
        params: &Params,
        current: &LatentPath,
        mask: &[bool],
        out: &mut LatentPath,
        rng: &mut R,
    ) -> f64 {
        let k_count = self.grid.num_intervals();
        let law = RemovalLaw::new(params.lambda, params.shape, self.grid.horizon());
        // removed_at[m]: removals in (t_{m-1}, t_m]; slot K + 1 collects
        // censored individuals.
        let mut removed_at = vec![0usize; k_count + 2];
        let mut log_q = 0.0;
        let cur = current.individuals();
        let dst = out.individuals_mut();

        for j in 0..self.i0 {
            let removal = if mask[j] {
                let r = law.sample(0.0, rng);
                log_q += law.ln_density(0.0, r);
                r
            } else {
                cur[j].removal
            };
            dst[j] = Individual {
                infection: 0.0,
                removal,
            };
            removed_at[self.removal_slot(removal)] += 1;
        }

        let mut removed = 0usize;
        for k in 0..k_count {
            removed += removed_at[k];
            let infectious = self.i0 + self.cumulative[k] - removed;
            let (lo, hi) = self.grid.interval(k);
            let infection_law = TruncExp::new_unchecked(params.beta * infectious as f64, lo, hi);
            for j in self.interval_range(k) {
                let ind = if mask[j] {
                    let z = infection_law.sample(rng);
                    let r = law.sample(z, rng);
                    log_q += infection_law.ln_pdf(z) + law.ln_density(z, r);
                    Individual {
                        infection: z,
                        removal: r,
                    }
                } else {
                    cur[j]
                };
                dst[j] = ind;
                removed_at[self.removal_slot(ind.removal)] += 1;
            }
        }
        log_q
    }

    pub(crate) fn log_density_masked(&self, path: &LatentPath, params: &Params, mask: &[bool]) -> f64 {
        let k_count = self.grid.num_intervals();
        let law = RemovalLaw::new(params.lambda, params.shape, self.grid.horizon());
        let mut removed_at = vec![0usize; k_count + 2];
        let mut log_q = 0.0;
        let ind = path.individuals();

        for j in 0..self.i0 {
            if mask[j] {
                log_q += law.ln_density(0.0, ind[j].removal);
            }
            removed_at[self.removal_slot(ind[j].removal)] += 1;
        }

        let mut removed = 0usize;
        for k in 0..k_count {
            removed += removed_at[k];
            let infectious = (self.i0 + self.cumulative[k]).saturating_sub(removed);
            let (lo, hi) = self.grid.interval(k);
            let infection_law = TruncExp::new_unchecked(params.beta * infectious as f64, lo, hi);
            for j in self.interval_range(k) {
                let Individual { infection, removal } = ind[j];
                if mask[j] {
                    log_q += infection_law.ln_pdf(infection) + law.ln_density(infection, removal);
                }
                removed_at[self.removal_slot(removal)] += 1;
            }
        }
        log_q
    }
}

/// Draw a full latent path consistent with `y`.
pub fn propose_full<R: Rng + ?Sized>(
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    params: &Params,
    s0: usize,
    i0: usize,
    rng: &mut R,
) -> Result<ProposalResult> {
    let kernel = PdSir::new(grid.clone(), y.clone(), s0, i0)?;
    Ok(kernel.propose_full(params, rng))
}

/// Refresh a `rho` fraction of the infected individuals of `current`.
pub fn propose_subset<R: Rng + ?Sized>(
    current: &LatentPath,
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    params: &Params,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<ProposalResult> {
    let kernel = PdSir::new(grid.clone(), y.clone(), current.s0(), current.i0())?;
    let current = kernel.canonicalize(current)?;
    kernel.propose_subset(&current, params, cfg, rng)
}

/// Log proposal density of the `updated_set` coordinates of `path`.
/// `path` must be in canonical layout for `y`; otherwise `-∞`.
pub fn proposal_logdensity(
    path: &LatentPath,
    updated_set: &[usize],
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    params: &Params,
) -> f64 {
    match PdSir::new(grid.clone(), y.clone(), path.s0(), path.i0()) {
        Ok(kernel) => kernel.log_density(path, params, updated_set),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_one_sample, ks_two_sample};
    use crate::distributions::{weibull_logpdf, weibull_logsurvival};
    use crate::model::bin_infections;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;

    fn benchmark_counts() -> (ObservationGrid, IncidenceCounts) {
        (
            ObservationGrid::uniform(6.0, 10).unwrap(),
            IncidenceCounts::new(vec![12, 13, 21, 46, 91, 127, 156, 151, 88, 41]),
        )
    }

    #[test]
    fn subset_size_rounding() {
        assert_eq!(subset_size(0.2, 746), 150);
        assert_eq!(subset_size(1.0 / 746.0, 746), 1);
        assert_eq!(subset_size(1.0, 746), 746);
        assert_eq!(subset_size(0.5, 0), 0);
        assert_eq!(subset_size(1e-6, 10), 1);
    }

    #[test]
    fn full_proposal_reproduces_counts() {
        let (grid, y) = benchmark_counts();
        let params = Params::new(0.00225, 1.0, 2.0).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let res = propose_full(&y, &grid, &params, 1000, 10, &mut rng).unwrap();
            assert_eq!(bin_infections(&res.path, &grid), y);
            res.path.validate().unwrap();
        }
    }

    #[test]
    fn empty_counts_only_refresh_initial_infectives() {
        let grid = ObservationGrid::uniform(2.0, 3).unwrap();
        let y = IncidenceCounts::new(vec![0, 0, 0]);
        let params = Params::new(0.5, 1.0, 2.0).unwrap();
        let res = propose_full(&y, &grid, &params, 10, 2, &mut seeded_rng(3)).unwrap();
        assert_eq!(res.path.individuals().len(), 2);
        let law = RemovalLaw::new(1.0, 2.0, 2.0);
        let expected: f64 = res.path.individuals().iter().map(|i| law.ln_density(0.0, i.removal)).sum();
        assert!((res.log_q_forward - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_density_matches_evaluation() {
        let (grid, y) = benchmark_counts();
        let params = Params::new(0.002, 0.9, 2.0).unwrap();
        let kernel = PdSir::new(grid, y, 1000, 10).unwrap();
        let mut rng = seeded_rng(4);
        let full = kernel.propose_full(&params, &mut rng);
        assert_eq!(kernel.log_density(&full.path, &params, &full.updated_set), full.log_q_forward);
        let sub = kernel
            .propose_subset(&full.path, &params, &ProposalConfig::new(0.2).unwrap(), &mut rng)
            .unwrap();
        assert_eq!(sub.updated_set.len(), 10 + 150);
        assert_eq!(kernel.log_density(&sub.path, &params, &sub.updated_set), sub.log_q_forward);
    }

    #[test]
    fn single_interval_hand_density() {
        // K = 1, one infection, i0 = 1, beta = lambda = 1, a = 1, T = 1.
        let grid = ObservationGrid::uniform(1.0, 1).unwrap();
        let y = IncidenceCounts::new(vec![1]);
        let params = Params::new(1.0, 1.0, 1.0).unwrap();
        let path = LatentPath::new(
            3,
            1,
            vec![
                Individual { infection: 0.0, removal: 0.8 },
                Individual { infection: 0.4, removal: f64::INFINITY },
            ],
        )
        .unwrap();
        let lq = proposal_logdensity(&path, &[0, 1], &y, &grid, &params);
        // I(0) = 1 so mu = 1 on (0, 1].
        let trunc_exp = (-0.4f64).exp() / (1.0 - (-1f64).exp());
        let expected = weibull_logpdf(0.8, 1.0, 1.0) + trunc_exp.ln() + weibull_logsurvival(0.6, 1.0, 1.0);
        assert!((lq - expected).abs() < 1e-12);
        // Outside the support of its interval.
        let bad = LatentPath::new(
            3,
            1,
            vec![
                Individual { infection: 0.0, removal: 0.8 },
                Individual { infection: 1.2, removal: f64::INFINITY },
            ],
        )
        .unwrap();
        assert_eq!(proposal_logdensity(&bad, &[0, 1], &y, &grid, &params), f64::NEG_INFINITY);
    }

    #[test]
    fn single_infection_follows_trunc_exp() {
        let grid = ObservationGrid::uniform(1.0, 1).unwrap();
        let y = IncidenceCounts::new(vec![1]);
        let params = Params::new(1.0, 1.0, 1.0).unwrap();
        let kernel = PdSir::new(grid, y, 5, 1).unwrap();
        let mut rng = seeded_rng(5);
        // The initial infective's removal can empty the infectious pool
        // only after t_0, so mu is always beta * 1.
        let xs: Vec<f64> = (0..100_000)
            .map(|_| kernel.propose_full(&params, &mut rng).path.individuals()[1].infection)
            .collect();
        let ks = ks_one_sample(&xs, |x| ((1.0 - (-x).exp()) / (1.0 - (-1f64).exp())).clamp(0.0, 1.0));
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn rho_one_matches_full_proposal() {
        let grid = ObservationGrid::uniform(3.0, 3).unwrap();
        let y = IncidenceCounts::new(vec![2, 3, 1]);
        let params = Params::new(0.3, 1.0, 2.0).unwrap();
        let kernel = PdSir::new(grid, y, 8, 2).unwrap();
        let mut rng = seeded_rng(6);
        let start = kernel.propose_full(&params, &mut rng).path;
        let cfg = ProposalConfig::new(1.0).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..50_000 {
            let full = kernel.propose_full(&params, &mut rng).path;
            let sub = kernel.propose_subset(&start, &params, &cfg, &mut rng).unwrap().path;
            // Interval-2 individuals see the most upstream dependence.
            a.push(full.individuals()[7].infection);
            b.push(sub.individuals()[7].infection);
        }
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn single_refresh_retains_everyone_else() {
        let (grid, y) = benchmark_counts();
        let params = Params::new(0.002, 1.0, 2.0).unwrap();
        let kernel = PdSir::new(grid, y, 1000, 10).unwrap();
        let mut rng = seeded_rng(7);
        let current = kernel.propose_full(&params, &mut rng).path;
        let cfg = ProposalConfig::new(1.0 / 746.0).unwrap();
        let res = kernel.propose_subset(&current, &params, &cfg, &mut rng).unwrap();
        let infected: Vec<usize> = res.updated_set.iter().copied().filter(|&j| j >= 10).collect();
        assert_eq!(infected.len(), 1);
        for (j, (a, b)) in current.individuals().iter().zip(res.path.individuals()).enumerate() {
            if !res.updated_set.contains(&j) {
                assert_eq!(a.infection.to_bits(), b.infection.to_bits());
                assert_eq!(a.removal.to_bits(), b.removal.to_bits());
            }
        }
    }

    // Brute-force recomputation of the density: rebuild I(t_k) by scanning
    // every individual instead of the sequential slot counts.
    fn brute_force_density(kernel: &PdSir, path: &LatentPath, params: &Params, updated: &[usize]) -> f64 {
        let grid = kernel.grid();
        let law = RemovalLaw::new(params.lambda, params.shape, grid.horizon());
        let ind = path.individuals();
        let mut total = 0.0;
        for &j in updated {
            if j < kernel.i0() {
                total += law.ln_density(0.0, ind[j].removal);
                continue;
            }
            let k = grid.interval_of(ind[j].infection).unwrap();
            let (lo, hi) = grid.interval(k);
            let infectious = ind
                .iter()
                .filter(|i| i.infection <= lo && i.removal > lo)
                .count();
            let mu = params.beta * infectious as f64;
            let te = if mu * (hi - lo) < 1e-10 {
                -(hi - lo).ln()
            } else {
                mu.ln() - mu * (ind[j].infection - lo) - (1.0 - (-mu * (hi - lo)).exp()).ln()
            };
            total += te + law.ln_density(ind[j].infection, ind[j].removal);
        }
        total
    }

    #[test]
    fn density_matches_brute_force_after_perturbation() {
        let grid = ObservationGrid::uniform(4.0, 4).unwrap();
        let y = IncidenceCounts::new(vec![2, 4, 3, 1]);
        let params = Params::new(0.2, 1.0, 2.0).unwrap();
        let kernel = PdSir::new(grid, y, 20, 2).unwrap();
        let mut rng = seeded_rng(8);
        for _ in 0..200 {
            let mut path = kernel.propose_full(&params, &mut rng).path;
            let updated = kernel.select_subset(0.5, &mut rng);
            let before = kernel.log_density(&path, &params, &updated);
            assert!((before - brute_force_density(&kernel, &path, &params, &updated)).abs() < 1e-9);
            // Move a non-updated individual's removal: only mu_k can change.
            if let Some(j) = (2..12).find(|j| !updated.contains(j)) {
                let ind = &mut path.individuals_mut()[j];
                ind.removal = ind.infection + 0.05;
                let after = kernel.log_density(&path, &params, &updated);
                assert!((after - brute_force_density(&kernel, &path, &params, &updated)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn canonicalize_reorders() {
        let grid = ObservationGrid::uniform(2.0, 2).unwrap();
        let y = IncidenceCounts::new(vec![1, 1]);
        let path = LatentPath::new(
            4,
            1,
            vec![
                Individual { infection: 0.0, removal: 1.9 },
                Individual { infection: 1.5, removal: f64::INFINITY },
                Individual { infection: 0.5, removal: 1.0 },
            ],
        )
        .unwrap();
        let kernel = PdSir::new(grid, y, 4, 1).unwrap();
        assert!(kernel.check_layout(&path).is_err());
        let canon = kernel.canonicalize(&path).unwrap();
        assert_eq!(canon.individuals()[1].infection, 0.5);
        kernel.check_layout(&canon).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn evaluated_density_is_finite_for_own_draws(seed in 0u64..10_000, rho in 0.01f64..1.0) {
            let (grid, y) = benchmark_counts();
            let params = Params::new(0.00225, 1.0, 2.0).unwrap();
            let kernel = PdSir::new(grid, y, 1000, 10).unwrap();
            let mut rng = seeded_rng(seed);
            let current = kernel.propose_full(&params, &mut rng).path;
            let res = kernel.propose_subset(&current, &params, &ProposalConfig::new(rho).unwrap(), &mut rng).unwrap();
            prop_assert!(kernel.log_density(&current, &params, &res.updated_set).is_finite());
            prop_assert!(res.log_q_forward.is_finite());
        }
    }
}
