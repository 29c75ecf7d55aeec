//! Epidemic domain types and the complete-data likelihood.
//!
//! A [`LatentPath`] stores only the individuals that are ever infectious
//! during the observation window: the `i0` initial infectives first, then
//! every individual infected in `(0, T]`. Susceptibles that are never
//! infected carry no latent coordinates and are represented by the count
//! `s0 - n_I`. This keeps the latent state proportional to the outbreak
//! size rather than the population size.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Model parameters: pairwise infection rate, Weibull scale and the fixed
/// Weibull shape of the infectious period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub beta: f64,
    pub lambda: f64,
    pub shape: f64,
}

impl Params {
    pub fn new(beta: f64, lambda: f64, shape: f64) -> Result<Self> {
        let p = Self {
            beta,
            lambda,
            shape,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("shape", self.shape),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Expected infectious period `λ^{-1/a} Γ(1 + 1/a)`.
    pub fn mean_infectious_period(&self) -> f64 {
        mean_weibull(self.lambda, self.shape)
    }
}

pub(crate) fn mean_weibull(lambda: f64, shape: f64) -> f64 {
    (ln_gamma(1.0 + 1.0 / shape) - lambda.ln() / shape).exp()
}

/// Gamma(shape, rate) hyperparameters for the independent priors on
/// `beta` and `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    pub a_beta: f64,
    pub b_beta: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
}

impl Default for PriorHyper {
    /// Weakly informative `Ga(0.01, 1)` on both parameters.
    fn default() -> Self {
        Self {
            a_beta: 0.01,
            b_beta: 1.0,
            a_lambda: 0.01,
            b_lambda: 1.0,
        }
    }
}

impl PriorHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_beta", self.a_beta),
            ("b_beta", self.b_beta),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "prior hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Breakpoints `0 = t_0 < t_1 < ... < t_K = T`. Interval `k` (zero-based)
/// is the half-open set `(t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGrid {
    breakpoints: Vec<f64>,
}

impl ObservationGrid {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidGrid(
                "need at least one interval (two breakpoints)".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        for (k, w) in breakpoints.windows(2).enumerate() {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "breakpoints must be finite and strictly increasing \
                     (t_{} = {}, t_{} = {})",
                    k,
                    w[0],
                    k + 1,
                    w[1]
                )));
            }
        }
        Ok(Self { breakpoints })
    }

    /// `k` equal-length intervals covering `(0, horizon]`.
    pub fn uniform(horizon: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("number of intervals must be >= 1".into()));
        }
        let points = (0..=k)
            .map(|i| {
                if i == k {
                    horizon
                } else {
                    horizon * i as f64 / k as f64
                }
            })
            .collect();
        Self::new(points)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn num_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Bounds `(t_k, t_{k+1})` of interval `k`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    /// Index of the interval containing `t`, or `None` for `t <= 0`,
    /// `t > T` and non-finite `t`.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        if !(t > 0.0 && t <= self.horizon()) {
            return None;
        }
        Some(self.first_breakpoint_at_or_after(t) - 1)
    }

    /// Smallest `m` with `t_m >= t`; `K + 1` when `t > T`.
    pub(crate) fn first_breakpoint_at_or_after(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < t)
    }
}

/// Observed infection counts, one per observation interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceCounts {
    counts: Vec<usize>,
}

impl IncidenceCounts {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Prefix sums with a leading zero: entry `k` counts infections in
    /// `(0, t_k]`.
    pub fn cumulative(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.counts.len() + 1);
        out.push(0);
        let mut acc = 0;
        for &c in &self.counts {
            acc += c;
            out.push(acc);
        }
        out
    }

    /// Check that the counts fit the grid and the susceptible pool.
    pub fn validate_against(&self, grid: &ObservationGrid, s0: usize) -> Result<()> {
        if self.counts.len() != grid.num_intervals() {
            return Err(Error::InvalidData(format!(
                "{} counts for {} observation intervals",
                self.counts.len(),
                grid.num_intervals()
            )));
        }
        let total = self.total();
        if total > s0 {
            return Err(Error::InvalidData(format!(
                "{total} observed infections exceed the {s0} initial susceptibles"
            )));
        }
        Ok(())
    }
}

/// Infection and removal time of one ever-infectious individual.
/// `removal` is `f64::INFINITY` when the individual is not removed by the
/// end of the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub infection: f64,
    pub removal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    s0: usize,
    i0: usize,
    individuals: Vec<Individual>,
}

impl LatentPath {
    /// Build and validate a path. The first `i0` individuals are the
    /// initial infectives and must have infection time 0.
    pub fn new(s0: usize, i0: usize, individuals: Vec<Individual>) -> Result<Self> {
        let path = Self {
            s0,
            i0,
            individuals,
        };
        path.validate()?;
        Ok(path)
    }

    pub(crate) fn from_parts_unchecked(
        s0: usize,
        i0: usize,
        individuals: Vec<Individual>,
    ) -> Self {
        Self {
            s0,
            i0,
            individuals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.individuals.len() < self.i0 {
            return Err(Error::InvalidPath(format!(
                "{} individuals stored but {} initial infectives declared",
                self.individuals.len(),
                self.i0
            )));
        }
        if self.n_infected() > self.s0 {
            return Err(Error::InvalidPath(format!(
                "{} infections among {} susceptibles",
                self.n_infected(),
                self.s0
            )));
        }
        for (j, ind) in self.individuals.iter().enumerate() {
            let initial = j < self.i0;
            if initial && ind.infection != 0.0 {
                return Err(Error::InvalidPath(format!(
                    "initial infective {j} has infection time {}",
                    ind.infection
                )));
            }
            if !initial && !(ind.infection.is_finite() && ind.infection > 0.0) {
                return Err(Error::InvalidPath(format!(
                    "individual {j} has infection time {}, expected a finite positive time",
                    ind.infection
                )));
            }
            if ind.removal.is_nan() || ind.removal <= ind.infection {
                return Err(Error::InvalidPath(format!(
                    "individual {j} removed at {} but infected at {}",
                    ind.removal, ind.infection
                )));
            }
        }
        Ok(())
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn i0(&self) -> usize {
        self.i0
    }

    /// Population size `n = s0 + i0`.
    pub fn population(&self) -> usize {
        self.s0 + self.i0
    }

    /// Number of individuals infected after time 0.
    pub fn n_infected(&self) -> usize {
        self.individuals.len() - self.i0
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub(crate) fn individuals_mut(&mut self) -> &mut Vec<Individual> {
        &mut self.individuals
    }

    pub fn is_initial(&self, j: usize) -> bool {
        j < self.i0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    // Declaration order is the tie-break: removals fire before infections
    // at an identical timestamp.
    Removal,
    Infection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Fill `buf` with every finite event of `path` in time order.
pub fn sorted_events(path: &LatentPath, buf: &mut Vec<Event>) {
    buf.clear();
    for (j, ind) in path.individuals.iter().enumerate() {
        if j >= path.i0 {
            buf.push(Event {
                time: ind.infection,
                kind: EventKind::Infection,
            });
        }
        if ind.removal.is_finite() {
            buf.push(Event {
                time: ind.removal,
                kind: EventKind::Removal,
            });
        }
    }
    // Event times are non-negative: their bit patterns sort like the values
    // and the unused sign bit makes room for the tie-break.
    buf.sort_unstable_by_key(|e| (e.time.to_bits() << 1) | e.kind as u64);
}

/// Right-continuous step functions `S(t)`, `I(t)`, `R(t)`.
/// Segment `m` holds on `[times[m], times[m + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub susceptible: Vec<usize>,
    pub infectious: Vec<usize>,
    pub removed: Vec<usize>,
}

impl Trajectory {
    /// Compartment sizes `(S, I, R)` at time `t >= 0`.
    pub fn at(&self, t: f64) -> (usize, usize, usize) {
        let m = self.times.partition_point(|&s| s <= t).max(1) - 1;
        (self.susceptible[m], self.infectious[m], self.removed[m])
    }
}

pub fn compartment_trajectory(path: &LatentPath) -> Trajectory {
    let mut events = Vec::new();
    sorted_events(path, &mut events);
    let (mut s, mut i, mut r) = (path.s0, path.i0, 0usize);
    let mut traj = Trajectory {
        times: vec![0.0],
        susceptible: vec![s],
        infectious: vec![i],
        removed: vec![r],
    };
    for ev in events {
        match ev.kind {
            EventKind::Removal => {
                i -= 1;
                r += 1;
            }
            EventKind::Infection => {
                s -= 1;
                i += 1;
            }
        }
        if *traj.times.last().unwrap() == ev.time {
            // Collapse simultaneous events into one step.
            *traj.susceptible.last_mut().unwrap() = s;
            *traj.infectious.last_mut().unwrap() = i;
            *traj.removed.last_mut().unwrap() = r;
        } else {
            traj.times.push(ev.time);
            traj.susceptible.push(s);
            traj.infectious.push(i);
            traj.removed.push(r);
        }
    }
    traj
}

/// Statistics that drive both the likelihood and the conjugate updates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SufficientStats {
    /// Infections in `(0, T]`.
    pub n_infections: usize,
    /// Removals in `(0, T]`, initial infectives included.
    pub n_removals: usize,
    /// `∫_0^T S(t) I(t) dt`.
    pub integral_si: f64,
    /// `Σ_removed (τ^R - τ^I)^a + Σ_censored (T - τ^I)^a`.
    pub sum_powered_durations: f64,
}

/// Sufficient statistics plus the two path-dependent terms of the
/// log-likelihood that are free of parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathSummary {
    pub stats: SufficientStats,
    /// `Σ_j log I(τ^I_j-)`; `-∞` when an infection happens while nobody
    /// is infectious.
    pub log_pressure: f64,
    /// `Σ_removed log(τ^R - τ^I)`.
    pub sum_log_durations: f64,
}

impl PathSummary {
    pub fn is_feasible(&self) -> bool {
        self.log_pressure > f64::NEG_INFINITY
    }

    /// Complete-data log-likelihood with Weibull infectious periods.
    pub fn log_likelihood(&self, params: &Params) -> f64 {
        if !self.is_feasible() {
            return f64::NEG_INFINITY;
        }
        let st = &self.stats;
        let n_i = st.n_infections as f64;
        let n_r = st.n_removals as f64;
        n_i * params.beta.ln() + self.log_pressure - params.beta * st.integral_si
            + n_r * (params.lambda.ln() + params.shape.ln())
            + (params.shape - 1.0) * self.sum_log_durations
            - params.lambda * st.sum_powered_durations
    }
}

#[inline]
pub(crate) fn pow_shape(x: f64, shape: f64) -> f64 {
    if shape == 1.0 {
        x
    } else if shape == 2.0 {
        x * x
    } else {
        x.powf(shape)
    }
}

/// Summarise `path` on `(0, horizon]`, reusing `events` as scratch.
pub fn summarize_path_with(
    path: &LatentPath,
    horizon: f64,
    shape: f64,
    events: &mut Vec<Event>,
) -> PathSummary {
    sorted_events(path, events);

    let mut s = path.s0 as f64;
    let mut i = path.i0 as f64;
    let mut t_prev = 0.0;
    let mut integral = 0.0;
    let mut log_pressure = 0.0;
    let mut n_infections = 0usize;
    for ev in events.iter() {
        if ev.time > horizon {
            break;
        }
        integral += s * i * (ev.time - t_prev);
        t_prev = ev.time;
        match ev.kind {
            EventKind::Removal => i -= 1.0,
            EventKind::Infection => {
                if i < 0.5 {
                    log_pressure = f64::NEG_INFINITY;
                } else {
                    log_pressure += i.ln();
                }
                n_infections += 1;
                s -= 1.0;
                i += 1.0;
            }
        }
    }
    integral += s * i * (horizon - t_prev);

    let mut n_removals = 0usize;
    let mut sum_pow = 0.0;
    let mut sum_log = 0.0;
    for ind in &path.individuals {
        if ind.infection > horizon {
            continue;
        }
        if ind.removal <= horizon {
            let d = ind.removal - ind.infection;
            n_removals += 1;
            sum_pow += pow_shape(d, shape);
            sum_log += d.ln();
        } else {
            sum_pow += pow_shape(horizon - ind.infection, shape);
        }
    }

    PathSummary {
        stats: SufficientStats {
            n_infections,
            n_removals,
            integral_si: integral,
            sum_powered_durations: sum_pow,
        },
        log_pressure,
        sum_log_durations: sum_log,
    }
}

pub fn summarize_path(path: &LatentPath, horizon: f64, shape: f64) -> PathSummary {
    summarize_path_with(path, horizon, shape, &mut Vec::new())
}

pub fn sufficient_stats(path: &LatentPath, grid: &ObservationGrid, shape: f64) -> SufficientStats {
    summarize_path(path, grid.horizon(), shape).stats
}

/// Complete-data log-likelihood of `path`; `-∞` for paths with an
/// infection while `I(t-) = 0`.
pub fn sir_loglik(path: &LatentPath, params: &Params, grid: &ObservationGrid) -> f64 {
    summarize_path(path, grid.horizon(), params.shape).log_likelihood(params)
}

/// Infections per observation interval. Initial infectives are not counted.
pub fn bin_infections(path: &LatentPath, grid: &ObservationGrid) -> IncidenceCounts {
    let mut counts = vec![0usize; grid.num_intervals()];
    for ind in &path.individuals[path.i0..] {
        if let Some(k) = grid.interval_of(ind.infection) {
            counts[k] += 1;
        }
    }
    IncidenceCounts::new(counts)
}

/// Basic reproduction number `β s0 λ^{-1/a} Γ(1 + 1/a)`.
pub fn r0(params: &Params, s0: usize) -> f64 {
    params.beta * s0 as f64 * params.mean_infectious_period()
}
