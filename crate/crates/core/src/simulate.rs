//! Exact event-driven simulation of the SIR model with Weibull infectious
//! periods.
//!
//! Removal times are scheduled once, at infection, in a min-heap. Between
//! events the infection hazard `β S I` is constant, so the next infection
//! time is an exponential clock that is redrawn after every event.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::distributions::RemovalLaw;
use crate::error::{Error, Result};
use crate::model::{bin_infections, IncidenceCounts, Individual, LatentPath, ObservationGrid, Params};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub s0: usize,
    pub i0: usize,
    pub params: Params,
    pub horizon: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.params.beta != 0.0 {
            self.params.validate()?;
        } else {
            // beta = 0 is allowed in simulation: an epidemic that never spreads.
            Params::new(1.0, self.params.lambda, self.params.shape)?;
        }
        if self.i0 == 0 {
            return Err(Error::InvalidConfig("need at least one initial infective".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

// Min-heap entry keyed on removal time.
#[derive(Debug, PartialEq)]
struct Scheduled(f64);

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Simulate one epidemic on `(0, cfg.horizon]` using the generator seeded
/// by `cfg.seed`.
pub fn simulate_sir(cfg: &SimConfig) -> Result<LatentPath> {
    cfg.validate()?;
    Ok(simulate_sir_with(cfg, &mut seeded_rng(cfg.seed)))
}

/// As [`simulate_sir`] but drawing from `rng`; `cfg.seed` is ignored.
/// The config is assumed valid.
pub fn simulate_sir_with<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> LatentPath {
    let horizon = cfg.horizon;
    let beta = cfg.params.beta;
    let law = RemovalLaw::new(cfg.params.lambda, cfg.params.shape, horizon);

    let mut individuals = Vec::with_capacity(cfg.i0 + 16);
    let mut heap = BinaryHeap::new();
    for _ in 0..cfg.i0 {
        let removal = law.sample(0.0, rng);
        if removal.is_finite() {
            heap.push(Scheduled(removal));
        }
        individuals.push(Individual {
            infection: 0.0,
            removal,
        });
    }

    let mut t = 0.0;
    let mut s = cfg.s0;
    let mut i = cfg.i0;
    loop {
        let next_removal = heap.peek().map_or(f64::INFINITY, |e| e.0);
        let pressure = beta * s as f64 * i as f64;
        let next_infection = if pressure > 0.0 {
            let w: f64 = Exp1.sample(rng);
            t + w / pressure
        } else {
            f64::INFINITY
        };
        if next_removal.min(next_infection) > horizon {
            break;
        }
        if next_removal <= next_infection {
            heap.pop();
            t = next_removal;
            i -= 1;
        } else {
            t = next_infection;
            let removal = law.sample(t, rng);
            if removal.is_finite() {
                heap.push(Scheduled(removal));
            }
            individuals.push(Individual {
                infection: t,
                removal,
            });
            s -= 1;
            i += 1;
        }
    }

    LatentPath::from_parts_unchecked(cfg.s0, cfg.i0, individuals)
}

/// Simulate a path and bin its infections on `grid`.
pub fn simulate_dataset(
    cfg: &SimConfig,
    grid: &ObservationGrid,
) -> Result<(LatentPath, IncidenceCounts)> {
    check_horizon(cfg, grid)?;
    let path = simulate_sir(cfg)?;
    let counts = bin_infections(&path, grid);
    Ok((path, counts))
}

fn check_horizon(cfg: &SimConfig, grid: &ObservationGrid) -> Result<()> {
    if grid.horizon() != cfg.horizon {
        return Err(Error::InvalidConfig(format!(
            "grid ends at {} but the simulation horizon is {}",
            grid.horizon(),
            cfg.horizon
        )));
    }
    Ok(())
}

/// A simulated dataset together with the number of discarded draws.
#[derive(Debug, Clone)]
pub struct ConditionedDataset {
    pub path: LatentPath,
    pub counts: IncidenceCounts,
    pub attempts: usize,
}

/// Resimulate until at least `min_infections` infections occur in the
/// window, giving up after `max_attempts` draws.
pub fn simulate_dataset_conditioned(
    cfg: &SimConfig,
    grid: &ObservationGrid,
    min_infections: usize,
    max_attempts: usize,
) -> Result<ConditionedDataset> {
    cfg.validate()?;
    check_horizon(cfg, grid)?;
    let mut rng = seeded_rng(cfg.seed);
    for attempts in 1..=max_attempts {
        let path = simulate_sir_with(cfg, &mut rng);
        if path.n_infected() >= min_infections {
            let counts = bin_infections(&path, grid);
            return Ok(ConditionedDataset {
                path,
                counts,
                attempts,
            });
        }
    }
    Err(Error::InvalidConfig(format!(
        "no epidemic reached {min_infections} infections in {max_attempts} simulations"
    )))
}
