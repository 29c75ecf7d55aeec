//! Chain diagnostics and the experiment harnesses built on them.

mod harness;
mod ks;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::mcmc::ChainOutput;

pub use harness::{
    coverage_experiment, coverage_experiment_with, rho_sweep, CoverageReport, CoverageSettings,
    SweepRow, SweepScenario,
};
pub use ks::{kolmogorov_survival, ks_one_sample, ks_two_sample, KsResult};

/// Series shorter than this report their length as the ESS.
const MIN_ESS_LEN: usize = 10;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Biased autocovariance `γ_t = n⁻¹ Σ (x_i - x̄)(x_{i+t} - x̄)` for all lags,
/// via a zero-padded FFT.
pub fn autocovariance(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let m = mean(xs);
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs
        .iter()
        .map(|&x| Complex::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// Effective sample size from Geyer's initial monotone positive sequence
/// estimator. Constant series give 1; the result never exceeds `n`.
pub fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < MIN_ESS_LEN {
        return n as f64;
    }
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return 1.0;
    }
    let acov = autocovariance(xs);
    let var = acov[0];
    if !(var > 0.0) {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (acov[2 * m] + acov[2 * m + 1]) / var;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    let tau = 2.0 * sum - 1.0;
    (n as f64 / tau).clamp(1.0, n as f64)
}

/// Quantile by linear interpolation between order statistics
/// (`x_(⌊h⌋) + (h - ⌊h⌋)(x_(⌊h⌋+1) - x_(⌊h⌋))`, `h = (n - 1) p`) of an
/// already sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Equal-tailed credible interval holding `mass` of the draws.
pub fn equal_tailed_ci(xs: &[f64], mass: f64) -> (f64, f64) {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - mass) / 2.0;
    (quantile_sorted(&v, tail), quantile_sorted(&v, 1.0 - tail))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl ParamSummary {
    pub fn from_draws(xs: &[f64], mass: f64) -> Self {
        let (ci_lower, ci_upper) = equal_tailed_ci(xs, mass);
        Self {
            mean: mean(xs),
            sd: std_dev(xs),
            ess: ess(xs),
            ci_lower,
            ci_upper,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }

    /// Monte Carlo standard error of the mean.
    pub fn mcse(&self) -> f64 {
        self.sd / self.ess.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub beta: ParamSummary,
    pub lambda: ParamSummary,
    pub r0: ParamSummary,
    pub acceptance_rate: f64,
    pub draws_used: usize,
    pub credible_mass: f64,
}

impl PosteriorSummary {
    /// ESS of `beta` per second of chain wall time.
    pub fn ess_per_sec(&self, wall_time: f64) -> [f64; 3] {
        let w = wall_time.max(f64::MIN_POSITIVE);
        [self.beta.ess / w, self.lambda.ess / w, self.r0.ess / w]
    }
}

/// Summarise the draws recorded after iteration `burn_in`.
pub fn summarize_chain(output: &ChainOutput, burn_in: usize, mass: f64) -> PosteriorSummary {
    let kept: Vec<_> = output.draws.iter().filter(|d| d.iteration > burn_in).collect();
    let pick = |f: fn(&crate::mcmc::Draw) -> f64| kept.iter().map(|d| f(d)).collect::<Vec<f64>>();
    PosteriorSummary {
        beta: ParamSummary::from_draws(&pick(|d| d.beta), mass),
        lambda: ParamSummary::from_draws(&pick(|d| d.lambda), mass),
        r0: ParamSummary::from_draws(&pick(|d| d.r0), mass),
        acceptance_rate: output.acceptance_rate(),
        draws_used: kept.len(),
        credible_mass: mass,
    }
}
