//! Lower envelopes of gamma-density families and the minorization
//! functions `k_r` and `k_θ` that make the whole latent space a small set
//! for the sampler. Everything is computed on the log scale.
//!
//! The envelopes bound `Ga(x; a + α, b + β)` from below over a box of
//! perturbations `0 ≤ α ≤ A`, `0 ≤ β ≤ B`. Over `β` alone the density is
//! unimodal in `β` so the infimum sits at an endpoint; over `α` alone the
//! same holds in `α`; jointly the infimum is attained at `(A, 0)` or
//! `(0, B)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::gamma_ln_pdf;
use crate::error::{Error, Result};
use crate::model::{summarize_path, IncidenceCounts, ObservationGrid, Params, PriorHyper};
use crate::proposal::PdSir;
use crate::rng::seeded_rng;

/// A gamma family `Ga(a + α, b + β)`, `0 ≤ α ≤ shape_cap`,
/// `0 ≤ β ≤ rate_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBox {
    pub a: f64,
    pub b: f64,
    pub shape_cap: f64,
    pub rate_cap: f64,
}

impl GammaBox {
    pub fn new(a: f64, b: f64, shape_cap: f64, rate_cap: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && shape_cap >= 0.0 && rate_cap >= 0.0)
            || !(a.is_finite() && b.is_finite() && shape_cap.is_finite() && rate_cap.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "gamma box needs a, b > 0 and caps >= 0, got ({a}, {b}, {shape_cap}, {rate_cap})"
            )));
        }
        Ok(Self {
            a,
            b,
            shape_cap,
            rate_cap,
        })
    }
}

/// Point where `Ga(x; a, b)` and `Ga(x; a, b + B)` cross:
/// `(a / B) log(1 + B / b)`.
pub fn rate_threshold(a: f64, b: f64, rate_cap: f64) -> f64 {
    (a / rate_cap) * (rate_cap / b).ln_1p()
}

/// Point where `Ga(x; a, b)` and `Ga(x; a + A, b)` cross:
/// `(1 / b) [Γ(a + A) / Γ(a)]^{1 / A}`.
pub fn shape_threshold(a: f64, b: f64, shape_cap: f64) -> f64 {
    ((ln_gamma(a + shape_cap) - ln_gamma(a)) / shape_cap).exp() / b
}

/// `log inf_{0 ≤ β ≤ B} Ga(x; a, b + β)`.
pub fn gamma_inf_rate(x: f64, a: f64, b: f64, rate_cap: f64) -> f64 {
    if rate_cap == 0.0 || x < rate_threshold(a, b, rate_cap) {
        gamma_ln_pdf(x, a, b)
    } else {
        gamma_ln_pdf(x, a, b + rate_cap)
    }
}

/// `log inf_{0 ≤ α ≤ A} Ga(x; a + α, b)`.
pub fn gamma_inf_shape(x: f64, a: f64, b: f64, shape_cap: f64) -> f64 {
    if shape_cap == 0.0 {
        return gamma_ln_pdf(x, a, b);
    }
    if x <= shape_threshold(a, b, shape_cap) {
        gamma_ln_pdf(x, a + shape_cap, b)
    } else {
        gamma_ln_pdf(x, a, b)
    }
}

/// `log inf` of the whole box: `min{Ga(x; a + A, b), Ga(x; a, b + B)}`.
pub fn gamma_inf_joint(x: f64, gbox: &GammaBox) -> f64 {
    let GammaBox {
        a,
        b,
        shape_cap,
        rate_cap,
    } = *gbox;
    gamma_ln_pdf(x, a + shape_cap, b).min(gamma_ln_pdf(x, a, b + rate_cap))
}

/// Agreement between [`gamma_inf_joint`] and a brute-force grid minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub points: usize,
    /// Points where the envelope exceeds some grid member.
    pub violations: usize,
    /// Largest `|log envelope - log grid minimum|`, i.e. the relative
    /// error on the density scale to first order.
    pub max_gap: f64,
}

/// Evaluate the joint envelope at every `x` against a
/// `(steps + 1) × (steps + 1)` grid spanning the box, endpoints included.
pub fn envelope_grid_check(gbox: &GammaBox, xs: &[f64], steps: usize) -> EnvelopeCheck {
    let steps = steps.max(1);
    let mut out = EnvelopeCheck {
        points: xs.len(),
        violations: 0,
        max_gap: 0.0,
    };
    for &x in xs {
        let mut grid_min = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let alpha = gbox.shape_cap * i as f64 / steps as f64;
                let beta = gbox.rate_cap * j as f64 / steps as f64;
                grid_min = grid_min.min(gamma_ln_pdf(x, gbox.a + alpha, gbox.b + beta));
            }
        }
        let env = gamma_inf_joint(x, gbox);
        if env > grid_min + 1e-10 * grid_min.abs().max(1.0) {
            out.violations += 1;
        }
        out.max_gap = out.max_gap.max((env - grid_min).abs());
    }
    out
}

/// `log k_r(θ) = -β n Σ_k I_k (t_k - t_{k-1}) - n_I log n` for a
/// population of `n` individuals.
pub fn k_r(params: &Params, y: &IncidenceCounts, grid: &ObservationGrid, n: usize) -> f64 {
    let exposure: f64 = y
        .counts()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (lo, hi) = grid.interval(k);
            c as f64 * (hi - lo)
        })
        .sum();
    let n_i = y.total();
    let mut out = -params.beta * n as f64 * exposure;
    if n_i > 0 {
        out -= n_i as f64 * (n as f64).ln();
    }
    out
}

/// `log k_θ(θ)`: the product of the lower envelopes of the two conjugate
/// full conditionals over every latent path consistent with the data.
/// `s0` never-infected-at-start susceptibles, `i0` initial infectives.
pub fn k_theta(
    params: &Params,
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    priors: &PriorHyper,
    s0: usize,
    i0: usize,
) -> f64 {
    let n = (s0 + i0) as f64;
    let n_i = y.total() as f64;
    let ever = n_i + i0 as f64;
    let horizon = grid.horizon();
    let beta_part = gamma_inf_rate(params.beta, priors.a_beta + n_i, priors.b_beta, n * ever * horizon);
    let lambda_box = GammaBox {
        a: priors.a_lambda,
        b: priors.b_lambda,
        shape_cap: ever,
        rate_cap: ever * horizon.powf(params.shape),
    };
    beta_part + gamma_inf_joint(params.lambda, &lambda_box)
}

/// Outcome of checking both minorization inequalities on random
/// instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub instances: usize,
    pub kr_violations: usize,
    pub ktheta_violations: usize,
    /// Smallest `log q(Z|θ) - log L(Z|θ) - log k_r(θ)` seen.
    pub kr_min_margin: f64,
    /// Smallest `log π(θ|Z) - log k_θ(θ)` seen.
    pub ktheta_min_margin: f64,
}

impl BoundsReport {
    pub fn holds(&self) -> bool {
        self.kr_violations == 0 && self.ktheta_violations == 0
    }
}

/// Check `k_r(θ) ≤ q(Z|θ) / L(Z|θ)` and `k_θ(θ) ≤ π(θ|Z)` on `instances`
/// draws of `θ` (log-uniform around `centre`, one decade each way) and
/// `Z ~ q(·|θ)`.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    y: &IncidenceCounts,
    grid: &ObservationGrid,
    s0: usize,
    i0: usize,
    priors: &PriorHyper,
    centre: &Params,
    instances: usize,
    seed: u64,
) -> Result<BoundsReport> {
    let kernel = PdSir::new(grid.clone(), y.clone(), s0, i0)?;
    let mut rng = seeded_rng(seed);
    let n = s0 + i0;
    let mut report = BoundsReport {
        instances,
        kr_violations: 0,
        ktheta_violations: 0,
        kr_min_margin: f64::INFINITY,
        ktheta_min_margin: f64::INFINITY,
    };
    for _ in 0..instances {
        let params = Params {
            beta: centre.beta * 10f64.powf(rng.random_range(-1.0..1.0)),
            lambda: centre.lambda * 10f64.powf(rng.random_range(-1.0..1.0)),
            shape: centre.shape,
        };
        let proposal = kernel.propose_full(&params, &mut rng);
        let summary = summarize_path(&proposal.path, grid.horizon(), params.shape);

        let kr_margin = proposal.log_q_forward - summary.log_likelihood(&params) - k_r(&params, y, grid, n);
        if !(kr_margin >= -1e-9 * proposal.log_q_forward.abs().max(1.0)) {
            report.kr_violations += 1;
        }
        report.kr_min_margin = report.kr_min_margin.min(kr_margin);

        let st = summary.stats;
        let log_post = gamma_ln_pdf(params.beta, priors.a_beta + st.n_infections as f64, priors.b_beta + st.integral_si)
            + gamma_ln_pdf(
                params.lambda,
                priors.a_lambda + st.n_removals as f64,
                priors.b_lambda + st.sum_powered_durations,
            );
        let kt_margin = log_post - k_theta(&params, y, grid, priors, s0, i0);
        if !(kt_margin >= -1e-9 * log_post.abs().max(1.0)) {
            report.ktheta_violations += 1;
        }
        report.ktheta_min_margin = report.ktheta_min_margin.min(kt_margin);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid_min(x: f64, a: f64, b: f64, shape_cap: f64, rate_cap: f64, steps: usize) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let alpha = shape_cap * i as f64 / steps as f64;
                let beta = rate_cap * j as f64 / steps as f64;
                m = m.min(gamma_ln_pdf(x, a + alpha, b + beta));
            }
        }
        m
    }

    fn xs() -> impl Iterator<Item = f64> {
        (1..=100).map(|i| i as f64 * 0.1)
    }

    #[test]
    fn degenerate_caps_give_base_density() {
        for x in xs() {
            let base = gamma_ln_pdf(x, 2.0, 0.5);
            assert_eq!(gamma_inf_rate(x, 2.0, 0.5, 0.0), base);
            assert_eq!(gamma_inf_shape(x, 2.0, 0.5, 0.0), base);
            assert_eq!(gamma_inf_joint(x, &GammaBox::new(2.0, 0.5, 0.0, 0.0).unwrap()), base);
        }
    }

    #[test]
    fn thresholds() {
        assert!((rate_threshold(2.0, 0.5, 1.0) - 2.0 * 3f64.ln()).abs() < 1e-14);
        assert!((shape_threshold(1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        let xa = 2.0 * 3f64.ln();
        assert_eq!(gamma_inf_rate(xa - 1e-9, 2.0, 0.5, 1.0), gamma_ln_pdf(xa - 1e-9, 2.0, 0.5));
        assert_eq!(gamma_inf_rate(xa + 1e-9, 2.0, 0.5, 1.0), gamma_ln_pdf(xa + 1e-9, 2.0, 1.5));
        assert_eq!(gamma_inf_shape(0.9, 1.0, 1.0, 1.0), gamma_ln_pdf(0.9, 2.0, 1.0));
        assert_eq!(gamma_inf_shape(1.1, 1.0, 1.0, 1.0), gamma_ln_pdf(1.1, 1.0, 1.0));
    }

    #[test]
    fn one_dimensional_envelopes_match_grid_minimum() {
        for x in xs() {
            let r = gamma_inf_rate(x, 2.0, 0.5, 1.0);
            let gm = grid_min(x, 2.0, 0.5, 0.0, 1.0, 50);
            assert!(r <= gm + 1e-12 * gm.abs());
            assert!((r - gm).abs() <= 1e-10 * gm.abs().max(1.0));
            let s = gamma_inf_shape(x, 1.5, 1.0, 2.0);
            let gm = grid_min(x, 1.5, 1.0, 2.0, 0.0, 50);
            assert!(s <= gm + 1e-12 * gm.abs());
            assert!((s - gm).abs() <= 1e-10 * gm.abs().max(1.0));
        }
    }

    #[test]
    fn joint_envelope_matches_grid_minimum() {
        let gbox = GammaBox::new(2.0, 0.5, 1.0, 1.0).unwrap();
        let xs: Vec<f64> = xs().collect();
        let check = envelope_grid_check(&gbox, &xs, 50);
        assert_eq!(check.violations, 0);
        assert!(check.max_gap <= 1e-6, "{check:?}");
    }

    #[test]
    fn threshold_orderings_hold() {
        // Shape caps are counts of ever-infected individuals, so at least 1.
        let mut rng = seeded_rng(17);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(0.01..20.0);
            let b: f64 = rng.random_range(0.01..20.0);
            let sa: f64 = rng.random_range(1.0..50.0);
            let rb: f64 = rng.random_range(0.01..50.0);
            let tol = 1.0 - 1e-12;
            assert!(shape_threshold(a, b, sa) >= rate_threshold(a, b, rb) * tol);
            assert!(rate_threshold(a + sa, b, rb) >= shape_threshold(a, b + rb, sa) * tol);
        }
    }

    #[test]
    fn k_r_values() {
        let grid = ObservationGrid::uniform(1.0, 1).unwrap();
        let p = Params::new(0.3, 1.0, 2.0).unwrap();
        assert_eq!(k_r(&p, &IncidenceCounts::new(vec![0]), &grid, 2), 0.0);
        let v = k_r(&p, &IncidenceCounts::new(vec![1]), &grid, 2);
        assert!((v - (-0.3 * 2.0 * 1.0 - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn k_theta_without_infections() {
        let grid = ObservationGrid::uniform(1.0, 2).unwrap();
        let priors = PriorHyper::default();
        let p = Params::new(0.5, 0.7, 1.0).unwrap();
        let v = k_theta(&p, &IncidenceCounts::new(vec![0, 0]), &grid, &priors, 4, 1);
        assert!(v.is_finite());
        assert!(v <= gamma_ln_pdf(0.5, 0.01, 1.0) + gamma_ln_pdf(0.7, 0.01, 1.0));
    }

    #[test]
    fn bounds_hold_on_random_instances() {
        let grid = ObservationGrid::uniform(6.0, 10).unwrap();
        let y = IncidenceCounts::new(vec![12, 13, 21, 46, 91, 127, 156, 151, 88, 41]);
        let centre = Params::new(0.00225, 1.0, 2.0).unwrap();
        let rep = certify(&y, &grid, 1000, 10, &PriorHyper::default(), &centre, 1000, 3).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }

    proptest! {
        #[test]
        fn joint_envelope_is_a_lower_bound(
            x in 0.01f64..20.0, a in 0.1f64..10.0, b in 0.1f64..10.0,
            sa in 0.0f64..10.0, rb in 0.0f64..10.0, u in 0.0f64..1.0, v in 0.0f64..1.0,
        ) {
            let gbox = GammaBox::new(a, b, sa, rb).unwrap();
            let member = gamma_ln_pdf(x, a + u * sa, b + v * rb);
            let env = gamma_inf_joint(x, &gbox);
            prop_assert!(env <= member + 1e-10 * member.abs().max(1.0));
            prop_assert!(gamma_inf_rate(x, a, b, rb) <= gamma_ln_pdf(x, a, b + v * rb) + 1e-10 * member.abs().max(1.0));
            prop_assert!(gamma_inf_shape(x, a, b, sa) <= gamma_ln_pdf(x, a + u * sa, b) + 1e-10 * member.abs().max(1.0));
        }
    }
}
