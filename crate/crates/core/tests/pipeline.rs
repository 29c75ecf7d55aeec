use pdsir_core::proposal::proposal_logdensity;
use pdsir_core::simulate::simulate_dataset_conditioned;
use pdsir_core::{
    bin_infections, run_chain, sir_loglik, summarize_chain, McmcConfig, ObservationGrid, Params, PdSir, SimConfig,
};

fn dataset() -> (ObservationGrid, pdsir_core::IncidenceCounts, Params) {
    let grid = ObservationGrid::uniform(6.0, 8).unwrap();
    let truth = Params::new(0.012, 1.0, 2.0).unwrap();
    let cfg = SimConfig {
        s0: 150,
        i0: 5,
        params: truth,
        horizon: 6.0,
        seed: 17,
    };
    let sim = simulate_dataset_conditioned(&cfg, &grid, 20, 1000).unwrap();
    assert_eq!(bin_infections(&sim.path, &grid), sim.counts);
    assert!(sir_loglik(&sim.path, &truth, &grid).is_finite());
    (grid, sim.counts, truth)
}

#[test]
fn simulated_data_fits_end_to_end() {
    let (grid, y, truth) = dataset();
    let cfg = McmcConfig::new(20_000, 0.3, 3, truth);
    let out = run_chain(&y, &grid, 150, 5, &cfg).unwrap();
    assert_eq!(out.draws.len(), 20_000);
    assert!(out.draws.iter().all(|d| d.loglik.is_finite()));
    let s = summarize_chain(&out, 2_000, 0.9);
    assert!(s.beta.ci_lower < s.beta.ci_upper);
    assert!(s.beta.mean > truth.beta / 3.0 && s.beta.mean < truth.beta * 3.0);
    assert!(out.acceptance_rate() > 0.0 && out.acceptance_rate() < 1.0);
}

#[test]
fn kernel_and_free_functions_agree() {
    let (grid, y, truth) = dataset();
    let kernel = PdSir::new(grid.clone(), y.clone(), 150, 5).unwrap();
    let mut rng = pdsir_core::rng::seeded_rng(9);
    let full = kernel.propose_full(&truth, &mut rng);
    let all: Vec<usize> = (0..full.path.individuals().len()).collect();
    let via_free = proposal_logdensity(&full.path, &all, &y, &grid, &truth);
    assert!((via_free - full.log_q_forward).abs() < 1e-9 * full.log_q_forward.abs().max(1.0));
}
