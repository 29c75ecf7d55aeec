use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdsir_core::mcmc::Sampler;
use pdsir_core::model::{summarize_path, sorted_events};
use pdsir_core::rng::seeded_rng;
use pdsir_core::{IncidenceCounts, McmcConfig, ObservationGrid, Params, PdSir};

fn data() -> (ObservationGrid, IncidenceCounts) {
    (
        ObservationGrid::uniform(6.0, 10).unwrap(),
        IncidenceCounts::new(vec![12, 13, 21, 46, 91, 127, 156, 151, 88, 41]),
    )
}

fn truth() -> Params {
    Params::new(0.00225, 1.0, 2.0).unwrap()
}

fn path_kernels(c: &mut Criterion) {
    let (grid, y) = data();
    let kernel = PdSir::new(grid.clone(), y, 1000, 10).unwrap();
    let mut rng = seeded_rng(1);
    let path = kernel.propose_full(&truth(), &mut rng).path;

    c.bench_function("propose_full/746", |b| b.iter(|| kernel.propose_full(black_box(&truth()), &mut rng)));
    let all: Vec<usize> = (0..kernel.n_latent()).collect();
    c.bench_function("log_density/746", |b| b.iter(|| kernel.log_density(black_box(&path), &truth(), &all)));
    c.bench_function("summarize_path/746", |b| b.iter(|| summarize_path(black_box(&path), 6.0, 2.0)));
    let mut buf = Vec::new();
    c.bench_function("sorted_events/746", |b| b.iter(|| sorted_events(black_box(&path), &mut buf)));
}

fn chain_step(c: &mut Criterion) {
    let (grid, y) = data();
    let mut group = c.benchmark_group("sampler_step");
    for rho in [0.02, 0.2, 1.0] {
        let cfg = McmcConfig::new(1, rho, 3, truth());
        let mut sampler = Sampler::new(&y, &grid, 1000, 10, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(rho), &rho, |b, _| b.iter(|| sampler.step()));
    }
    group.finish();
}

criterion_group!(benches, path_kernels, chain_step);
criterion_main!(benches);
