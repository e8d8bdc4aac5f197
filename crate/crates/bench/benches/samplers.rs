use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mola_core::enumerator::enumerate_states;
use mola_core::field_io::bundled_field;
use mola_core::rng::rng_from_seed;
use mola_core::sampler::{cluster_step, metropolis_sweep};
use mola_core::{
    delta_phi_single_flip, evaluate, run_chain, AllocationMap, ChainConfig, Engine, LandUse, ModelParams,
};
use rand::Rng;

fn random_map(rows: usize, cols: usize, seed: u64) -> AllocationMap {
    let mut rng = rng_from_seed(seed);
    let codes: Vec<u8> = (0..rows * cols).map(|_| rng.random_range(0..3)).collect();
    AllocationMap::from_codes(rows, cols, &codes).unwrap()
}

fn objective(c: &mut Criterion) {
    let field = bundled_field();
    let params = ModelParams::new(1.0, 4.4, 1.0).unwrap();
    let map = random_map(30, 30, 1);
    c.bench_function("evaluate 30x30", |b| b.iter(|| evaluate(black_box(&map), &field, &params)));
    c.bench_function("single-flip delta", |b| {
        b.iter(|| delta_phi_single_flip(black_box(&map), &field, &params, 14, 17, LandUse::Conservation))
    });
}

fn samplers(c: &mut Criterion) {
    let field = bundled_field();
    let params = ModelParams::new(1.0, 4.4, 1.0).unwrap();
    let mut group = c.benchmark_group("30x30");
    group.bench_function("metropolis sweep", |b| {
        let mut map = random_map(30, 30, 2);
        let mut rng = rng_from_seed(3);
        b.iter(|| metropolis_sweep(&mut map, &field, &params, &mut rng).unwrap())
    });
    group.bench_function("cluster step", |b| {
        let mut map = random_map(30, 30, 4);
        let mut rng = rng_from_seed(5);
        b.iter(|| cluster_step(&mut map, &field, &params, &mut rng).unwrap())
    });
    for engine in Engine::ALL {
        group.bench_function(format!("{engine} chain, 100 sweeps"), |b| {
            let mut cfg = ChainConfig::new(engine, 6);
            cfg.burn_in_sweeps = 0;
            cfg.sample_interval_sweeps = 100;
            cfg.n_samples = 1;
            b.iter(|| run_chain(cfg.clone(), &field, params).unwrap().count())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let field = bundled_field().crop(0, 0, 3, 3).unwrap();
    let params = ModelParams::new(1.0, 2.0, 1.0).unwrap();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("enumerate 3x3", |b| b.iter(|| enumerate_states(3, 3, &field, &params).unwrap()));
    group.finish();
}

criterion_group!(benches, objective, samplers, oracle);
criterion_main!(benches);
