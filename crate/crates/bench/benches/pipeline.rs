use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use mgale_bench::{programs_dir, suite};
use mgale_core::montecarlo::SimConfig;
use mgale_core::pipeline::{analyze, validate};

fn analysis(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze");
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    for (name, req) in suite(&programs_dir()) {
        g.bench_function(name, |b| b.iter(|| analyze(&req).unwrap()));
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("validate_10k");
    g.sample_size(10);
    for (name, req) in suite(&programs_dir()) {
        let a = analyze(&req).unwrap();
        let Some(params) = a.sim_params().unwrap() else { continue };
        let cfg = SimConfig { trials: 10_000, ..Default::default() };
        g.bench_function(name, |b| b.iter(|| validate(&a, params.clone(), cfg.clone()).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, analysis, simulation);
criterion_main!(benches);
