use criterion::{criterion_group, criterion_main, Criterion};
use levyinv::scenario;
use levyinv::sde::{simulate, SimParams};
use levyinv::vfie::assemble;

fn criterion_benchmark(c: &mut Criterion) {
    let ou = scenario::ou();
    let t = ou.triplet().unwrap();
    let d = ou.decomposition().unwrap();
    c.bench_function("assemble_serial", |b| {
        b.iter(|| assemble(&t, &d, 6.0, 96, false).unwrap())
    });
    c.bench_function("assemble_parallel", |b| {
        b.iter(|| assemble(&t, &d, 6.0, 96, true).unwrap())
    });

    let spec = ou.sde.as_ref().unwrap().build().unwrap();
    let params = |par| SimParams {
        n_paths: 2000,
        t_final: 2.0,
        dt: 0.01,
        seed: 12345,
        par,
    };
    c.bench_function("simulate_serial", |b| {
        b.iter(|| simulate(&spec, &params(false)).unwrap())
    });
    c.bench_function("simulate_parallel", |b| {
        b.iter(|| simulate(&spec, &params(true)).unwrap())
    });
}

criterion_group!(benches, criterion_benchmark);
criterion_main!(benches);
