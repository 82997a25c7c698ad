use criterion::{criterion_group, criterion_main, Criterion};
use ezdeepc::bo::{propose_next, unit_grid, GpSurrogate, KernelParams};

fn posterior(c: &mut Criterion) {
    let samples: Vec<f64> = (0..16).map(|i| (i as f64 * 0.618).fract()).collect();
    let obs: Vec<f64> = samples.iter().map(|a| -(a - 0.6) * (a - 0.6)).collect();
    let grid = unit_grid(1001);
    c.bench_function("surrogate fit (16 samples)", |b| {
        b.iter(|| GpSurrogate::fit(KernelParams::default(), 0.1, &samples, &obs).unwrap())
    });
    let gp = GpSurrogate::fit(KernelParams::default(), 0.1, &samples, &obs).unwrap();
    c.bench_function("UCB proposal (1001-point grid)", |b| b.iter(|| propose_next(&gp, 2.576, &grid)));
}

criterion_group!(benches, posterior);
criterion_main!(benches);
