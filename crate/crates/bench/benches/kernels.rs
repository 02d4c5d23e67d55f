use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use selfsim_core::empirical::FieldBuilder;
use selfsim_core::limit::{bivariate_normal_cdf, limit_cov, stable_joint_cdf};
use selfsim_core::models::{stable_cdf, stable_density};
use selfsim_core::simulate::{FbmMethod, GridSpec, SimOptions, Simulator};
use selfsim_core::ProcessSpec;

fn densities(c: &mut Criterion) {
    c.bench_function("stable_density r=1.5", |b| {
        b.iter(|| stable_density(black_box(0.7), 1.5, 1.0))
    });
    c.bench_function("stable_cdf r=1.5", |b| b.iter(|| stable_cdf(black_box(0.7), 1.5, 1.0)));
    c.bench_function("bivariate_normal_cdf", |b| {
        b.iter(|| bivariate_normal_cdf(black_box(0.3), black_box(-0.4), 0.6))
    });
}

fn joint_laws(c: &mut Criterion) {
    let mut g = c.benchmark_group("joint");
    g.sample_size(10);
    g.bench_function("stable_joint_cdf r=1.5", |b| {
        b.iter(|| stable_joint_cdf(1.0, 2.0, black_box(0.2), black_box(-0.1), 1.5, 1.0))
    });
    let spec = ProcessSpec::stable(1.5, 1.0).unwrap();
    g.bench_function("limit_cov stable off-diagonal", |b| {
        b.iter(|| limit_cov((1.0, 0.4), (2.0, 0.6), black_box(&spec)))
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let grid = GridSpec::default();
    let fbm = ProcessSpec::fbm(1.4).unwrap();
    let chol = Simulator::new(&fbm, &grid, &SimOptions::default()).unwrap();
    c.bench_function("fbm cholesky 400 paths x 33 times", |b| {
        b.iter(|| chol.ensemble_seq(400, 1, black_box(0)))
    });

    let fine = GridSpec::uniform(2.0, 1025, 0.25, 0.75, 17).unwrap();
    let opts = SimOptions {
        fbm_method: FbmMethod::Circulant,
        ..SimOptions::default()
    };
    let circ = Simulator::new(&fbm, &fine, &opts).unwrap();
    c.bench_function("fbm circulant 100 paths x 1025 times", |b| {
        b.iter(|| circ.ensemble_seq(100, 1, black_box(0)))
    });

    let stable = ProcessSpec::stable(1.5, 1.0).unwrap();
    let sim = Simulator::new(&stable, &grid, &SimOptions::default()).unwrap();
    let ens = sim.ensemble_seq(400, 1, 0);
    let builder = FieldBuilder::new(&stable, &grid).unwrap();
    c.bench_function("quantile_field 400 paths x 33 x 17", |b| {
        b.iter(|| builder.field(black_box(&ens)))
    });
}

criterion_group!(benches, densities, joint_laws, simulation);
criterion_main!(benches);
