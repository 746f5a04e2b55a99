//! Benchmarks for the numeric hot paths: exact assignment, the interacting
//! Euler step, path norms, and the improper-integral rate machinery.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mvdelay_core::engine::step_interacting;
use mvdelay_core::metrics::{assignment, empirical_wasserstein, path_norm, Order, PathNorm};
use mvdelay_core::model::{
    CoefficientModel, Diffusion, Drift, InitialParams, InitialSpec, Kernel, ModelMode,
    ParticleCloud, ScalarOrVec, Segment, StructuralConstants, TimeGrid,
};
use mvdelay_core::noise::NoiseStream;
use mvdelay_core::rates::RateFunction;

fn gaussian_cloud(n: usize, m: usize, seed: u64) -> ParticleCloud {
    let grid = TimeGrid::new(0.01, m, 1).unwrap();
    let spec = InitialSpec {
        name: "brownian_history".into(),
        params: InitialParams {
            mean: Some(ScalarOrVec::Scalar(0.0)),
            std: Some(1.0),
            bm_scale: Some(1.0),
            ..Default::default()
        },
    };
    spec.sample_cloud(&grid, n, seed).unwrap()
}

fn bench_assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("assignment_solve");
    for n in [64usize, 256, 512] {
        let noise = NoiseStream::new(7);
        let mut costs = vec![0.0; n * n];
        noise.fill_standard_normal(0, mvdelay_core::noise::Channel::Init, 0, &mut costs);
        for v in costs.iter_mut() {
            *v = v.abs();
        }
        let matrix = assignment::CostMatrix::new(n, costs).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &matrix, |b, m| {
            b.iter(|| black_box(assignment::solve_min(m)))
        });
    }
    group.finish();
}

fn bench_wasserstein(c: &mut Criterion) {
    let a = gaussian_cloud(128, 4, 1);
    let b = gaussian_cloud(128, 4, 2);
    c.bench_function("empirical_wasserstein_n128_m4", |bench| {
        bench.iter(|| {
            black_box(empirical_wasserstein(&a, &b, Order::P2, PathNorm::GammaR0).unwrap())
        })
    });
}

fn bench_interacting_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_interacting");
    group.sample_size(20);
    let model = CoefficientModel {
        drift: Drift::DoubleWell,
        kernel: Some(Kernel::Linear { coef: 0.05 }),
        diffusion: Diffusion::Zero,
        beta: 1.0,
        constants: StructuralConstants {
            k1: 2.0,
            k2: 2.0,
            k3: 0.0,
            k_sigma: 0.0,
            k_b: 0.1,
            r_radius: 1.0,
        },
        mode: ModelMode::Theorem3,
    };
    let noise = NoiseStream::new(3);
    for n in [256usize, 1024] {
        let cloud = gaussian_cloud(n, 4, 9);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cl| {
            b.iter(|| black_box(step_interacting(cl, &model, &noise, 0).unwrap()))
        });
    }
    group.finish();
}

fn bench_path_norms(c: &mut Criterion) {
    let grid = TimeGrid::new(0.01, 100, 1).unwrap();
    let seg = Segment::constant(&[1.0, -2.0], &grid).unwrap();
    c.bench_function("gamma_norm_m100_d2", |b| {
        b.iter(|| black_box(path_norm(&seg, PathNorm::GammaR0)))
    });
}

fn bench_rate_machinery(c: &mut Criterion) {
    let rf = RateFunction::paper(2.0, 2.0, 1.0, 0.01, 1.0).unwrap();
    c.bench_function("delta_paper_piecewise", |b| {
        b.iter(|| black_box(rf.delta(1e-10).unwrap()))
    });
    c.bench_function("f_value_r2_tol1e12", |b| {
        b.iter(|| black_box(rf.f_value(2.0, 1e-12).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_assignment,
    bench_wasserstein,
    bench_interacting_step,
    bench_path_norms,
    bench_rate_machinery
);
criterion_main!(benches);
