use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exactbpdn::batch::{log_grid, solve_grids};
use exactbpdn::linalg::norm_inf;
use exactbpdn::{generate_instance, solve_batch, DynamicRange, Execution, InstanceBundle, Job, SolveOptions};

fn instances(count: u64, m: usize, n: usize) -> Vec<InstanceBundle> {
    (0..count).map(|s| generate_instance(m, n, m / 4, s, DynamicRange::Hdr).unwrap()).collect()
}

fn single_solves(c: &mut Criterion) {
    let bundles = instances(16, 40, 160);
    let jobs: Vec<Job<'_>> = bundles
        .iter()
        .flat_map(|bnd| {
            let t0 = norm_inf(&bnd.a.tr_mul(&bnd.b));
            [0.0, 0.01, 0.1].map(move |f| Job { a: &bnd.a, b: &bnd.b, t: f * t0 })
        })
        .collect();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve_batch");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        group.bench_with_input(BenchmarkId::new(name, jobs.len()), &exec, |bch, &exec| {
            bch.iter(|| solve_batch(&jobs, &opts, exec))
        });
    }
    group.finish();
}

fn grids(c: &mut Criterion) {
    let bundles = instances(8, 30, 120);
    let pairs: Vec<_> = bundles.iter().map(|bnd| (&bnd.a, &bnd.b)).collect();
    let grid =
        |a: &exactbpdn::DesignMatrix, b: &nalgebra::DVector<f64>| log_grid(norm_inf(&a.tr_mul(b)), 64, 1e-4, 1.0, true);
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve_grids");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        group.bench_with_input(BenchmarkId::new(name, pairs.len()), &exec, |bch, &exec| {
            bch.iter(|| solve_grids(&pairs, grid, &opts, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, single_solves, grids);
criterion_main!(benches);
