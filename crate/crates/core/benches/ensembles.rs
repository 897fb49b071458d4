//! Replicate ensembles under `Execution::Sequential` and `Execution::Parallel`.
//!
//! Built without the `parallel` feature both arms run sequentially, which
//! gives the baseline for the fallback path.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use levy_ou::model::{DiagonalModel, Sequence};
use levy_ou::measure::LevyMeasure;
use levy_ou::ou::{PathPlan, TimeGrid};
use levy_ou::par::{try_map_indexed, Execution};
use levy_ou::rng::RngStream;
use levy_ou::stable_integral::{IntegralOptions, IntegralPlan, KernelRegistry, StableMeasureSpace, ValidatedKernel};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ou_paths(c: &mut Criterion) {
    let model = DiagonalModel::with_b(
        LevyMeasure::stable(1.5).unwrap(),
        Sequence::power(1.0, -1.0),
        Sequence::power(1.0, 1.0),
    )
    .unwrap();
    let grid = TimeGrid::uniform(1.0, 101).unwrap();
    let plan = PathPlan::split(&model, 1.0, 0.01, 50, grid).unwrap();
    let root = RngStream::root(1);
    let mut group = c.benchmark_group("ou_split_paths");
    group.sample_size(10);
    for reps in [256usize, 2048] {
        group.throughput(Throughput::Elements(reps as u64));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, reps), &reps, |b, &reps| {
                b.iter(|| {
                    let v = try_map_indexed(reps, exec, |r| Ok(plan.sample(root.replicate(r as u64))?.terminal())).unwrap();
                    black_box(v)
                })
            });
        }
    }
    group.finish();
}

fn integral_paths(c: &mut Criterion) {
    let space = StableMeasureSpace::interval(0.0, 1.0, 1.2).unwrap();
    let params = BTreeMap::from([("lambda".to_string(), 2.0)]);
    let kernel = KernelRegistry::with_builtins().build("ou", &params, 1.0).unwrap();
    let vk = ValidatedKernel::new(&kernel, &space).unwrap();
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
    let plan = IntegralPlan::new(&vk, 0.01, grid, IntegralOptions::default()).unwrap();
    let root = RngStream::root(2);
    let reps = 1024usize;
    let mut group = c.benchmark_group("stable_integral_paths");
    group.sample_size(10);
    group.throughput(Throughput::Elements(reps as u64));
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(try_map_indexed(reps, exec, |r| plan.sample(root.replicate(r as u64))).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, ou_paths, integral_paths);
criterion_main!(benches);
