use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hvtest_core::mc::{run_experiment_with_threads, Overlay};
use hvtest_core::{BaseModel, ExperimentSpec, ModelSpec, SimGrid};
use std::hint::black_box;

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let grid = SimGrid::new(23_400).unwrap();
    let models = [
        ("constant", ModelSpec::new(BaseModel::constant_reference())),
        ("heston", ModelSpec::new(BaseModel::heston_reference())),
        (
            "heston_jumps_noise",
            ModelSpec::new(BaseModel::heston_reference())
                .with_jumps(20.0, 0.5)
                .with_noise(0.01),
        ),
    ];
    for (name, model) in models {
        group.bench_function(name, |b| {
            b.iter(|| model.simulate(grid, black_box(9)).unwrap())
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let reps = 64;
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    group.throughput(Throughput::Elements(reps as u64));
    let overlays = [
        ("plain", Overlay::None),
        (
            "truncated",
            Overlay::Jumps {
                lambda: 20.0,
                sigma_jump: 0.5,
            },
        ),
        ("preaveraged", Overlay::Noise { eta: 0.01 }),
    ];
    for (name, overlay) in overlays {
        let spec =
            ExperimentSpec::null_only(BaseModel::constant_reference(), overlay, 23_400, reps, 1);
        for threads in [1usize, 4] {
            group.bench_with_input(BenchmarkId::new(name, threads), &threads, |b, &t| {
                b.iter(|| run_experiment_with_threads(black_box(&spec), Some(t)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, simulate, experiment);
criterion_main!(benches);
