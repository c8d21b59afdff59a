use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use signflow::cones::{contraction_probe, ConeParams};
use signflow::energy::{EnergyModel, Nonlinearity};
use signflow::exec::{map_range, Execution};
use signflow::flow::FlowParams;
use signflow::grid::{Field, Grid};
use signflow::minimax::{SurfaceSolver, SurfaceVariant};
use signflow::sampling::{random_smooth_field, substream};

const MODES: [(Execution, &str); 2] = [
    (Execution::Sequential, "sequential"),
    (Execution::Parallel, "parallel"),
];

fn model(grid: Grid) -> EnergyModel {
    EnergyModel::new(grid, Nonlinearity::odd_power(4.0).unwrap())
}

fn surface_sweeps(c: &mut Criterion) {
    let m = model(Grid::square(31).unwrap());
    let (fp, cp) = (FlowParams::default(), ConeParams::default());
    let mut group = c.benchmark_group("surface_sweep_2d_n31");
    group.sample_size(10);
    for (exec, name) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || SurfaceSolver::new(&m, SurfaceVariant::GammaS, &fp, &cp, 4, exec).unwrap(),
                |mut solver| {
                    for _ in 0..5 {
                        solver.sweep().unwrap();
                    }
                    solver
                },
                BatchSize::LargeInput,
            );
        });
    }
    group.finish();
}

fn cone_probe(c: &mut Criterion) {
    let m = model(Grid::square(32).unwrap());
    let cp = ConeParams::default();
    let mut group = c.benchmark_group("contraction_probe_2d_n32");
    group.sample_size(10);
    for (exec, name) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| contraction_probe(&m, &cp, 100, 7, exec).unwrap());
        });
    }
    group.finish();
}

fn batch_operator(c: &mut Criterion) {
    let grid = Grid::square(63).unwrap();
    let m = model(grid);
    let fields: Vec<Field> = (0..64)
        .map(|i| random_smooth_field(grid, &mut substream(9, i)).scaled(5.0))
        .collect();
    let mut group = c.benchmark_group("operator_a_batch64_2d_n63");
    for (exec, name) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_range(exec, fields.len(), |i| m.operator_a(&fields[i]).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(benches, surface_sweeps, cone_probe, batch_operator);
criterion_main!(benches);
