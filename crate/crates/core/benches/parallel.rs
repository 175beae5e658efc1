//! Sequential against rayon execution on the three parallel drivers: seeds
//! of the finite-N study, candidates of the greedy search and points of a
//! parameter sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use netmimo_core::allocation::ConstraintMode;
use netmimo_core::csit::{effective_spectral_efficiency, Csit, Fairness, TrainingConfig};
use netmimo_core::exec::{try_map_indexed, Execution};
use netmimo_core::geometry::{build_linear_layout, cluster_reduce, db_to_linear, PathlossParams};
use netmimo_core::montecarlo::convergence_study;
use netmimo_core::reference;
use netmimo_core::scheduler::{greedy_fractions, AsymptoticModel, GreedyOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn study(c: &mut Criterion) {
    let p = reference::two_cell_problem();
    let mut g = c.benchmark_group("convergence_study_n32_16_seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| convergence_study(&p, &reference::TWO_CELL_MU, &[32], 16, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn greedy(c: &mut Criterion) {
    // per-BS constraint on a 4-BS cluster: every candidate runs the dual solver
    let layout = build_linear_layout(8, 6, PathlossParams::wimax(), db_to_linear(reference::LAYOUT_POWER_DB))
        .unwrap()
        .with_cluster_size(4)
        .unwrap();
    let p = cluster_reduce(&layout, 0, 4.0).unwrap();
    let model = AsymptoticModel::new(p.clone(), ConstraintMode::PerBs);
    let w = vec![1.0; p.num_groups()];
    let mut g = c.benchmark_group("greedy_per_bs_24_groups");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = GreedyOptions { delta_mu: 0.1, full_sweep: false, exec };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| greedy_fractions(&model, &w, &opts).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let gammas = [2.0, 4.0, 8.0, 12.0, 16.0, 24.0];
    let mut g = c.benchmark_group("tradeoff_sweep_6_points");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                try_map_indexed(exec, gammas.len(), |i| {
                    let layout = build_linear_layout(8, 24, PathlossParams::wimax(), db_to_linear(reference::LAYOUT_POWER_DB))?
                        .with_cluster_size(2)?;
                    let p = cluster_reduce(&layout, 0, gammas[i])?;
                    effective_spectral_efficiency(
                        &p,
                        &Csit::Trained(TrainingConfig::minimal(gammas[i], 1.0 / 64.0)),
                        &Fairness::Proportional { iterations: 30 },
                        ConstraintMode::PerBs,
                        &GreedyOptions { delta_mu: 0.05, ..Default::default() },
                    )
                })
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, study, greedy, sweep);
criterion_main!(benches);
