//! Compares the sequential and data-parallel execution paths of the core
//! pipeline on a reduced profile. Both paths produce bit-identical output,
//! so this measures scheduling overhead against multicore speedup:
//!
//! ```text
//! cargo bench -p qevo-core
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qevo_core::config::SimConfig;
use qevo_core::sim::{run_core, ExecMode};

fn bench_profile() -> SimConfig {
    let mut cfg = SimConfig::demo();
    cfg.d = 128;
    cfg.m = 16;
    cfg.transmittances = vec![cfg.transmittances[0]; 16];
    cfg.trials = 512;
    cfg
}

fn pipeline_modes(c: &mut Criterion) {
    let cfg = bench_profile();
    let mut group = c.benchmark_group("run_core");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(mode.label()),
            &mode,
            |b, &mode| {
                b.iter(|| run_core(&cfg, mode).expect("bench run"));
            },
        );
    }
    group.finish();
}

criterion_group!(benches, pipeline_modes);
criterion_main!(benches);
