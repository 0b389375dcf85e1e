use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lobescope::ensemble::generate_ensemble;
use lobescope::lobes::{segment_lobes, spatial_lobe_threshold};
use lobescope::pas::{project_plane, synthesize_pas};
use lobescope::report::{analyze_link, run_stats, PipelineConfig};
use lobescope::sounder::{run_procedure, SweepConfig};
use lobescope::stats::circular_as;
use lobescope::Plane;
use lobescope_bench::{components, ensemble_spec, environment};

fn spreads(c: &mut Criterion) {
    let mut g = c.benchmark_group("circular_as");
    for n in [16, 360, 4096] {
        let (a, p) = components(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| circular_as(black_box(&a), black_box(&p)).unwrap())
        });
    }
    g.finish();
}

fn link(c: &mut Criterion) {
    let (env, antennas) = environment();
    let sweep = SweepConfig::default();
    c.bench_function("run_procedure", |b| {
        b.iter(|| run_procedure(black_box(&env), &sweep, &antennas).unwrap())
    });

    let records = run_procedure(&env, &sweep, &antennas).unwrap().sweeps;
    let cfg = PipelineConfig::default();
    c.bench_function("synthesize_and_segment", |b| {
        b.iter(|| {
            let projected = project_plane(black_box(&records), Plane::Aoa);
            let pas = synthesize_pas(&projected, Plane::Aoa, 1.0).unwrap();
            let slt = spatial_lobe_threshold(&pas, 10.0).unwrap();
            segment_lobes(&pas, slt).unwrap()
        })
    });
    c.bench_function("analyze_link", |b| {
        b.iter(|| analyze_link(black_box(&records), &cfg).unwrap())
    });
}

fn ensemble(c: &mut Criterion) {
    let spec = ensemble_spec(50);
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("generate_50", |b| {
        b.iter(|| generate_ensemble(black_box(&spec)).unwrap())
    });
    let records = generate_ensemble(&spec).unwrap().records().unwrap();
    g.bench_function("stats_50", |b| {
        b.iter(|| run_stats(black_box(&records), &PipelineConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spreads, link, ensemble);
criterion_main!(benches);
