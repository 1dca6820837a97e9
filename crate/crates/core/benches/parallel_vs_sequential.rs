//! Rayon fan-out against the sequential baseline on the three hot kernels:
//! stopping-pair trials, the phase sweep, and the Haar monogamy audit.
//!
//! Built with default features this compares real parallel scheduling with
//! the plain loop; with `--no-default-features` both paths are sequential
//! and should coincide.

use criterion::{criterion_group, criterion_main, Criterion};
use friendsim::exec::{indexed_map, indexed_map_seq};
use friendsim::friends::{prob_spin_down, ProtocolParams};
use friendsim::monogamy::{ckw_check, MeasureId};
use friendsim::qstate::random;
use friendsim::stopping::{simulate_path_stream, GapRule, PairOutcome, PathModel, StoppingPair};
use friendsim::trial_rng;
use std::hint::black_box;

fn stopping_trial(trial: usize) -> u32 {
    let model = PathModel::SimpleRandomWalk { start: 0.0 };
    let path = simulate_path_stream(model, 8.0, 1.0 / 16.0, 7, trial as u64).unwrap();
    let mut exceed = 0u32;
    for n in [4u32, 16, 64] {
        let pair = StoppingPair::new(0.5, n, GapRule::ReciprocalN);
        if let PairOutcome::Hit { x_t, x_u, .. } = pair.evaluate(&path) {
            exceed += ((x_t - x_u).abs() > 0.5) as u32;
        }
    }
    exceed
}

fn bench_stopping_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("stopping_trials_1024");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(indexed_map(1024, stopping_trial)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(indexed_map_seq(1024, stopping_trial)))
    });
    group.finish();
}

fn bench_phase_sweep(c: &mut Criterion) {
    let base = ProtocolParams::canonical();
    let points = 100_000usize;
    let eval = move |k: usize| {
        let phi = 4.0 * std::f64::consts::PI * k as f64 / (points - 1) as f64;
        prob_spin_down(&base.with_phi(phi).unwrap()).unwrap()
    };
    let mut group = c.benchmark_group("phase_sweep_100k");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(indexed_map(points, eval)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(indexed_map_seq(points, eval)))
    });
    group.finish();
}

fn haar_audit(trial: usize) -> bool {
    let mut rng = trial_rng(0xBE9C, trial as u64);
    let psi = random::haar_ket(&[2, 2, 2], &mut rng).unwrap();
    ckw_check(&psi, MeasureId::WoottersConcurrence)
        .unwrap()
        .satisfied
}

fn bench_haar_audit(c: &mut Criterion) {
    let mut group = c.benchmark_group("haar_monogamy_audit_256");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(indexed_map(256, haar_audit)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(indexed_map_seq(256, haar_audit)))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_stopping_trials,
    bench_phase_sweep,
    bench_haar_audit
);
criterion_main!(benches);
