//! Sequential versus rayon batch evaluation of the same workloads.
//! Build with `--no-default-features` to see `map` fall back to sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nashfund::batch;
use nashfund::mechanisms::{run_mechanism, MechanismId};
use nashfund::model::Instance;
use nashfund::suite::SuiteConfig;
use std::hint::black_box;

fn instances(count: usize) -> Vec<Instance> {
    SuiteConfig::new(11, count, 5, 4).run(|_, inst| inst)
}

/// One CIC grid: every (instance, agent, contribution) triple solved independently.
fn grid_jobs(instances: &[Instance], points: usize) -> Vec<(usize, usize, f64)> {
    let mut jobs = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for (i, a) in inst.agents().iter().enumerate() {
            for g in 0..points {
                jobs.push((k, i, a.contribution * g as f64 / (points - 1) as f64));
            }
        }
    }
    jobs
}

fn solve_job(instances: &[Instance], &(k, i, c): &(usize, usize, f64)) -> f64 {
    let p = instances[k].with_contribution(i, c).unwrap();
    let d = run_mechanism(MechanismId::Nash, &p).unwrap();
    p.agents()[i].utility(&d.spend)
}

fn cic_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("cic_grid");
    group.sample_size(10);
    for count in [10, 40] {
        let insts = instances(count);
        let jobs = grid_jobs(&insts, 21);
        group.bench_with_input(BenchmarkId::new("sequential", count), &jobs, |b, jobs| {
            b.iter(|| black_box(batch::map_sequential(jobs, |j| solve_job(&insts, j))))
        });
        group.bench_with_input(BenchmarkId::new("batch", count), &jobs, |b, jobs| {
            b.iter(|| black_box(batch::map(jobs, |j| solve_job(&insts, j))))
        });
    }
    group.finish();
}

fn suite_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("suite_solve");
    group.sample_size(10);
    let insts = instances(200);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(batch::map_sequential(&insts, |i| run_mechanism(MechanismId::Nash, i).unwrap())))
    });
    group.bench_function("batch", |b| {
        b.iter(|| black_box(batch::map(&insts, |i| run_mechanism(MechanismId::Nash, i).unwrap())))
    });
    group.finish();
}

criterion_group!(benches, cic_grid, suite_solve);
criterion_main!(benches);
