use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qsi_core::identity_tests::{equal_prob_formula_with, run_circuit_with, Caps, TestKind};
use qsi_core::instances::{build_instance, haar_unitary};
use qsi_core::par::Exec;
use qsi_core::permgroup::{stabilizer_count_with, GroupKind, Partition};
use qsi_core::protocols::{mc_run_with, rcir_exact_with, rcir_sample, Verdict};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn formula(c: &mut Criterion) {
    let mut g = c.benchmark_group("permutation_formula");
    g.sample_size(10);
    for n in [8usize, 9] {
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let part = Partition::from_labels(&labels).unwrap();
        let inst = build_instance(&part, 3, Some(&haar_unitary(3, 7))).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &inst, |b, inst| {
                b.iter(|| equal_prob_formula_with(TestKind::Permutation, black_box(inst), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn circuit(c: &mut Criterion) {
    let mut g = c.benchmark_group("circle_circuit");
    g.sample_size(10);
    let part = Partition::from_labels(&[0, 1, 0, 1, 0, 1]).unwrap();
    let inst = build_instance(&part, 2, Some(&haar_unitary(2, 3))).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| run_circuit_with(TestKind::Circle, black_box(&inst), Caps::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn rcir(c: &mut Criterion) {
    let mut g = c.benchmark_group("rcir_exact");
    g.sample_size(10);
    for (n, r) in [(20usize, 10usize), (22, 11)] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &(n, r), |b, &(n, r)| {
                b.iter(|| rcir_exact_with(n, r, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("rcir_monte_carlo");
    g.sample_size(10);
    let part = Partition::new(4, vec![vec![1, 3], vec![2, 4]]).unwrap();
    let inst = build_instance(&part, 2, None).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                mc_run_with(
                    20_000,
                    1,
                    exec,
                    |rng| Ok(rcir_sample(&inst, rng)? == Verdict::Yes),
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn stabilizers(c: &mut Criterion) {
    let mut g = c.benchmark_group("stabilizer_count");
    g.sample_size(10);
    let part = Partition::from_labels(&[0, 0, 0, 1, 1, 1, 2, 2, 2, 3]).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| stabilizer_count_with(black_box(&part), GroupKind::Sym, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, formula, circuit, rcir, monte_carlo, stabilizers);
criterion_main!(benches);
