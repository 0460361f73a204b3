//! Counting and oracle benchmarks.
//!
//! Run with the default features for the rayon-backed oracle, and with
//! `--no-default-features` for the sequential fallback; the `counting_*`
//! groups compare the three elimination modes on the same instances.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pmc_core::oracle::{brute_force_projected_count, generate, GeneratorConfig};
use pmc_core::{count, BceMode, ProjectedFormula};

const DEMO: &str = include_str!("../../../testdata/demo.cnf");

/// `n` definition pairs guarded by one shared variable; the definitions
/// become blocked as soon as the guard is decided.
fn chained_definitions(n: u32) -> ProjectedFormula {
    let guard = 1i32;
    let mut clauses = Vec::new();
    let mut projection = Vec::new();
    for i in 0..n as i32 {
        let counted = 2 + 2 * i;
        let hidden = 3 + 2 * i;
        clauses.push(vec![hidden, counted]);
        clauses.push(vec![-hidden, guard]);
        projection.push(hidden as u32);
    }
    ProjectedFormula::new(1 + 2 * n, clauses, &projection)
}

fn bench_modes(c: &mut Criterion) {
    let demo = ProjectedFormula::parse_dimacs(DEMO).unwrap();
    let chain = chained_definitions(12);
    let mut group = c.benchmark_group("counting");
    for mode in [BceMode::Off, BceMode::Pre, BceMode::Dyn] {
        group.bench_function(format!("demo/{mode}"), |b| {
            b.iter(|| count(black_box(&demo), mode))
        });
        group.bench_function(format!("chain12/{mode}"), |b| {
            b.iter(|| count(black_box(&chain), mode))
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let instance = generate(&GeneratorConfig {
        seed: 42,
        num_vars: 14,
        num_clauses: 50,
        clause_len: (2, 4),
        projection_density: 0.3,
    });
    let mut group = c.benchmark_group("oracle");
    group.bench_function("enumerate14", |b| {
        b.iter(|| brute_force_projected_count(black_box(&instance)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_modes, bench_oracle);
criterion_main!(benches);
