//! Sequential vs parallel throughput of the data-parallel stages.

use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use ifcc_core::analyzer::analyze;
use ifcc_core::classifier::classify;
use ifcc_core::miner::{mine, ExportedDiffs, FixKeywords};
use ifcc_core::mutation::{enumerate_mutants, random_expressions, selftest_expressions};
use ifcc_core::{ConditionAst, Execution, FaultClass};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_selftest(c: &mut Criterion) {
    let expressions = random_expressions(7, 200, 6);
    let mut group = c.benchmark_group("selftest");
    group.throughput(Throughput::Elements(expressions.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &expressions, |b, e| {
            b.iter(|| selftest_expressions(black_box(e), exec))
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let pairs: Vec<(ConditionAst, ConditionAst)> = random_expressions(11, 300, 6)
        .into_iter()
        .flat_map(|fix| {
            FaultClass::SINGLE
                .iter()
                .flat_map(|&class| enumerate_mutants(&fix, class))
                .map(|bug| (bug, fix.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut group = c.benchmark_group("classify");
    group.throughput(Throughput::Elements(pairs.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pairs, |b, p| {
            b.iter(|| exec.map(black_box(p), |(bug, fix)| classify(bug, fix)))
        });
    }
    group.finish();
}

fn bench_analyze(c: &mut Criterion) {
    let repo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/repo");
    let mined = mine(&ExportedDiffs::new(repo), &FixKeywords::default(), Execution::Sequential).expect("fixture mines");
    let pairs: Vec<_> = (0..200).flat_map(|_| mined.pairs.iter().cloned()).collect();
    let mut group = c.benchmark_group("analyze");
    group.throughput(Throughput::Elements(pairs.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pairs, |b, p| b.iter(|| analyze(black_box(p), exec)));
    }
    group.finish();
}

criterion_group!(benches, bench_selftest, bench_classify, bench_analyze);
criterion_main!(benches);
