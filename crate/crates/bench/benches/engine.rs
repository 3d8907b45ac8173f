use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pbvote_bench::{fixture_election, fixture_text};
use pbvote_core::{parse_election, run_rule, serialize_election, ParseMode, RuleConfig, RuleKind};

// The largest committed corpus instance: 13 projects, 80 approval ballots
// over districts and categories.
const INSTANCE: &str = "corpus/approval_07.pb";

fn format(c: &mut Criterion) {
    let text = fixture_text(INSTANCE);
    c.bench_function("parse/approval_07", |b| {
        b.iter(|| parse_election(black_box(&text), ParseMode::Strict).unwrap())
    });

    let election = fixture_election(INSTANCE);
    c.bench_function("serialize/approval_07", |b| {
        b.iter(|| serialize_election(black_box(&election)))
    });
}

fn rules(c: &mut Criterion) {
    let election = fixture_election(INSTANCE);
    let cfg = RuleConfig::default();
    let mut group = c.benchmark_group("rule/approval_07");
    for kind in RuleKind::ALL {
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| run_rule(black_box(kind), black_box(&election), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, format, rules);
criterion_main!(benches);
