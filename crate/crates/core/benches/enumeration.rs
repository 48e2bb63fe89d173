use criterion::{black_box, criterion_group, criterion_main, Criterion};

use twoway::fixtures;
use twoway::oracle::enumerate_relation_with;
use twoway::par::Strategy;
use twoway::random::random_nft;

fn relation_enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate_relation");
    group.sample_size(20);
    let machines = [
        ("t2", fixtures::t2(), 9),
        ("random_nft", random_nft(11, 5, &['a', 'b'], 2, 0.35), 9),
    ];
    for (name, t, bound) in &machines {
        for (label, strategy) in [("parallel", Strategy::Parallel), ("sequential", Strategy::Sequential)] {
            group.bench_function(format!("{name}/{label}"), |b| {
                b.iter(|| enumerate_relation_with(black_box(t), *bound, 3, strategy))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, relation_enumeration);
criterion_main!(benches);
