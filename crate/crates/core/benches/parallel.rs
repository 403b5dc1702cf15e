//! Parallel vs sequential execution of the data-parallel loops.
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use featurekit::java::parse_sources;
use featurekit::location::{propagate_graph, LabelGraph, PropagationParams};
use featurekit::model::{count_configurations_with, parse_afm, FeatureModel};
use featurekit::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn wide_model(n: usize) -> FeatureModel {
    let opts: Vec<String> = (0..n / 2).map(|i| format!("[o{i}]")).collect();
    let alts: Vec<String> = (0..n - n / 2 - 1).map(|i| format!("a{i}")).collect();
    let text = format!("R : G {} ;\nG : ({})+ ;\n%%\no0 implies a0 ;\nnot (o1 and a1) ;\n", opts.join(" "), alts.join(" | "));
    parse_afm(&text).expect("bench model")
}

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_configurations");
    g.sample_size(10);
    for n in [16, 20] {
        let m = wide_model(n);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, m.feature_count()), &m, |b, m| b.iter(|| count_configurations_with(m, exec).unwrap()));
        }
    }
    g.finish();
}

fn graph(n: usize, seed: u64) -> LabelGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = LabelGraph::new(n);
    for i in 1..n {
        // a sparse small-world-ish graph
        g.link(i, rng.gen_range(0..i));
        g.link(i, rng.gen_range(0..n));
        if rng.gen_bool(0.05) {
            g.labels[i].insert(format!("f{}", rng.gen_range(0..6)));
        }
        if rng.gen_bool(0.1) {
            g.parent[i] = Some(rng.gen_range(0..i));
        }
    }
    g
}

fn propagation(c: &mut Criterion) {
    let mut grp = c.benchmark_group("propagate_graph");
    grp.sample_size(10);
    let params = PropagationParams { threshold: 0.5, min_neighbors: 2, max_rounds: 50 };
    for n in [2_000, 20_000] {
        let g = graph(n, 1);
        for (name, exec) in MODES {
            grp.bench_with_input(BenchmarkId::new(name, n), &g, |b, g| b.iter(|| propagate_graph(g, &params, exec).unwrap()));
        }
    }
    grp.finish();
}

fn sources(files: usize) -> Vec<(String, String)> {
    (0..files)
        .map(|f| {
            let mut text = format!("package p;\n\nclass C{f} extends Base {{\n  int count = 0;\n");
            for m in 0..40 {
                text += &format!(
                    "  int m{m}(int a, int b) {{\n    if (a > b) {{ count += m{}(b, a); }} else {{ count--; }}\n    for (int i = 0; i < a; i++) {{ helper(i, \"s{m}\"); }}\n    return count;\n  }}\n",
                    (m + 1) % 40
                );
            }
            (format!("src/p/C{f}.java"), text + "}\n")
        })
        .collect()
}

fn parsing(c: &mut Criterion) {
    let mut g = c.benchmark_group("parse_sources");
    g.sample_size(10);
    let files = sources(64);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, files.len()), &files, |b, files| {
            b.iter(|| parse_sources(files, exec).into_iter().map(|r| r.unwrap().len()).sum::<usize>())
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, propagation, parsing);
criterion_main!(benches);
