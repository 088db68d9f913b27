use std::hint::black_box;

use commgcn::harness::{synth_sbm, SbmSpec};
use commgcn::rng::stream_rng;
use commgcn::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn graph(n: usize) -> WeightedGraph {
    synth_sbm(&SbmSpec {
        n_nodes: n,
        n_blocks: 4,
        p_in: 40.0 / n as f64,
        p_out: 4.0 / n as f64,
        feature_dim: 16,
        noise: 1.0,
        seed: 1,
    })
    .unwrap()
    .normalize_weights()
}

fn draws(c: &mut Criterion) {
    let mut group = c.benchmark_group("draw_sample");
    for m in [100usize, 1_000, 10_000] {
        let cand = NodeSet::all(m);
        let norms: Vec<f64> = (0..m).map(|j| 1.0 + (j % 7) as f64).collect();
        let local: Vec<bool> = (0..m).map(|j| j % 4 == 0).collect();
        let dist = skewed_weights(cand, &norms, local, 8.0).unwrap();
        let mut rng = stream_rng(1, "bench", &[]);
        group.bench_with_input(BenchmarkId::from_parameter(m), &dist, |b, d| {
            b.iter(|| draw_sample(black_box(d), 64, &mut rng))
        });
    }
    group.finish();
}

fn plans(c: &mut Criterion) {
    let g = graph(2_000);
    let p = partition_nodes(g.n_nodes(), 4, PartitionStrategy::Contiguous).unwrap();
    let batch = NodeSet::new((0..500).step_by(10).collect());
    let mut group = c.benchmark_group("ladies_plan");
    for mode in [
        SamplingMode::Full,
        SamplingMode::Local,
        SamplingMode::Skewed,
    ] {
        let cfg = SamplerConfig::new(256, mode, 8.0);
        let mut rng = stream_rng(2, "bench", &[]);
        group.bench_function(mode.as_str(), |b| {
            b.iter(|| ladies_plan(&g, &p, 0, black_box(&batch), &cfg, 3, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn model_step(c: &mut Criterion) {
    let g = graph(2_000);
    let p = partition_nodes(g.n_nodes(), 4, PartitionStrategy::Contiguous).unwrap();
    let batch = NodeSet::new((0..500).step_by(10).collect());
    let cfg = SamplerConfig::new(256, SamplingMode::Skewed, 8.0);
    let plan = ladies_plan(&g, &p, 0, &batch, &cfg, 3, &mut stream_rng(3, "bench", &[])).unwrap();
    let model = GcnModel::new(&[16, 64, 64, 4], &mut stream_rng(3, "init", &[])).unwrap();
    let x = g.features().unwrap();
    let labels = g.labels().unwrap();
    c.bench_function("forward", |b| {
        b.iter(|| forward(&model, black_box(&plan), x).unwrap())
    });
    c.bench_function("loss_and_backward", |b| {
        b.iter(|| loss_and_backward(&model, black_box(&plan), x, labels).unwrap())
    });
}

criterion_group!(benches, draws, plans, model_step);
criterion_main!(benches);
