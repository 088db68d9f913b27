//! Monte Carlo checks of the estimator, the sampled operator and the variance
//! closed form.

use commgcn::harness::{synth_sbm, SbmSpec};
use commgcn::rng::stream_rng;
use commgcn::sampling::{draw_sample, linear_weights, skewed_weights};
use commgcn::training::ladies_plan;
use commgcn::*;
use rand::Rng;

fn random_graph(n: usize, p: f64, seed: u64) -> WeightedGraph {
    let mut rng = stream_rng(seed, "graph", &[]);
    let mut edges = Vec::new();
    for i in 0..n as NodeId {
        for j in i + 1..n as NodeId {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    WeightedGraph::from_edges(n, edges)
        .unwrap()
        .normalize_weights()
}

fn positions(cand: &NodeSet, sampled: &NodeSet) -> Vec<usize> {
    sampled.iter().map(|j| cand.position(j).unwrap()).collect()
}

#[test]
fn estimate_mean_converges_on_random_graph() {
    let g = random_graph(20, 0.25, 3);
    let p = partition_nodes(20, 2, PartitionStrategy::Hash).unwrap();
    let s_l = NodeSet::new(vec![1, 4, 9, 15]);
    let cand = g.neighbor_union(&s_l).unwrap();
    let norms = g.column_norms(&s_l, &cand).unwrap();
    let dist = skewed_weights(cand.clone(), &norms, p.locality(&cand, 0), 3.0).unwrap();
    let mut rng = stream_rng(3, "x", &[]);
    let x = Matrix::from_vec(
        cand.len(),
        2,
        (0..cand.len() * 2)
            .map(|_| rng.random_range(0.5..2.0))
            .collect(),
    );
    let exact = full_aggregate(&g, &s_l, &cand, &x).unwrap();
    let m = 20_000;
    let budget = cand.len().div_ceil(2);
    let mut sum = Matrix::zeros(exact.rows(), exact.cols());
    let mut sum_sq = Matrix::zeros(exact.rows(), exact.cols());
    for t in 0..m {
        let draw = draw_sample(&dist, budget, &mut stream_rng(3, "draw", &[t]));
        let est = estimate_aggregate(
            &g,
            &s_l,
            &draw,
            &x.gather_rows(&positions(&cand, &draw.sampled)),
        )
        .unwrap();
        sum.axpy(1.0, &est);
        sum_sq.axpy(1.0, &est.map(|v| v * v));
    }
    for k in 0..exact.as_slice().len() {
        let mean = sum.as_slice()[k] / m as f64;
        let var = sum_sq.as_slice()[k] / m as f64 - mean * mean;
        let se = (var.max(0.0) / m as f64).sqrt();
        let e = exact.as_slice()[k];
        assert!(
            (mean - e).abs() <= 4.0 * se + 1e-12,
            "entry {k}: {mean} vs {e} (se {se})"
        );
        assert!((mean - e).abs() / e < 0.01, "entry {k}: {mean} vs {e}");
    }
}

#[test]
fn sampled_operator_is_unbiased() {
    // E[block] = w_ij entrywise for the top layer of a LADIES plan.
    let g = random_graph(24, 0.2, 8);
    let p = partition_nodes(24, 3, PartitionStrategy::Contiguous).unwrap();
    let batch = NodeSet::new(vec![0, 2, 5]);
    let cand = g.neighbor_union(&batch).unwrap();
    let cfg = SamplerConfig::new(4, SamplingMode::Skewed, 4.0);
    assert!(cand.len() > cfg.budget);
    let m = 10_000;
    let n_entries = batch.len() * cand.len();
    let mut sum = vec![0.0; n_entries];
    let mut sum_sq = vec![0.0; n_entries];
    for t in 0..m {
        let plan =
            ladies_plan(&g, &p, 0, &batch, &cfg, 1, &mut stream_rng(8, "plan", &[t])).unwrap();
        let layer = &plan.layers[0];
        for r in 0..batch.len() {
            let (cols, vals) = layer.block.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = r * cand.len() + cand.position(layer.nodes.as_slice()[c]).unwrap();
                sum[k] += v;
                sum_sq[k] += v * v;
            }
        }
    }
    for (r, i) in batch.iter().enumerate() {
        for (c, j) in cand.iter().enumerate() {
            let k = r * cand.len() + c;
            let w = g.weight(i, j).unwrap_or(0.0);
            let mean = sum[k] / m as f64;
            let se = ((sum_sq[k] / m as f64 - mean * mean).max(0.0) / m as f64).sqrt();
            assert!(
                (mean - w).abs() <= 4.0 * se + 1e-12,
                "({i},{j}): {mean} vs {w}"
            );
        }
    }
}

/// Exact total variance including the covariance of the inclusion
/// indicators: `P(j and k) = 1 - (1-q_j)^B - (1-q_k)^B + (1-q_j-q_k)^B`.
fn exact_variance(
    g: &WeightedGraph,
    s_l: &NodeSet,
    cand: &NodeSet,
    q: &[f64],
    budget: usize,
    x: &Matrix,
) -> f64 {
    let b = budget as i32;
    let m = cand.len();
    let p: Vec<f64> = q.iter().map(|&qj| 1.0 - (1.0 - qj).powi(b)).collect();
    let mut w = vec![vec![0.0; m]; s_l.len()];
    for (r, i) in s_l.iter().enumerate() {
        for (c, j) in cand.iter().enumerate() {
            w[r][c] = g.weight(i, j).unwrap_or(0.0);
        }
    }
    let mut total = 0.0;
    for j in 0..m {
        for k in 0..m {
            let cov = if j == k {
                p[j] * (1.0 - p[j])
            } else {
                1.0 - (1.0 - q[j]).powi(b) - (1.0 - q[k]).powi(b) + (1.0 - q[j] - q[k]).powi(b)
                    - p[j] * p[k]
            };
            let dot: f64 = x.row(j).iter().zip(x.row(k)).map(|(a, b)| a * b).sum();
            let ww: f64 = w.iter().map(|row| row[j] * row[k]).sum();
            total += cov / (p[j] * p[k]) * ww * dot;
        }
    }
    total
}

fn variance_setup(features: impl Fn(&WeightedGraph, &NodeSet) -> Matrix) -> (f64, f64, f64) {
    let g = synth_sbm(&SbmSpec {
        n_nodes: 60,
        n_blocks: 2,
        p_in: 0.3,
        p_out: 0.05,
        feature_dim: 3,
        noise: 0.5,
        seed: 4,
    })
    .unwrap()
    .normalize_weights();
    let s_l = NodeSet::new((0..60).step_by(4).collect());
    let cand = g.neighbor_union(&s_l).unwrap();
    let norms = g.column_norms(&s_l, &cand).unwrap();
    let dist = linear_weights(cand.clone(), &norms, vec![true; cand.len()]).unwrap();
    let x = features(&g, &cand);
    let exact = full_aggregate(&g, &s_l, &cand, &x).unwrap();
    let budget = 6;
    let trials: Vec<Matrix> = (0..100_000u64)
        .map(|t| {
            let draw = draw_sample(&dist, budget, &mut stream_rng(4, "draw", &[t]));
            estimate_aggregate(
                &g,
                &s_l,
                &draw,
                &x.gather_rows(&positions(&cand, &draw.sampled)),
            )
            .unwrap()
        })
        .collect();
    let v = empirical_variance(&trials, &exact).unwrap();
    let p: Vec<f64> = dist
        .q()
        .iter()
        .map(|&q| inclusion_probability(q, budget))
        .collect();
    let x_sq: Vec<f64> = (0..cand.len()).map(|r| x.row_norm_sq(r)).collect();
    let closed = commgcn::estimation::variance_closed_form(&norms, &p, &x_sq);
    (
        v,
        closed,
        exact_variance(&g, &s_l, &cand, dist.q(), budget, &x),
    )
}

#[test]
fn empirical_variance_matches_exact_variance() {
    // block-correlated features: the indicator covariances are visible
    let (v, closed, exact) = variance_setup(|g, cand| {
        g.features()
            .unwrap()
            .gather_rows(&cand.iter().map(|j| j as usize).collect::<Vec<_>>())
    });
    assert!(
        (v - exact).abs() / exact < 0.02,
        "empirical {v} vs exact {exact}"
    );
    assert!(
        closed > exact,
        "dropping negative covariances overstates: {closed} vs {exact}"
    );
}

#[test]
fn empirical_variance_matches_closed_form_for_centered_features() {
    let (v, closed, exact) = variance_setup(|_, cand| {
        let mut rng = stream_rng(4, "centered", &[]);
        Matrix::from_vec(
            cand.len(),
            3,
            (0..cand.len() * 3)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    });
    assert!(
        (v - closed).abs() / closed < 0.05,
        "empirical {v} vs closed form {closed}"
    );
    assert!(
        (v - exact).abs() / exact < 0.02,
        "empirical {v} vs exact {exact}"
    );
}
