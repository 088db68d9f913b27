//! GCN with hand-written reverse mode.
//!
//! With plan blocks `P_l` and weights `W_l` the forward pass is
//!
//! ```text
//! H_0     = X[S_0]
//! A_l     = H_l            for l = 0
//!         = relu(H_l)      for l > 0
//! H_{l+1} = P_l (A_l W_l)
//! ```
//!
//! and `H_M` holds the logits of the output nodes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::training::plan::SamplePlan;

#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    weights: Vec<Matrix>,
}

impl GcnModel {
    /// Glorot-uniform initialization for the layer widths in `dims`
    /// (`feature_dim, hidden..., n_classes`).
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be >= 1 and at least two, got {dims:?}"
            )));
        }
        let weights = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let data = (0..w[0] * w[1])
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Matrix::from_vec(w[0], w[1], data)
            })
            .collect();
        Ok(Self { weights })
    }

    pub fn from_weights(weights: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "model needs at least one layer".into(),
            ));
        }
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::Dimension(format!(
                    "layer {l} outputs {} columns, layer {} expects {}",
                    pair[0].cols(),
                    l + 1,
                    pair[1].rows()
                )));
            }
        }
        if let Some(l) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "layer {l} has non-finite weights"
            )));
        }
        Ok(Self { weights })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.weights[0].rows()];
        d.extend(self.weights.iter().map(Matrix::cols));
        d
    }

    pub fn n_classes(&self) -> usize {
        self.weights.last().map_or(0, Matrix::cols)
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }
}

/// Per-layer values kept for the backward pass.
struct Trace {
    /// `A_l` for every layer.
    activations: Vec<Matrix>,
    /// `H_l` for `l >= 1` (pre-activation), needed for the ReLU mask.
    pre: Vec<Matrix>,
    logits: Matrix,
}

fn check_shapes(model: &GcnModel, plan: &SamplePlan, features: &Matrix) -> Result<()> {
    if plan.n_layers() != model.n_layers() {
        return Err(Error::Dimension(format!(
            "plan has {} layers, model has {}",
            plan.n_layers(),
            model.n_layers()
        )));
    }
    if features.cols() != model.weights[0].rows() {
        return Err(Error::Dimension(format!(
            "features have {} columns, first layer expects {}",
            features.cols(),
            model.weights[0].rows()
        )));
    }
    if let Some(&last) = plan.input_nodes().as_slice().last() {
        if last as usize >= features.rows() {
            return Err(Error::Dimension(format!(
                "input node {last} has no feature row ({} rows)",
                features.rows()
            )));
        }
    }
    Ok(())
}

fn run(model: &GcnModel, plan: &SamplePlan, features: &Matrix) -> Result<Trace> {
    check_shapes(model, plan, features)?;
    let idx: Vec<usize> = plan.input_nodes().iter().map(|j| j as usize).collect();
    let mut h = features.gather_rows(&idx);
    let mut activations = Vec::with_capacity(model.n_layers());
    let mut pre = Vec::with_capacity(model.n_layers());
    for (l, (layer, w)) in plan.layers.iter().zip(&model.weights).enumerate() {
        let a = if l == 0 {
            h.clone()
        } else {
            h.map(|v| v.max(0.0))
        };
        let next = layer.block.spmm(&a.matmul(w));
        activations.push(a);
        if l > 0 {
            pre.push(h);
        }
        h = next;
    }
    Ok(Trace {
        activations,
        pre,
        logits: h,
    })
}

/// Logits for `plan.output`, one row per output node.
pub fn forward(model: &GcnModel, plan: &SamplePlan, features: &Matrix) -> Result<Matrix> {
    run(model, plan, features).map(|t| t.logits)
}

/// Loss value, per-layer gradients, and the logits they came from.
pub(crate) struct Step {
    pub loss: f64,
    pub grads: Vec<Matrix>,
    pub logits: Matrix,
}

/// Mean softmax cross-entropy over `plan.output` and `d loss / d W_l`.
pub fn loss_and_backward(
    model: &GcnModel,
    plan: &SamplePlan,
    features: &Matrix,
    labels: &[u32],
) -> Result<(f64, Vec<Matrix>)> {
    step(model, plan, features, labels).map(|s| (s.loss, s.grads))
}

pub(crate) fn step(
    model: &GcnModel,
    plan: &SamplePlan,
    features: &Matrix,
    labels: &[u32],
) -> Result<Step> {
    if plan.output.is_empty() {
        return Err(Error::InvalidArgument("batch has no labeled nodes".into()));
    }
    let trace = run(model, plan, features)?;
    let n_classes = model.n_classes();
    let batch = plan.output.len() as f64;

    let mut grad_out = Matrix::zeros(trace.logits.rows(), n_classes);
    let mut loss = 0.0;
    for (r, node) in plan.output.iter().enumerate() {
        let y = *labels
            .get(node as usize)
            .ok_or_else(|| Error::Dimension(format!("no label for node {node}")))?
            as usize;
        if y >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} of node {node} outside the {n_classes} classes"
            )));
        }
        let row = trace.logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - row[y];
        let g = grad_out.row_mut(r);
        for (k, gk) in g.iter_mut().enumerate() {
            let soft = (row[k] - log_z).exp();
            *gk = (soft - if k == y { 1.0 } else { 0.0 }) / batch;
        }
    }
    loss /= batch;

    let m = model.n_layers();
    let mut grads = vec![Matrix::zeros(0, 0); m];
    let mut d_h = grad_out;
    for l in (0..m).rev() {
        let d_y = plan.layers[l].block.spmm_t(&d_h);
        grads[l] = trace.activations[l].t_matmul(&d_y);
        if l > 0 {
            let mut d_a = d_y.matmul_t(&model.weights[l]);
            let pre = &trace.pre[l - 1];
            for (g, &z) in d_a.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            d_h = d_a;
        }
    }
    Ok(Step {
        loss,
        grads,
        logits: trace.logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeSet, WeightedGraph};
    use crate::rng::stream_rng;

    fn tiny_graph() -> WeightedGraph {
        WeightedGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
            .unwrap()
            .normalize_weights()
    }

    #[test]
    fn one_layer_identity_reproduces_aggregation() {
        let g = tiny_graph();
        let x = Matrix::from_vec(
            5,
            2,
            vec![1.0, 0.0, 0.5, 2.0, -1.0, 1.0, 0.0, 3.0, 2.0, 2.0],
        );
        let batch = NodeSet::new(vec![1, 4]);
        let plan = SamplePlan::exact(&g, &batch, 1).unwrap();
        let model = GcnModel::from_weights(vec![Matrix::identity(2)]).unwrap();
        let out = forward(&model, &plan, &x).unwrap();
        let exact = crate::estimation::full_aggregate(&g, &batch, &NodeSet::all(5), &x).unwrap();
        assert!(out.max_abs_diff(&exact) < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let g = tiny_graph();
        let plan = SamplePlan::exact(&g, &NodeSet::all(5), 2).unwrap();
        let model = GcnModel::from_weights(vec![Matrix::zeros(3, 4), Matrix::zeros(4, 2)]).unwrap();
        let x = Matrix::from_vec(5, 3, (0..15).map(f64::from).collect());
        assert_eq!(forward(&model, &plan, &x).unwrap(), Matrix::zeros(5, 2));
    }

    #[test]
    fn uniform_logits_cost_ln_c() {
        let g = tiny_graph();
        let plan = SamplePlan::exact(&g, &NodeSet::all(5), 1).unwrap();
        let model = GcnModel::from_weights(vec![Matrix::zeros(2, 7)]).unwrap();
        let x = Matrix::from_vec(5, 2, vec![1.0; 10]);
        let (loss, _) = loss_and_backward(&model, &plan, &x, &[0, 1, 2, 3, 4]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn scaling_correct_logits_drives_loss_to_zero() {
        let g = WeightedGraph::from_edges(2, [])
            .unwrap()
            .normalize_weights();
        let plan = SamplePlan::exact(&g, &NodeSet::all(2), 1).unwrap();
        let x = Matrix::identity(2);
        let mut prev = f64::INFINITY;
        for scale in [0.5, 1.0, 2.0, 5.0, 10.0, 40.0] {
            let mut w = Matrix::identity(2);
            w.scale(scale);
            let model = GcnModel::from_weights(vec![w]).unwrap();
            let (loss, _) = loss_and_backward(&model, &plan, &x, &[0, 1]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let g = tiny_graph();
        let plan = SamplePlan::exact(&g, &NodeSet::all(5), 2).unwrap();
        let model = GcnModel::from_weights(vec![Matrix::zeros(3, 2)]).unwrap();
        let x = Matrix::zeros(5, 3);
        assert!(forward(&model, &plan, &x).is_err());
        assert!(GcnModel::from_weights(vec![Matrix::zeros(3, 2), Matrix::zeros(3, 2)]).is_err());
        assert!(GcnModel::new(&[4], &mut stream_rng(0, "m", &[])).is_err());
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let g = tiny_graph();
        let plan = SamplePlan::exact(&g, &NodeSet::all(5), 1).unwrap();
        let model = GcnModel::from_weights(vec![Matrix::zeros(2, 3)]).unwrap();
        let x = Matrix::zeros(5, 2);
        assert!(loss_and_backward(&model, &plan, &x, &[0, 1, 2, 3, 9]).is_err());
    }

    #[test]
    fn glorot_init_shapes() {
        let m = GcnModel::new(&[6, 8, 3], &mut stream_rng(1, "m", &[])).unwrap();
        assert_eq!(m.dims(), vec![6, 8, 3]);
        let limit = (6.0f64 / 14.0).sqrt();
        assert!(m.weights()[0].as_slice().iter().all(|v| v.abs() <= limit));
    }
}
