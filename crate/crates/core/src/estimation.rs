//! Unbiased neighbor aggregation and its variance.
//!
//! For a source set `S_l` the exact aggregation of node `i` is
//! `sum_{j in N(i)} w_ij x_j`. Given a sample with inclusion probabilities
//! `p_j`, the estimate `sum_{j sampled} w_ij x_j / p_j` has the exact value as
//! its mean. The total squared error over `S_l` is bounded through the column
//! norms `||w_*j||^2` and a uniform bound `C >= ||x_j||^2`.

use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedGraph};
use crate::linalg::Matrix;
use crate::sampling::{ProbDist, SampleDraw};

/// Inputs of the analytic variance bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceParams {
    /// Uniform bound on the squared embedding norm.
    pub c: f64,
    pub budget: usize,
    pub n_local: usize,
    pub n_remote: usize,
    /// Sum of column norms over local candidates.
    pub sum_local: f64,
    /// Sum of column norms over remote candidates.
    pub sum_remote: f64,
}

impl VarianceParams {
    /// Collects the counts and sums from a distribution and its column norms.
    pub fn from_dist(dist: &ProbDist, col_norms: &[f64], c: f64, budget: usize) -> Self {
        let mut vp = VarianceParams {
            c,
            budget,
            n_local: 0,
            n_remote: 0,
            sum_local: 0.0,
            sum_remote: 0.0,
        };
        for (&w, &local) in col_norms.iter().zip(dist.is_local()) {
            if local {
                vp.n_local += 1;
                vp.sum_local += w;
            } else {
                vp.n_remote += 1;
                vp.sum_remote += w;
            }
        }
        vp
    }

    pub fn n_candidates(&self) -> usize {
        self.n_local + self.n_remote
    }

    pub fn total(&self) -> f64 {
        self.sum_local + self.sum_remote
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be at least 1".into()));
        }
        if self.budget > self.n_candidates() {
            return Err(Error::InvalidArgument(format!(
                "budget {} exceeds the {} candidates",
                self.budget,
                self.n_candidates()
            )));
        }
        if !(self.c > 0.0) || self.sum_local < 0.0 || self.sum_remote < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need C > 0 and nonnegative sums, got C={} sums=({}, {})",
                self.c, self.sum_local, self.sum_remote
            )));
        }
        Ok(())
    }
}

/// Exact aggregation `sum_{j in N(i)} w_ij x_j` for every `i` in `s_l`.
///
/// Row `k` of `x` belongs to the `k`-th node of `x_nodes`, which must cover
/// `N(s_l)`.
pub fn full_aggregate(
    g: &WeightedGraph,
    s_l: &NodeSet,
    x_nodes: &NodeSet,
    x: &Matrix,
) -> Result<Matrix> {
    if x.rows() != x_nodes.len() {
        return Err(Error::Dimension(format!(
            "{} embedding rows for {} nodes",
            x.rows(),
            x_nodes.len()
        )));
    }
    s_l.check_bounds(g.n_nodes())?;
    let mut out = Matrix::zeros(s_l.len(), x.cols());
    for (r, i) in s_l.iter().enumerate() {
        let (nbrs, w) = g.row(i);
        for (&j, &wij) in nbrs.iter().zip(w) {
            let k = x_nodes.position(j).ok_or_else(|| {
                Error::Dimension(format!("no embedding row for neighbor {j} of {i}"))
            })?;
            for (o, v) in out.row_mut(r).iter_mut().zip(x.row(k)) {
                *o += wij * v;
            }
        }
    }
    Ok(out)
}

/// Estimate `sum_{j in sampled ∩ N(i)} w_ij x_j / p_j` for every `i` in `s_l`.
///
/// Row `k` of `x_sampled` belongs to the `k`-th node of `draw.sampled`.
pub fn estimate_aggregate(
    g: &WeightedGraph,
    s_l: &NodeSet,
    draw: &SampleDraw,
    x_sampled: &Matrix,
) -> Result<Matrix> {
    if x_sampled.rows() != draw.sampled.len() {
        return Err(Error::Dimension(format!(
            "{} embedding rows for {} sampled nodes",
            x_sampled.rows(),
            draw.sampled.len()
        )));
    }
    if let Some(k) = draw.sampled_p.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sampled node {} has inclusion probability {}",
            draw.sampled.as_slice()[k],
            draw.sampled_p[k]
        )));
    }
    s_l.check_bounds(g.n_nodes())?;
    let mut out = Matrix::zeros(s_l.len(), x_sampled.cols());
    for (r, i) in s_l.iter().enumerate() {
        let (nbrs, w) = g.row(i);
        for (&j, &wij) in nbrs.iter().zip(w) {
            if let Some(k) = draw.sampled.position(j) {
                let coef = wij / draw.sampled_p[k];
                for (o, v) in out.row_mut(r).iter_mut().zip(x_sampled.row(k)) {
                    *o += coef * v;
                }
            }
        }
    }
    Ok(out)
}

/// Mean over trials of the squared Frobenius deviation from `exact`.
pub fn empirical_variance(trials: &[Matrix], exact: &Matrix) -> Result<f64> {
    if trials.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 trials, got {}",
            trials.len()
        )));
    }
    if let Some(t) = trials.iter().find(|t| t.shape() != exact.shape()) {
        return Err(Error::Dimension(format!(
            "trial shape {:?} vs exact {:?}",
            t.shape(),
            exact.shape()
        )));
    }
    Ok(trials.iter().map(|t| t.dist_sq(exact)).sum::<f64>() / trials.len() as f64)
}

/// `sum_j (1/p_j - 1) ||w_*j||^2 ||x_j||^2`, the variance with the
/// cross-candidate covariances dropped.
pub fn variance_closed_form(col_norms: &[f64], inclusion_p: &[f64], x_norm_sq: &[f64]) -> f64 {
    col_norms
        .iter()
        .zip(inclusion_p)
        .zip(x_norm_sq)
        .map(|((w, p), x)| (1.0 / p - 1.0) * w * x)
        .sum()
}

/// `V_lnr = (|N| / B - 1) * sum_k ||w_*k||^2 * C`.
pub fn variance_bound_linear(vp: &VarianceParams) -> Result<f64> {
    vp.validate()?;
    let ratio = vp.n_candidates() as f64 / vp.budget as f64;
    Ok((ratio - 1.0) * vp.total() * vp.c)
}

const FORM_RTOL: f64 = 1e-9;

/// Skewed bound, evaluated in both algebraic forms:
///
/// ```text
/// ((|L|/(sB) + |R|/B) (s sum_L + sum_R) - sum) C
/// V_lnr + (s-1)|R|/B sum_L C + (1-s)|L|/(sB) sum_R C
/// ```
///
/// The first is returned once the two agree.
pub fn variance_bound_skewed(vp: &VarianceParams, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {s}"
        )));
    }
    let v_lnr = variance_bound_linear(vp)?;
    let (l, r, b) = (vp.n_local as f64, vp.n_remote as f64, vp.budget as f64);
    let first = ((l / (s * b) + r / b) * (s * vp.sum_local + vp.sum_remote) - vp.total()) * vp.c;
    let second = v_lnr
        + (s - 1.0) * r / b * vp.sum_local * vp.c
        + (1.0 - s) * l / (s * b) * vp.sum_remote * vp.c;
    // Both forms subtract terms of this size, so agreement is judged on it.
    let scale = first
        .abs()
        .max(second.abs())
        .max((l / (s * b) + r / b) * (s * vp.sum_local + vp.sum_remote) * vp.c * 1e-6);
    if (first - second).abs() > FORM_RTOL * scale {
        return Err(Error::BoundFormMismatch { first, second });
    }
    Ok(first)
}
