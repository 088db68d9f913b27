//! Linear and skewed linear weighted neighbor sampling.
//!
//! A candidate `j` of `N(S_l)` is drawn with per-draw probability
//! `q_j ∝ ||w_*j||^2`. Skewed sampling multiplies the weight of every local
//! candidate by `s >= 1`, which shifts probability mass away from remote
//! candidates and therefore reduces how many remote feature vectors a worker
//! has to fetch.
//!
//! A sample is `B` independent categorical draws with duplicates collapsed.
//! Under that scheme `p_j = 1 - (1 - q_j)^B` is the exact probability that
//! `j` is in the sample, which keeps the reweighted aggregation unbiased.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet};

/// Categorical distribution over a candidate set.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist {
    candidates: NodeSet,
    q: Vec<f64>,
    is_local: Vec<bool>,
    s_used: f64,
}

impl ProbDist {
    pub fn candidates(&self) -> &NodeSet {
        &self.candidates
    }

    /// Per-draw probabilities aligned with [`Self::candidates`].
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn is_local(&self) -> &[bool] {
        &self.is_local
    }

    /// Scale factor applied to local weights; 1 for linear sampling.
    pub fn s_used(&self) -> f64 {
        self.s_used
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn n_remote(&self) -> usize {
        self.is_local.iter().filter(|&&l| !l).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Linear weights over all of `N(S_l)`.
    Full,
    /// Linear weights over the local part of `N(S_l)` only.
    Local,
    /// Skewed weights over all of `N(S_l)`.
    Skewed,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Full => "full",
            SamplingMode::Local => "local",
            SamplingMode::Skewed => "skewed",
        }
    }
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "full" => Ok(SamplingMode::Full),
            "local" => Ok(SamplingMode::Local),
            "skewed" => Ok(SamplingMode::Skewed),
            other => Err(format!("unknown sampling mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of categorical draws per layer.
    pub budget: usize,
    /// The constant `D` of the scale-factor rule.
    pub skew_constant: f64,
    pub mode: SamplingMode,
    /// Lower clamp applied to the scale factor.
    pub clamp_s_min: f64,
}

impl SamplerConfig {
    pub fn new(budget: usize, mode: SamplingMode, skew_constant: f64) -> Self {
        Self {
            budget,
            skew_constant,
            mode,
            clamp_s_min: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidArgument(
                "sampling budget must be at least 1".into(),
            ));
        }
        if !(self.skew_constant >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "skew constant must be >= 0, got {}",
                self.skew_constant
            )));
        }
        if !(self.clamp_s_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clamp_s_min must be > 0, got {}",
                self.clamp_s_min
            )));
        }
        Ok(())
    }
}

/// Outcome of one sampling round.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDraw {
    /// Distinct nodes hit by the draws.
    pub sampled: NodeSet,
    /// Inclusion probability of each sampled node, aligned with `sampled`.
    pub sampled_p: Vec<f64>,
    /// Inclusion probability of every candidate, aligned with the candidates.
    pub inclusion_p: Vec<f64>,
    pub n_draws: usize,
}

fn check_aligned(candidates: &NodeSet, norms: &[f64], is_local: &[bool]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if norms.len() != candidates.len() || is_local.len() != candidates.len() {
        return Err(Error::Dimension(format!(
            "{} candidates, {} norms, {} locality flags",
            candidates.len(),
            norms.len(),
            is_local.len()
        )));
    }
    if let Some(bad) = norms.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "column norms must be finite and positive, found {bad}"
        )));
    }
    Ok(())
}

/// `q_j = ||w_*j||^2 / sum_k ||w_*k||^2`.
pub fn linear_weights(
    candidates: NodeSet,
    col_norms: &[f64],
    is_local: Vec<bool>,
) -> Result<ProbDist> {
    check_aligned(&candidates, col_norms, &is_local)?;
    let total: f64 = col_norms.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let q = col_norms.iter().map(|w| w / total).collect();
    Ok(ProbDist {
        candidates,
        q,
        is_local,
        s_used: 1.0,
    })
}

/// Local weights scaled by `s`, remote weights unchanged, then normalized.
pub fn skewed_weights(
    candidates: NodeSet,
    col_norms: &[f64],
    is_local: Vec<bool>,
    s: f64,
) -> Result<ProbDist> {
    check_aligned(&candidates, col_norms, &is_local)?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {s}"
        )));
    }
    let scaled: Vec<f64> = col_norms
        .iter()
        .zip(&is_local)
        .map(|(&w, &local)| if local { s * w } else { w })
        .collect();
    let total: f64 = scaled.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let q = scaled.iter().map(|w| w / total).collect();
    Ok(ProbDist {
        candidates,
        q,
        is_local,
        s_used: s,
    })
}

/// `s = max(clamp_s_min, D (|N| - B) / |R| + 1/2)`.
pub fn skew_scale(
    d: f64,
    n_candidates: usize,
    budget: usize,
    n_remote: usize,
    clamp_s_min: f64,
) -> Result<f64> {
    if n_remote == 0 {
        return Err(Error::NoRemoteCandidates);
    }
    if budget > n_candidates {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds the {n_candidates} candidates"
        )));
    }
    if n_remote > n_candidates {
        return Err(Error::InvalidArgument(format!(
            "{n_remote} remote nodes among {n_candidates} candidates"
        )));
    }
    let raw = d * (n_candidates - budget) as f64 / n_remote as f64 + 0.5;
    Ok(raw.max(clamp_s_min))
}

/// Largest `s` with `V_skewed(s) <= D1 * V_lnr`.
///
/// Setting the two bounds equal gives `s^2 - (T1 + T2) s + T3 = 0` with
///
/// ```text
/// T1 = (D1 - 1)(|L| + |R| - B) / |R| + 1
/// T2 = ((D1 - 1)(|L| + |R| - B) + |L|) * sum_R / (|R| * sum_L)
/// T3 = |L| * sum_R / (|R| * sum_L)
/// ```
///
/// and the larger root is returned.
pub fn exact_scale_upper_bound(
    d1: f64,
    n_local: usize,
    n_remote: usize,
    budget: usize,
    sum_local: f64,
    sum_remote: f64,
) -> Result<f64> {
    if n_remote == 0 {
        return Err(Error::NoRemoteCandidates);
    }
    if !(sum_local > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sum of local column norms must be positive, got {sum_local}"
        )));
    }
    if budget == 0 || budget > n_local + n_remote {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} outside [1, {}]",
            n_local + n_remote
        )));
    }
    let (l, r) = (n_local as f64, n_remote as f64);
    let slack = (d1 - 1.0) * (n_local + n_remote - budget) as f64;
    let ratio = sum_remote / (r * sum_local);
    let t1 = slack / r + 1.0;
    let t2 = (slack + l) * ratio;
    let t3 = l * ratio;
    let b = t1 + t2;
    let disc = b * b - 4.0 * t3;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc));
    }
    Ok(b / 2.0 + disc.sqrt() / 2.0)
}

/// `p = 1 - (1 - q)^B`, evaluated as `-expm1(B ln(1 - q))`.
pub fn inclusion_probability(q: f64, budget: usize) -> f64 {
    if q >= 1.0 {
        return 1.0;
    }
    if q <= 0.0 {
        return 0.0;
    }
    -(budget as f64 * (-q).ln_1p()).exp_m1()
}

/// `B` independent draws from `dist`, duplicates collapsed.
pub fn draw_sample<R: Rng + ?Sized>(dist: &ProbDist, budget: usize, rng: &mut R) -> SampleDraw {
    let m = dist.len();
    let inclusion_p: Vec<f64> = dist
        .q
        .iter()
        .map(|&q| inclusion_probability(q, budget))
        .collect();
    let mut hit = vec![false; m];
    if m == 1 {
        hit[0] = budget > 0;
    } else if m > 1 {
        let index = WeightedIndex::new(&dist.q).expect("ProbDist holds a valid distribution");
        for _ in 0..budget {
            hit[index.sample(rng)] = true;
        }
    }
    let mut sampled = Vec::new();
    let mut sampled_p = Vec::new();
    for (pos, _) in hit.iter().enumerate().filter(|(_, h)| **h) {
        sampled.push(dist.candidates.as_slice()[pos]);
        sampled_p.push(inclusion_p[pos]);
    }
    SampleDraw {
        sampled: NodeSet::from_sorted(sampled),
        sampled_p,
        inclusion_p,
        n_draws: budget,
    }
}

/// `sum_{j in R} p_j`: expected number of remote nodes in a sample.
pub fn expected_remote_count(dist: &ProbDist, budget: usize) -> f64 {
    dist.q
        .iter()
        .zip(&dist.is_local)
        .filter(|(_, &local)| !local)
        .map(|(&q, _)| inclusion_probability(q, budget))
        .sum()
}

impl SampleDraw {
    /// The deterministic "sample" that takes every candidate with `p = 1`.
    pub fn saturated(candidates: &NodeSet, n_draws: usize) -> Self {
        SampleDraw {
            sampled: candidates.clone(),
            sampled_p: vec![1.0; candidates.len()],
            inclusion_p: vec![1.0; candidates.len()],
            n_draws,
        }
    }

    pub fn inclusion_of(&self, node: NodeId) -> Option<f64> {
        self.sampled.position(node).map(|k| self.sampled_p[k])
    }
}
