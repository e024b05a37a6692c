//! Frequency estimators over direct-encoding reports and their variance closed forms.
//!
//! With `obs_i` the number of received reports equal to `i`, `S` the number of reporters and
//! `(p, q)` the pure-protocol constants:
//!
//! | estimator | formula | unbiased under sampling |
//! |-----------|---------|-------------------------|
//! | `wang`    | `(obs_i − n q) / (p − q)` | only at `π = 1` |
//! | `g`       | `wang / π + n q (1 − π) / ((p − q) π)` | yes |
//! | `chat`    | `(obs_i − S q) / (π (p − q))` | yes |
//! | `h`       | `(obs_i − n q) / (p − q)` (same arithmetic as `wang`) | no |
//! | `T`       | `n h / Σπ_j + n q (n − Σπ_j) / (Σπ_j (p − q))` | yes, per-node `π_j` |
//!
//! Estimates are never clipped; negative values and values above `n` are legal outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ldp::PureProtocolParams;
use crate::sampling::{PlanSummary, RoundOutcome, SamplingPlan};

/// Which estimator produced an [`EstimateVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorId {
    #[serde(rename = "wang")]
    Wang,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "chat")]
    CHat,
    #[serde(rename = "h")]
    H,
    #[serde(rename = "T")]
    T,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] = [Self::Wang, Self::G, Self::CHat, Self::H, Self::T];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wang => "wang",
            Self::G => "g",
            Self::CHat => "chat",
            Self::H => "h",
            Self::T => "T",
        }
    }

    /// Applies this estimator to one round's tallies.
    ///
    /// `g` and `chat` need a uniform plan. `T` accepts either kind; a uniform plan is
    /// treated as `π_j = π` for every node.
    pub fn estimate(
        self,
        counts: &SupportCounts,
        proto: &PureProtocolParams,
        plan: &SamplingPlan,
    ) -> Result<EstimateVector> {
        match (self, plan) {
            (Self::Wang, _) => Ok(estimate_wang(counts, proto)),
            (Self::H, _) => Ok(estimate_h(counts, proto)),
            (Self::G, SamplingPlan::Uniform { pi }) => estimate_g(counts, proto, *pi),
            (Self::CHat, SamplingPlan::Uniform { pi }) => estimate_c_hat(counts, proto, *pi),
            (Self::G | Self::CHat, SamplingPlan::PerNode { .. }) => Err(invalid(format!(
                "estimator {self} requires a uniform sampling plan"
            ))),
            (Self::T, SamplingPlan::Uniform { pi }) => {
                estimate_t_with_total(counts, proto, counts.n as f64 * pi, plan.summary(counts.n))
            }
            (Self::T, SamplingPlan::PerNode { pis }) => estimate_t(counts, proto, pis),
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wang" | "c" => Ok(Self::Wang),
            "g" => Ok(Self::G),
            "chat" | "c_hat" => Ok(Self::CHat),
            "h" => Ok(Self::H),
            "T" | "t" => Ok(Self::T),
            other => Err(invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Per-value report tallies for one round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SupportCounts {
    observed: Vec<usize>,
    sampled_count: usize,
    n: usize,
}

impl SupportCounts {
    /// Builds tallies directly; `S` is taken as `Σ observed`.
    pub fn new(observed: Vec<usize>, n: usize) -> Result<Self> {
        let sampled_count = observed.iter().sum();
        if sampled_count > n {
            return Err(invalid(format!("{sampled_count} reports from {n} nodes")));
        }
        Ok(Self {
            observed,
            sampled_count,
            n,
        })
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn sampled_count(&self) -> usize {
        self.sampled_count
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_size(&self) -> usize {
        self.observed.len()
    }
}

/// Parameters an estimate was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub p: f64,
    pub q: f64,
    pub plan: Option<PlanSummary>,
    pub n: usize,
}

/// Estimated count of every domain value.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    pub estimates: Vec<f64>,
    pub estimator: EstimatorId,
    pub params: EstimateParams,
}

impl EstimateVector {
    pub fn total(&self) -> f64 {
        self.estimates.iter().sum()
    }
}

/// True value fractions `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    fractions: Vec<f64>,
    n: usize,
}

impl FrequencyTable {
    pub fn new(fractions: Vec<f64>, n: usize) -> Result<Self> {
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("frequencies must lie in [0, 1]"));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("frequencies sum to {sum}, expected 1")));
        }
        Ok(Self { fractions, n })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_size(&self) -> usize {
        self.fractions.len()
    }

    /// `n · f_i` for every value.
    pub fn counts(&self) -> Vec<f64> {
        self.fractions.iter().map(|f| f * self.n as f64).collect()
    }
}

/// Tallies the reports of one round. For direct encoding, value `i` is supported exactly by
/// reports equal to `i`.
pub fn count_supports(outcome: &RoundOutcome, domain_size: usize) -> Result<SupportCounts> {
    let mut observed = vec![0usize; domain_size];
    for r in outcome.reports() {
        let i = r.value.index();
        if i >= domain_size {
            return Err(Error::OutOfDomain {
                value: i,
                domain_size,
            });
        }
        observed[i] += 1;
    }
    Ok(SupportCounts {
        observed,
        sampled_count: outcome.sampled_count(),
        n: outcome.n(),
    })
}

fn params_echo(counts: &SupportCounts, proto: &PureProtocolParams, plan: Option<PlanSummary>) -> EstimateParams {
    EstimateParams {
        p: proto.p_star(),
        q: proto.q_star(),
        plan,
        n: counts.n,
    }
}

fn check_pi(pi: f64) -> Result<()> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(invalid(format!("pi must lie in (0, 1], got {pi}")));
    }
    Ok(())
}

/// Frequency oracle for full participation: `(obs_i − n q) / (p − q)`.
///
/// Subtracts `n q` even when only `S < n` nodes reported, which biases it under sampling.
pub fn estimate_wang(counts: &SupportCounts, proto: &PureProtocolParams) -> EstimateVector {
    EstimateVector {
        estimates: centered_by_n(counts, proto),
        estimator: EstimatorId::Wang,
        params: params_echo(counts, proto, None),
    }
}

fn centered_by_n(counts: &SupportCounts, proto: &PureProtocolParams) -> Vec<f64> {
    let offset = counts.n as f64 * proto.q_star();
    let gap = proto.gap();
    counts
        .observed
        .iter()
        .map(|&o| (o as f64 - offset) / gap)
        .collect()
}

/// `E[wang(i)]` under uniform sampling: `n f_i π − n q (1 − π) / (p − q)`.
pub fn biased_mean_under_sampling(f_i: f64, n: usize, pi: f64, p: f64, q: f64) -> f64 {
    let n = n as f64;
    n * f_i * pi - n * q * (1.0 - pi) / (p - q)
}

/// `E[h(i)]` under per-node sampling with `Σπ_j = pi_total`, when each node holds value `i`
/// with probability `f_i` independently of its `π_j`.
pub fn biased_mean_per_node(f_i: f64, n: usize, pi_total: f64, p: f64, q: f64) -> f64 {
    pi_total * f_i - q * (n as f64 - pi_total) / (p - q)
}

/// Debiased estimator `wang / π + n q (1 − π) / ((p − q) π)`.
pub fn estimate_g(counts: &SupportCounts, proto: &PureProtocolParams, pi: f64) -> Result<EstimateVector> {
    check_pi(pi)?;
    let correction = counts.n as f64 * proto.q_star() * (1.0 - pi) / (proto.gap() * pi);
    let estimates = centered_by_n(counts, proto)
        .into_iter()
        .map(|c| c / pi + correction)
        .collect();
    Ok(EstimateVector {
        estimates,
        estimator: EstimatorId::G,
        params: params_echo(counts, proto, Some(PlanSummary::Uniform { pi })),
    })
}

/// Subtracts the realized `S q` instead of `n q`: `(obs_i − S q) / (π (p − q))`.
pub fn estimate_c_hat(counts: &SupportCounts, proto: &PureProtocolParams, pi: f64) -> Result<EstimateVector> {
    check_pi(pi)?;
    let offset = counts.sampled_count as f64 * proto.q_star();
    let scale = pi * proto.gap();
    let estimates = counts
        .observed
        .iter()
        .map(|&o| (o as f64 - offset) / scale)
        .collect();
    Ok(EstimateVector {
        estimates,
        estimator: EstimatorId::CHat,
        params: params_echo(counts, proto, Some(PlanSummary::Uniform { pi })),
    })
}

/// The sampled-tally intermediate `(obs_i − n q) / (p − q)` that `T` is built from.
pub fn estimate_h(counts: &SupportCounts, proto: &PureProtocolParams) -> EstimateVector {
    EstimateVector {
        estimates: centered_by_n(counts, proto),
        estimator: EstimatorId::H,
        params: params_echo(counts, proto, None),
    }
}

/// Per-node debiased estimator `n h / Σπ_j + n q (n − Σπ_j) / (Σπ_j (p − q))`.
pub fn estimate_t(counts: &SupportCounts, proto: &PureProtocolParams, pis: &[f64]) -> Result<EstimateVector> {
    if pis.len() != counts.n {
        return Err(Error::PlanMismatch {
            plan_len: pis.len(),
            n: counts.n,
        });
    }
    let total: f64 = pis.iter().sum();
    estimate_t_with_total(
        counts,
        proto,
        total,
        PlanSummary::PerNode {
            n: pis.len(),
            total,
        },
    )
}

fn estimate_t_with_total(
    counts: &SupportCounts,
    proto: &PureProtocolParams,
    total: f64,
    plan: PlanSummary,
) -> Result<EstimateVector> {
    if !(total > 0.0) {
        return Err(invalid("sampling probabilities sum to zero"));
    }
    let n = counts.n as f64;
    let correction = n * proto.q_star() * (n - total) / (total * proto.gap());
    let estimates = centered_by_n(counts, proto)
        .into_iter()
        .map(|h| n * h / total + correction)
        .collect();
    Ok(EstimateVector {
        estimates,
        estimator: EstimatorId::T,
        params: params_echo(counts, proto, Some(plan)),
    })
}

/// Approximate variance of `wang` under uniform sampling: `n π (q − q² π) / (p − q)²`.
pub fn approx_var_c(n: usize, pi: f64, p: f64, q: f64) -> f64 {
    n as f64 * pi * (q - q * q * pi) / (p - q).powi(2)
}

/// Approximate variance of `g`: `n (q − q² π) / ((p − q)² π)`.
pub fn approx_var_g(n: usize, pi: f64, p: f64, q: f64) -> f64 {
    n as f64 * (q - q * q * pi) / ((p - q).powi(2) * pi)
}

/// Approximate variance of `g / (n π)`: `(q − q² π) / ((p − q)² π³ n)`.
pub fn approx_norm_var_g(n: usize, pi: f64, p: f64, q: f64) -> f64 {
    (q - q * q * pi) / ((p - q).powi(2) * pi.powi(3) * n as f64)
}

/// Approximate variance of `T`: `n² Σ q π_j (1 − q π_j) / ((Σπ_j)² (p − q)²)`.
pub fn approx_var_t(n: usize, pis: &[f64], p: f64, q: f64) -> Result<f64> {
    if pis.len() != n {
        return Err(Error::PlanMismatch { plan_len: pis.len(), n });
    }
    let total: f64 = pis.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("sampling probabilities sum to zero"));
    }
    let spread: f64 = pis.iter().map(|&pi| q * pi * (1.0 - q * pi)).sum();
    let n = n as f64;
    Ok(n * n * spread / (total * total * (p - q).powi(2)))
}

/// Excess term `Var(S) q² / (π² (p − q)²)` with `Var(S) = n π (1 − π)`.
///
/// This is the gap between `Var(chat)` and `Var(g)` when the covariance between `obs_i` and
/// `S` is neglected. It is not the true variance difference.
pub fn var_c_hat_excess(n: usize, pi: f64, p: f64, q: f64) -> f64 {
    let var_s = n as f64 * pi * (1.0 - pi);
    var_s * q * q / (pi * pi * (p - q).powi(2))
}
