//! Node sampling: which nodes report in a round, and the round's noisy reports.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ldp::{DirectEncoding, DomainValue};

/// Per-round participation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPlan {
    /// Every node reports independently with probability `pi`.
    Uniform { pi: f64 },
    /// Node `j` reports independently with probability `pis[j]`.
    PerNode { pis: Arc<[f64]> },
}

impl SamplingPlan {
    pub fn uniform(pi: f64) -> Result<Self> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(invalid(format!("uniform pi must lie in (0, 1], got {pi}")));
        }
        Ok(Self::Uniform { pi })
    }

    pub fn per_node(pis: impl Into<Arc<[f64]>>) -> Result<Self> {
        let pis = pis.into();
        if let Some((j, bad)) = pis.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("pi[{j}] = {bad} outside [0, 1]")));
        }
        if pis.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("per-node probabilities sum to zero"));
        }
        Ok(Self::PerNode { pis })
    }

    /// Checks that the plan can drive `n` nodes.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        match self {
            Self::Uniform { pi } => {
                if !(*pi > 0.0 && *pi <= 1.0) {
                    return Err(invalid(format!("uniform pi must lie in (0, 1], got {pi}")));
                }
            }
            Self::PerNode { pis } => {
                if pis.len() != n {
                    return Err(Error::PlanMismatch {
                        plan_len: pis.len(),
                        n,
                    });
                }
            }
        }
        Ok(())
    }

    /// Probability that node `j` reports.
    pub fn pi_of(&self, j: usize) -> f64 {
        match self {
            Self::Uniform { pi } => *pi,
            Self::PerNode { pis } => pis[j],
        }
    }

    /// `Σ_j π_j` over `n` nodes.
    pub fn total(&self, n: usize) -> f64 {
        match self {
            Self::Uniform { pi } => n as f64 * pi,
            Self::PerNode { pis } => pis.iter().sum(),
        }
    }

    pub fn summary(&self, n: usize) -> PlanSummary {
        match self {
            Self::Uniform { pi } => PlanSummary::Uniform { pi: *pi },
            Self::PerNode { pis } => PlanSummary::PerNode {
                n: pis.len(),
                total: self.total(n),
            },
        }
    }
}

/// Compact description of a plan for reports and metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanSummary {
    Uniform { pi: f64 },
    PerNode { n: usize, total: f64 },
}

impl PlanSummary {
    /// Uniform π, or the mean of the per-node probabilities.
    pub fn mean_pi(&self) -> f64 {
        match *self {
            Self::Uniform { pi } => pi,
            Self::PerNode { n, total } => total / n as f64,
        }
    }
}

/// True values held by the `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<DomainValue>,
    domain_size: usize,
}

impl Dataset {
    pub fn new(values: Vec<DomainValue>, domain_size: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if domain_size < 2 {
            return Err(invalid(format!("domain size must be >= 2, got {domain_size}")));
        }
        if let Some(v) = values.iter().find(|v| v.index() >= domain_size) {
            return Err(Error::OutOfDomain {
                value: v.index(),
                domain_size,
            });
        }
        Ok(Self {
            values,
            domain_size,
        })
    }

    pub fn from_indices(indices: &[usize], domain_size: usize) -> Result<Self> {
        Self::new(
            indices.iter().copied().map(DomainValue::from_index).collect(),
            domain_size,
        )
    }

    pub fn values(&self) -> &[DomainValue] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Number of nodes holding each value.
    pub fn true_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.domain_size];
        for v in &self.values {
            counts[v.index()] += 1;
        }
        counts
    }
}

/// One report: the sending node and its randomized value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Report {
    pub node: usize,
    pub value: DomainValue,
}

/// Reports received in a single round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    reports: Vec<Report>,
    n: usize,
    plan_used: SamplingPlan,
}

impl RoundOutcome {
    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    /// `S`, the number of nodes that reported.
    pub fn sampled_count(&self) -> usize {
        self.reports.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plan_used(&self) -> &SamplingPlan {
        &self.plan_used
    }
}

/// Draws the set of reporting nodes, in increasing index order.
pub fn sample_nodes<R: Rng + ?Sized>(plan: &SamplingPlan, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    plan.validate_for(n)?;
    let picked = match plan {
        SamplingPlan::Uniform { pi } => (0..n).filter(|_| rng.random::<f64>() < *pi).collect(),
        SamplingPlan::PerNode { pis } => pis
            .iter()
            .enumerate()
            .filter(|(_, &pi)| rng.random::<f64>() < pi)
            .map(|(j, _)| j)
            .collect(),
    };
    Ok(picked)
}

/// Runs one round: sample nodes, then privatize each sampled node's value.
///
/// All sampling draws are taken before any perturbation draw, so the two stages consume
/// disjoint parts of the random stream.
pub fn run_round<R: Rng + ?Sized>(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<RoundOutcome> {
    if mech.domain_size() != data.domain_size() {
        return Err(Error::DomainMismatch {
            expected: data.domain_size(),
            actual: mech.domain_size(),
        });
    }
    let sampled = sample_nodes(plan, data.n(), rng)?;
    let reports = sampled
        .into_iter()
        .map(|node| Report {
            node,
            value: mech.perturb_unchecked(data.values[node], rng),
        })
        .collect();
    Ok(RoundOutcome {
        reports,
        n: data.n(),
        plan_used: plan.clone(),
    })
}

/// `E[S]`: `nπ` for a uniform plan, `Σ π_j` otherwise.
pub fn expected_reports(plan: &SamplingPlan, n: usize) -> f64 {
    plan.total(n)
}
