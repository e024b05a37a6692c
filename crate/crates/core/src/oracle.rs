//! Exact small-instance moments by exhaustive enumeration.
//!
//! Each node has `d + 1` atomic outcomes: not sampled (probability `1 − π_j`), or sampled and
//! reporting value `v` (probability `π_j · P[perturb(X_j) = v]`). The oracle walks every joint
//! outcome with a mixed-radix counter, folds them into a distribution over report tallies, and
//! takes exact moments of any estimator over that distribution. It never touches the random
//! simulation path.

use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimators::{EstimatorId, SupportCounts};
use crate::ldp::{DirectEncoding, DomainValue, PureProtocol, PureProtocolParams};
use crate::sampling::{Dataset, SamplingPlan};

/// Largest enumeration the oracle accepts.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// How true values are bound to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeAssignment {
    /// Node `j` holds `data.values()[j]`.
    #[default]
    Fixed,
    /// The dataset's values are assigned to nodes by a uniformly random permutation, so each
    /// node holds value `i` with probability `f_i` independently of its `π_j`.
    Exchangeable,
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Exact law of the per-round tallies.
#[derive(Debug, Clone)]
pub struct TallyDistribution {
    pub atoms: Vec<(SupportCounts, f64)>,
    pub enumeration_size: u64,
    pub total_mass: f64,
}

/// Exact per-value mean and variance of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub enumeration_size: u64,
    pub total_mass: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of joint outcomes the oracle would walk.
pub fn enumeration_size(n: usize, d: usize, assignment: NodeAssignment) -> f64 {
    let base = ((d + 1) as f64).powi(n as i32);
    match assignment {
        NodeAssignment::Fixed => base,
        NodeAssignment::Exchangeable => base * factorial(n),
    }
}

/// Enumerates every joint sampling × perturbation outcome.
pub fn tally_distribution(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    assignment: NodeAssignment,
) -> Result<TallyDistribution> {
    let n = data.n();
    let d = data.domain_size();
    plan.validate_for(n)?;
    if mech.domain_size() != d {
        return Err(Error::DomainMismatch {
            expected: d,
            actual: mech.domain_size(),
        });
    }
    let size = enumeration_size(n, d, assignment);
    if size > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }

    let assignments: Vec<Vec<DomainValue>> = match assignment {
        NodeAssignment::Fixed => vec![data.values().to_vec()],
        NodeAssignment::Exchangeable => (0..n)
            .permutations(n)
            .map(|perm| perm.into_iter().map(|k| data.values()[k]).collect())
            .collect(),
    };
    let assignment_weight = 1.0 / assignments.len() as f64;

    // Node j's atomic outcome probabilities, per assignment: slot 0 is "not sampled".
    let node_tables = |values: &[DomainValue]| -> Vec<Vec<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let pi = plan.pi_of(j);
                std::iter::once(1.0 - pi)
                    .chain((0..d).map(|v| pi * mech.kernel(x, DomainValue::from_index(v))))
                    .collect()
            })
            .collect()
    };

    // Partition by (assignment, leading digit); merge in partition order.
    let parts: Vec<(usize, usize)> = (0..assignments.len())
        .flat_map(|a| (0..=d).map(move |lead| (a, lead)))
        .collect();
    let partials: Vec<(BTreeMap<Vec<usize>, CompensatedSum>, CompensatedSum)> = parts
        .par_iter()
        .map(|&(a, lead)| {
            let tables = node_tables(&assignments[a]);
            let mut map: BTreeMap<Vec<usize>, CompensatedSum> = BTreeMap::new();
            let mut mass = CompensatedSum::default();
            let mut digits = vec![0usize; n];
            digits[0] = lead;
            loop {
                let prob = assignment_weight
                    * digits
                        .iter()
                        .zip(&tables)
                        .map(|(&dg, t)| t[dg])
                        .product::<f64>();
                if prob > 0.0 {
                    let mut observed = vec![0usize; d];
                    for &dg in &digits {
                        if dg > 0 {
                            observed[dg - 1] += 1;
                        }
                    }
                    map.entry(observed).or_default().add(prob);
                }
                mass.add(prob);
                // Advance digits 1..n; digit 0 is fixed for this partition.
                let mut k = 1;
                while k < n {
                    digits[k] += 1;
                    if digits[k] <= d {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
                if k >= n {
                    break;
                }
            }
            (map, mass)
        })
        .collect();

    let mut merged: BTreeMap<Vec<usize>, CompensatedSum> = BTreeMap::new();
    let mut total = CompensatedSum::default();
    for (map, mass) in partials {
        total.add(mass.value());
        for (k, v) in map {
            merged.entry(k).or_default().add(v.value());
        }
    }
    let atoms = merged
        .into_iter()
        .map(|(observed, w)| Ok((SupportCounts::new(observed, n)?, w.value())))
        .collect::<Result<Vec<_>>>()?;
    Ok(TallyDistribution {
        atoms,
        enumeration_size: size as u64,
        total_mass: total.value(),
    })
}

impl TallyDistribution {
    /// Exact moments of `estimator` under this tally law.
    pub fn moments(&self, mech: &DirectEncoding, plan: &SamplingPlan, estimator: EstimatorId) -> Result<ExactMoments> {
        self.moments_with_proto(&mech.pure_params(), mech.domain_size(), plan, estimator)
    }

    /// Like [`moments`](Self::moments), but the estimator is computed with `proto`, which may
    /// differ from the mechanism that generated the reports.
    pub fn moments_with_proto(
        &self,
        proto: &PureProtocolParams,
        d: usize,
        plan: &SamplingPlan,
        estimator: EstimatorId,
    ) -> Result<ExactMoments> {
        let proto = *proto;
        let estimates: Vec<(Vec<f64>, f64)> = self
            .atoms
            .iter()
            .map(|(c, w)| Ok((estimator.estimate(c, &proto, plan)?.estimates, *w)))
            .collect::<Result<_>>()?;
        let mut mean_acc = vec![CompensatedSum::default(); d];
        for (est, w) in &estimates {
            for (acc, e) in mean_acc.iter_mut().zip(est) {
                acc.add(w * e);
            }
        }
        let means: Vec<f64> = mean_acc.iter().map(CompensatedSum::value).collect();
        let mut var_acc = vec![CompensatedSum::default(); d];
        for (est, w) in &estimates {
            for ((acc, e), m) in var_acc.iter_mut().zip(est).zip(&means) {
                acc.add(w * (e - m).powi(2));
            }
        }
        Ok(ExactMoments {
            means,
            variances: var_acc.iter().map(CompensatedSum::value).collect(),
            enumeration_size: self.enumeration_size,
            total_mass: self.total_mass,
        })
    }
}

/// Exact moments with the dataset's fixed node assignment.
pub fn exact_moments(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    estimator: EstimatorId,
) -> Result<ExactMoments> {
    exact_moments_with(data, mech, plan, estimator, NodeAssignment::Fixed)
}

pub fn exact_moments_with(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    estimator: EstimatorId,
    assignment: NodeAssignment,
) -> Result<ExactMoments> {
    tally_distribution(data, mech, plan, assignment)?.moments(mech, plan, estimator)
}

/// Exact per-value variances of `g` and `chat` on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarOrdering {
    pub var_g: Vec<f64>,
    pub var_c_hat: Vec<f64>,
}

impl VarOrdering {
    /// Whether `Var(chat) ≥ Var(g) − tol` for every value.
    pub fn holds(&self, tol: f64) -> bool {
        self.var_c_hat.iter().zip(&self.var_g).all(|(c, g)| *c >= g - tol)
    }

    /// Largest `Var(g) − Var(chat)` over the domain.
    pub fn worst_violation(&self) -> f64 {
        self.var_g
            .iter()
            .zip(&self.var_c_hat)
            .map(|(g, c)| g - c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn exact_var_ordering(data: &Dataset, mech: &DirectEncoding, plan_uniform: &SamplingPlan) -> Result<VarOrdering> {
    if !matches!(plan_uniform, SamplingPlan::Uniform { .. }) {
        return Err(invalid("variance ordering needs a uniform plan"));
    }
    let dist = tally_distribution(data, mech, plan_uniform, NodeAssignment::Fixed)?;
    Ok(VarOrdering {
        var_g: dist.moments(mech, plan_uniform, EstimatorId::G)?.variances,
        var_c_hat: dist.moments(mech, plan_uniform, EstimatorId::CHat)?.variances,
    })
}
