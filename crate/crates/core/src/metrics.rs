//! Comparison metrics and the Monte-Carlo trial harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{count_supports, EstimateVector, EstimatorId, FrequencyTable, SupportCounts};
use crate::ldp::{DirectEncoding, PureProtocol};
use crate::sampling::{run_round, Dataset, PlanSummary, RoundOutcome, SamplingPlan};

/// How an estimate vector is turned into a distribution before computing TV distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMode {
    /// Clip negatives to zero, then normalize. Falls back to uniform if nothing survives.
    #[default]
    ClipRenormalize,
    /// Divide raw estimates by `n` and compare directly; may exceed 1.
    RawHalfsum,
}

impl FromStr for TvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" | "clip_renormalize" => Ok(Self::ClipRenormalize),
            "raw" | "raw_halfsum" => Ok(Self::RawHalfsum),
            other => Err(invalid(format!("unknown tv mode '{other}'"))),
        }
    }
}

impl fmt::Display for TvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClipRenormalize => "clip",
            Self::RawHalfsum => "raw",
        })
    }
}

/// Clipped and renormalized estimate distribution.
pub fn clip_renormalize(estimates: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = estimates.iter().map(|&e| e.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.into_iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / estimates.len() as f64; estimates.len()]
    }
}

/// Total variation distance between the true distribution and an estimate.
pub fn tv_distance(f_true: &FrequencyTable, estimate: &EstimateVector, mode: TvMode) -> Result<f64> {
    tv_distance_raw(f_true, &estimate.estimates, mode)
}

pub(crate) fn tv_distance_raw(f_true: &FrequencyTable, estimates: &[f64], mode: TvMode) -> Result<f64> {
    if f_true.domain_size() != estimates.len() {
        return Err(Error::DomainMismatch {
            expected: f_true.domain_size(),
            actual: estimates.len(),
        });
    }
    let truth = f_true.fractions();
    let half_l1 = |other: &mut dyn Iterator<Item = f64>| {
        0.5 * truth.iter().zip(other).map(|(t, o)| (o - t).abs()).sum::<f64>()
    };
    Ok(match mode {
        TvMode::ClipRenormalize => half_l1(&mut clip_renormalize(estimates).into_iter()),
        TvMode::RawHalfsum => {
            let n = f_true.n() as f64;
            half_l1(&mut estimates.iter().map(|e| e / n))
        }
    })
}

/// Realized or expected number of reports sent.
#[derive(Debug, Clone, Copy)]
pub enum CostBasis<'a> {
    Realized(&'a RoundOutcome),
    Expected { plan: &'a SamplingPlan, n: usize },
}

/// Communication cost in reports: `S` for an outcome, `Σ π_j` for a plan.
pub fn communication_cost(basis: CostBasis<'_>) -> f64 {
    match basis {
        CostBasis::Realized(outcome) => outcome.sampled_count() as f64,
        CostBasis::Expected { plan, n } => plan.total(n),
    }
}

/// RNG for trial `trial` of an experiment seeded with `seed`.
///
/// Each trial gets its own ChaCha stream, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Mixes `seed` with `index` (SplitMix64 finalizer) to seed sub-experiments.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `trials` independent rounds in parallel and maps each through `f`.
///
/// Results come back in trial order.
pub fn simulate<T, F>(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    trials: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RoundOutcome, &SupportCounts) -> Result<T> + Sync,
{
    plan.validate_for(data.n())?;
    if mech.domain_size() != data.domain_size() {
        return Err(Error::DomainMismatch {
            expected: data.domain_size(),
            actual: mech.domain_size(),
        });
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let outcome = run_round(data, mech, plan, &mut rng)?;
            let counts = count_supports(&outcome, data.domain_size())?;
            f(&outcome, &counts)
        })
        .collect()
}

/// Per-value mean and sample variance of an estimator across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub means: Vec<f64>,
    /// Unbiased (`T − 1`) variances; `None` for a single trial.
    pub variances: Option<Vec<f64>>,
    pub trials: usize,
    pub estimator: EstimatorId,
    pub plan: PlanSummary,
}

impl TrialSummary {
    /// Two-pass mean and variance over per-trial estimate vectors.
    pub fn from_estimates(rows: &[Vec<f64>], estimator: EstimatorId, plan: PlanSummary) -> Result<Self> {
        let trials = rows.len();
        if trials == 0 {
            return Err(invalid("no trials"));
        }
        let d = rows[0].len();
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= trials as f64);
        let variances = (trials >= 2).then(|| {
            let mut v = vec![0.0; d];
            for row in rows {
                for ((acc, x), m) in v.iter_mut().zip(row).zip(&means) {
                    *acc += (x - m).powi(2);
                }
            }
            v.iter_mut().for_each(|acc| *acc /= (trials - 1) as f64);
            v
        });
        Ok(Self {
            means,
            variances,
            trials,
            estimator,
            plan,
        })
    }

    /// Standard error of the mean for value `i`.
    pub fn std_error(&self, i: usize) -> Option<f64> {
        self.variances
            .as_ref()
            .map(|v| (v[i] / self.trials as f64).sqrt())
    }

    /// Writes `value_index,true_count,mean_estimate,variance,estimator,pi,epsilon,T` rows.
    ///
    /// For per-node plans the `pi` column carries the mean `π_j`.
    pub fn write_csv<W: Write>(&self, mut w: W, true_counts: &[usize], epsilon: f64, header: bool) -> Result<()> {
        if header {
            writeln!(w, "{CSV_HEADER}")?;
        }
        for (i, m) in self.means.iter().enumerate() {
            let var = self
                .variances
                .as_ref()
                .map(|v| v[i].to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{i},{},{m},{var},{},{},{epsilon},{}",
                true_counts[i],
                self.estimator,
                self.plan.mean_pi(),
                self.trials
            )?;
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "value_index,true_count,mean_estimate,variance,estimator,pi,epsilon,T";

/// Runs `trials` rounds and summarizes one estimator.
pub fn run_trials(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    estimator: EstimatorId,
    trials: usize,
    seed: u64,
) -> Result<TrialSummary> {
    Ok(run_trials_multi(data, mech, plan, &[estimator], trials, seed)?.remove(0))
}

/// Like [`run_trials`], evaluating several estimators on the same rounds.
pub fn run_trials_multi(
    data: &Dataset,
    mech: &DirectEncoding,
    plan: &SamplingPlan,
    estimators: &[EstimatorId],
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialSummary>> {
    if trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    if estimators.is_empty() {
        return Err(invalid("no estimator selected"));
    }
    let proto = mech.pure_params();
    // Validate estimator/plan compatibility once before spending any trials.
    let probe = SupportCounts::new(vec![0; data.domain_size()], data.n())?;
    for id in estimators {
        id.estimate(&probe, &proto, plan)?;
    }
    let per_trial = simulate(data, mech, plan, trials, seed, |_, counts| {
        estimators
            .iter()
            .map(|id| Ok(id.estimate(counts, &proto, plan)?.estimates))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = plan.summary(data.n());
    estimators
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let rows: Vec<Vec<f64>> = per_trial.iter().map(|t| t[k].clone()).collect();
            TrialSummary::from_estimates(&rows, *id, summary)
        })
        .collect()
}

/// Welford's single-pass mean/variance, used to cross-check [`TrialSummary`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }
}
