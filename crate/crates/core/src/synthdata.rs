//! Synthetic datasets: binomial and two-component binomial mixtures.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::FrequencyTable;
use crate::ldp::DomainValue;
use crate::sampling::Dataset;

/// Distribution the node values are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetKind {
    Binomial {
        trials: u64,
        prob: f64,
    },
    /// With probability `weight` draw from the first binomial, otherwise from the second.
    BimodalMixture {
        trials1: u64,
        prob1: f64,
        trials2: u64,
        prob2: f64,
        weight: f64,
    },
    /// Sum of two independent binomial draws.
    BinomialSum {
        trials1: u64,
        prob1: f64,
        trials2: u64,
        prob2: f64,
    },
}

impl DatasetKind {
    /// Largest value the distribution can produce.
    pub fn max_value(&self) -> u64 {
        match *self {
            Self::Binomial { trials, .. } => trials,
            Self::BimodalMixture { trials1, trials2, .. } => trials1.max(trials2),
            Self::BinomialSum { trials1, trials2, .. } => trials1 + trials2,
        }
    }

    fn validate(&self) -> Result<()> {
        let probs: &[f64] = match self {
            Self::Binomial { prob, .. } => &[*prob],
            Self::BimodalMixture { prob1, prob2, weight, .. } => &[*prob1, *prob2, *weight],
            Self::BinomialSum { prob1, prob2, .. } => &[*prob1, *prob2],
        };
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("probabilities out of [0, 1] in {self:?}")));
        }
        Ok(())
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub n_points: usize,
    pub domain_size: usize,
    pub seed: u64,
}

impl DatasetSpec {
    /// 50,000 draws from Binomial(100, 0.5) over values 0..=100.
    pub fn binomial_default(seed: u64) -> Self {
        Self {
            kind: DatasetKind::Binomial {
                trials: 100,
                prob: 0.5,
            },
            n_points: 50_000,
            domain_size: 101,
            seed,
        }
    }

    /// 50,000 draws from an equal mixture of Binomial(50, 0.6) and Binomial(50, 0.4).
    pub fn bimodal_default(seed: u64) -> Self {
        Self {
            kind: DatasetKind::BimodalMixture {
                trials1: 50,
                prob1: 0.6,
                trials2: 50,
                prob2: 0.4,
                weight: 0.5,
            },
            n_points: 50_000,
            domain_size: 101,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.n_points == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.domain_size < 2 {
            return Err(invalid(format!("domain size must be >= 2, got {}", self.domain_size)));
        }
        if self.kind.max_value() >= self.domain_size as u64 {
            return Err(invalid(format!(
                "support reaches {} but domain size is {}",
                self.kind.max_value(),
                self.domain_size
            )));
        }
        Ok(())
    }
}

fn binomial(trials: u64, prob: f64) -> Result<Binomial> {
    Binomial::new(trials, prob).map_err(|e| invalid(format!("binomial({trials}, {prob}): {e}")))
}

/// Draws `spec.n_points` i.i.d. values from `rng`.
///
/// A mixture with weight exactly 0 or 1 takes no component-selection draw, so it consumes the
/// random stream exactly like the corresponding pure binomial.
pub fn generate<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let values: Vec<DomainValue> = match spec.kind {
        DatasetKind::Binomial { trials, prob } => {
            let dist = binomial(trials, prob)?;
            (0..spec.n_points).map(|_| dist.sample(rng)).map(to_value).collect()
        }
        DatasetKind::BimodalMixture {
            trials1,
            prob1,
            trials2,
            prob2,
            weight,
        } => {
            let first = binomial(trials1, prob1)?;
            let second = binomial(trials2, prob2)?;
            (0..spec.n_points)
                .map(|_| {
                    let pick_first = if weight >= 1.0 {
                        true
                    } else if weight <= 0.0 {
                        false
                    } else {
                        rng.random::<f64>() < weight
                    };
                    if pick_first {
                        first.sample(rng)
                    } else {
                        second.sample(rng)
                    }
                })
                .map(to_value)
                .collect()
        }
        DatasetKind::BinomialSum {
            trials1,
            prob1,
            trials2,
            prob2,
        } => {
            let first = binomial(trials1, prob1)?;
            let second = binomial(trials2, prob2)?;
            (0..spec.n_points)
                .map(|_| first.sample(rng) + second.sample(rng))
                .map(to_value)
                .collect()
        }
    };
    Dataset::new(values, spec.domain_size)
}

/// Generates from a ChaCha stream seeded with `spec.seed`.
pub fn generate_seeded(spec: &DatasetSpec) -> Result<Dataset> {
    generate(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

fn to_value(v: u64) -> DomainValue {
    DomainValue::from_index(v as usize)
}

/// Empirical fraction of nodes holding each value.
pub fn true_frequencies(data: &Dataset) -> FrequencyTable {
    let n = data.n();
    let fractions = data
        .true_counts()
        .into_iter()
        .map(|c| c as f64 / n as f64)
        .collect();
    FrequencyTable::new(fractions, n).expect("empirical fractions form a distribution")
}

/// One value per line.
pub fn write_plain<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    for v in data.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with header `node_index,value`.
pub fn write_csv<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "node_index,value")?;
    for (j, v) in data.values().iter().enumerate() {
        writeln!(w, "{j},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads either format written above. CSV is recognized by its header; node indices must
/// run `0, 1, 2, ...` in order.
pub fn read_dataset<R: BufRead>(r: R, domain_size: usize) -> Result<Dataset> {
    let mut values = Vec::new();
    let mut csv = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line == "node_index,value" {
            csv = true;
            continue;
        }
        let field = if csv {
            let (node, value) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'node,value'", lineno + 1)))?;
            let node: usize = node
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if node != values.len() {
                return Err(Error::Parse(format!(
                    "line {}: node index {node} out of order",
                    lineno + 1
                )));
            }
            value
        } else {
            line
        };
        let v: usize = field
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        values.push(DomainValue::from_index(v));
    }
    Dataset::new(values, domain_size)
}

/// Reads one sampling probability per line.
pub fn read_probabilities<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
        );
    }
    Ok(out)
}
