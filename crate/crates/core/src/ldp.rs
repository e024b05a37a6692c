//! Direct encoding (k-ary randomized response) and its pure-LDP characterization.
//!
//! A direct-encoding report keeps the true value with probability `p = e^ε / (e^ε + d − 1)`
//! and replaces it with each of the other `d − 1` values with probability
//! `q = 1 / (e^ε + d − 1)`. Viewed as a pure protocol, the support of an output `y` is the
//! singleton `{y}`, so `p* = p` and `q* = q`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// An element of the discrete domain, canonicalized to an index in `0..d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainValue(usize);

impl DomainValue {
    /// Checked constructor.
    pub fn new(index: usize, domain_size: usize) -> Result<Self> {
        if index >= domain_size {
            return Err(Error::OutOfDomain {
                value: index,
                domain_size,
            });
        }
        Ok(Self(index))
    }

    /// Wraps an index without a bounds check. Callers validating against a domain later
    /// (e.g. `Dataset::new`) use this.
    pub const fn from_index(index: usize) -> Self {
        Self(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for DomainValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Privacy budget ε (nats) together with the domain size `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
    domain_size: usize,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, domain_size: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.exp().is_finite()) {
            return Err(invalid(format!("epsilon must be > 0 with finite e^epsilon, got {epsilon}")));
        }
        if domain_size < 2 {
            return Err(invalid(format!("domain size must be >= 2, got {domain_size}")));
        }
        Ok(Self {
            epsilon,
            domain_size,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }
}

/// Computes `(p, q)` for direct encoding.
pub fn de_probabilities(params: &PrivacyParams) -> Result<(f64, f64)> {
    // Re-validate: the fields are private but deserialization bypasses `new`.
    let params = PrivacyParams::new(params.epsilon, params.domain_size)?;
    let e = params.epsilon.exp();
    let c = 1.0 / (e + (params.domain_size - 1) as f64);
    Ok((e * c, c))
}

/// The pure-protocol constants `(p*, q*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureProtocolParams {
    p_star: f64,
    q_star: f64,
}

impl PureProtocolParams {
    pub fn new(p_star: f64, q_star: f64) -> Result<Self> {
        if !(p_star.is_finite() && q_star.is_finite()) || p_star <= q_star {
            return Err(invalid(format!(
                "pure protocol requires p* > q*, got p*={p_star}, q*={q_star}"
            )));
        }
        Ok(Self { p_star, q_star })
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    /// `p* − q*`, the denominator shared by every estimator.
    pub fn gap(&self) -> f64 {
        self.p_star - self.q_star
    }
}

/// A local randomizer that is a pure LDP protocol.
///
/// Only direct encoding implements this today.
pub trait PureProtocol {
    fn pure_params(&self) -> PureProtocolParams;

    /// Whether `output` supports `input`.
    fn supports(&self, output: DomainValue, input: DomainValue) -> bool;

    fn domain_size(&self) -> usize;
}

/// The direct-encoding mechanism with precomputed `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectEncoding {
    params: PrivacyParams,
    p: f64,
    q: f64,
}

impl DirectEncoding {
    pub fn new(params: PrivacyParams) -> Result<Self> {
        let (p, q) = de_probabilities(&params)?;
        Ok(Self { params, p, q })
    }

    pub fn from_epsilon(epsilon: f64, domain_size: usize) -> Result<Self> {
        Self::new(PrivacyParams::new(epsilon, domain_size)?)
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn domain_size(&self) -> usize {
        self.params.domain_size
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `P[perturb(input) = output]`.
    pub fn kernel(&self, input: DomainValue, output: DomainValue) -> f64 {
        if input == output {
            self.p
        } else {
            self.q
        }
    }

    /// Randomizes `true_value` with a single uniform draw.
    ///
    /// `[0, p)` maps to the true value; the remainder is split into `d − 1` slots of width `q`,
    /// one per other value in increasing index order.
    pub fn perturb<R: Rng + ?Sized>(&self, true_value: DomainValue, rng: &mut R) -> Result<DomainValue> {
        let d = self.params.domain_size;
        if true_value.0 >= d {
            return Err(Error::OutOfDomain {
                value: true_value.0,
                domain_size: d,
            });
        }
        Ok(self.perturb_unchecked(true_value, rng))
    }

    pub(crate) fn perturb_unchecked<R: Rng + ?Sized>(&self, true_value: DomainValue, rng: &mut R) -> DomainValue {
        let u: f64 = rng.random();
        if u < self.p {
            return true_value;
        }
        let d = self.params.domain_size;
        let slot = (((u - self.p) / self.q) as usize).min(d - 2);
        if slot < true_value.0 {
            DomainValue(slot)
        } else {
            DomainValue(slot + 1)
        }
    }
}

impl PureProtocol for DirectEncoding {
    fn pure_params(&self) -> PureProtocolParams {
        pure_params(self)
    }

    fn supports(&self, output: DomainValue, input: DomainValue) -> bool {
        supports(output, input)
    }

    fn domain_size(&self) -> usize {
        self.params.domain_size
    }
}

/// Direct-encoding support predicate: `Support(y) = {y}`.
pub fn supports(output: DomainValue, input: DomainValue) -> bool {
    output == input
}

/// `(p*, q*) = (p, q)` for direct encoding.
pub fn pure_params(mech: &DirectEncoding) -> PureProtocolParams {
    PureProtocolParams {
        p_star: mech.p,
        q_star: mech.q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dv(i: usize) -> DomainValue {
        DomainValue::from_index(i)
    }

    #[test]
    fn probabilities_at_ln3_d3() {
        let (p, q) = de_probabilities(&PrivacyParams::new(3f64.ln(), 3).unwrap()).unwrap();
        assert_abs_diff_eq!(p, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn probabilities_large_epsilon() {
        let (p, q) = de_probabilities(&PrivacyParams::new(20.0, 2).unwrap()).unwrap();
        assert!(p >= 1.0 - 1e-8);
        assert!(q <= 1e-8);
    }

    #[test]
    fn probabilities_eps1_d100() {
        let (p, q) = de_probabilities(&PrivacyParams::new(1.0, 100).unwrap()).unwrap();
        assert_abs_diff_eq!(p, 0.026723630989395224, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.009831074434450554, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PrivacyParams::new(0.0, 3).is_err());
        assert!(PrivacyParams::new(-1.0, 3).is_err());
        assert!(PrivacyParams::new(f64::NAN, 3).is_err());
        assert!(PrivacyParams::new(1.0, 1).is_err());
        assert!(DirectEncoding::from_epsilon(1.0, 0).is_err());
    }

    #[test]
    fn perturb_rejects_out_of_domain() {
        let mech = DirectEncoding::from_epsilon(1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            mech.perturb(dv(4), &mut rng),
            Err(Error::OutOfDomain { value: 4, domain_size: 4 })
        ));
        assert!(DomainValue::new(4, 4).is_err());
    }

    #[test]
    fn perturb_is_deterministic_under_seed() {
        let mech = DirectEncoding::from_epsilon(0.5, 7).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|k| mech.perturb(dv(k % 7), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn perturb_binary_keep_rate() {
        let mech = DirectEncoding::from_epsilon(3f64.ln(), 2).unwrap();
        assert_abs_diff_eq!(mech.p(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(mech.q(), 0.25, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 200_000;
        let kept = (0..trials)
            .filter(|_| mech.perturb(dv(1), &mut rng).unwrap() == dv(1))
            .count();
        let rate = kept as f64 / trials as f64;
        // 4σ of a Bernoulli(0.75) mean over 2e5 draws ≈ 0.0039
        assert!((rate - 0.75).abs() < 0.004, "rate {rate}");
    }

    #[test]
    fn perturb_empirical_distribution_eps1_d10() {
        let mech = DirectEncoding::from_epsilon(1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut hist = [0usize; 10];
        let draws = 1_000_000;
        for _ in 0..draws {
            hist[mech.perturb(dv(3), &mut rng).unwrap().index()] += 1;
        }
        let keep = hist[3] as f64 / draws as f64;
        assert!((keep - mech.p()).abs() <= 0.002, "keep {keep} vs p {}", mech.p());
        for (i, &h) in hist.iter().enumerate().filter(|(i, _)| *i != 3) {
            let freq = h as f64 / draws as f64;
            assert!((freq - mech.q()).abs() <= 0.002, "value {i}: {freq}");
        }
    }

    #[test]
    fn support_is_identity() {
        assert!(supports(dv(3), dv(3)));
        assert!(!supports(dv(3), dv(4)));
        let mech = DirectEncoding::from_epsilon(1.0, 6).unwrap();
        for y in 0..6 {
            let n = (0..6).filter(|&x| mech.supports(dv(y), dv(x))).count();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn pure_params_examples() {
        let mech = DirectEncoding::from_epsilon(3f64.ln(), 3).unwrap();
        let pp = pure_params(&mech);
        assert_abs_diff_eq!(pp.p_star(), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(pp.q_star(), 0.2, epsilon = 1e-12);

        let e = std::f64::consts::E;
        let pp = DirectEncoding::from_epsilon(1.0, 2).unwrap().pure_params();
        assert_abs_diff_eq!(pp.p_star(), e / (e + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(pp.q_star(), 1.0 / (e + 1.0), epsilon = 1e-12);

        assert!(PureProtocolParams::new(0.2, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn kernel_rows_and_ratio(eps in 0.01f64..8.0, d in 2usize..200) {
            let mech = DirectEncoding::from_epsilon(eps, d).unwrap();
            let (p, q) = (mech.p(), mech.q());
            prop_assert!((p + (d - 1) as f64 * q - 1.0).abs() < 1e-12);
            prop_assert!(((p / q) / eps.exp() - 1.0).abs() < 1e-12);
            let pp = mech.pure_params();
            let gap = pp.gap();
            prop_assert!(gap > 0.0);
            prop_assert!((gap - q * (eps.exp() - 1.0)).abs() < 1e-12);

            // Max likelihood ratio over kernel cells is e^ε.
            let small = d.min(6);
            let mut max_ratio: f64 = 0.0;
            for y in 0..small {
                for x in 0..small {
                    for x2 in 0..small {
                        let r = mech.kernel(dv(x), dv(y)) / mech.kernel(dv(x2), dv(y));
                        max_ratio = max_ratio.max(r);
                    }
                }
            }
            prop_assert!((max_ratio / eps.exp() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn perturb_stays_in_domain(eps in 0.01f64..6.0, d in 2usize..50, x in 0usize..50, seed: u64) {
            let x = x % d;
            let mech = DirectEncoding::from_epsilon(eps, d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                prop_assert!(mech.perturb(dv(x), &mut rng).unwrap().index() < d);
            }
        }
    }
}
