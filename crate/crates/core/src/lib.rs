//! Frequency estimation over direct-encoding (k-RR) reports when nodes are randomly sampled.
//!
//! The crate is layered bottom-up:
//!
//! - [`ldp`]: the direct-encoding randomizer and its pure-protocol constants.
//! - [`sampling`]: datasets, sampling plans, and simulated rounds.
//! - [`estimators`]: the biased full-participation oracle and its debiased variants, plus
//!   closed-form approximate variances.
//! - [`synthdata`]: synthetic binomial and bimodal datasets.
//! - [`metrics`]: TV distance, communication cost, and the parallel trial harness.
//! - [`oracle`]: exact moments by enumeration for small instances.
//! - [`experiment`]: the `gen` / `run` / `sweep` / `oracle-check` commands behind the CLI.
//!
//! ```
//! use rand::SeedableRng;
//! use sampled_ldp::{estimators, ldp::{DirectEncoding, PureProtocol}, sampling};
//!
//! let data = sampling::Dataset::from_indices(&[0, 1, 1, 2, 2, 2], 3).unwrap();
//! let mech = DirectEncoding::from_epsilon(1.0, 3).unwrap();
//! let plan = sampling::SamplingPlan::uniform(0.5).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let round = sampling::run_round(&data, &mech, &plan, &mut rng).unwrap();
//! let counts = estimators::count_supports(&round, 3).unwrap();
//! let est = estimators::estimate_c_hat(&counts, &mech.pure_params(), 0.5).unwrap();
//! assert!((est.total() - round.sampled_count() as f64 / 0.5).abs() < 1e-9);
//! ```

#![forbid(unsafe_code)]

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod ldp;
pub mod metrics;
pub mod oracle;
pub mod sampling;
pub mod synthdata;

pub use error::{Error, Result};
