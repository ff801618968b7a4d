//! Differentially private set union (DPSU) and n-gram extraction (DPNE).
//!
//! The crate provides, end to end:
//!
//! - exact Gaussian-mechanism calibration and uniform multi-level composition
//!   ([`calibration`]);
//! - weighted histograms with bounded L2 sensitivity, the two descent update
//!   policies, and a contractivity prober ([`histogram`]);
//! - the Policy Gaussian set-union mechanism, the replayed update-policy
//!   counterexample, and the spillover-surcharge tables ([`dpsu`]);
//! - frequency-pruned, heterogeneously thresholded n-gram extraction with an
//!   exact sparse implementation of the dense reference mechanism ([`dpne`]);
//! - a one-run empirical privacy audit with canaries ([`audit`]);
//! - synthetic corpus generators and corpus/report serialization ([`data`]).
//!
//! Everything is deterministic given a seed; see the `dpgram` binary for the
//! command-line surface.

pub mod audit;
pub mod calibration;
pub mod data;
pub mod dpne;
pub mod dpsu;
pub mod error;
pub mod histogram;
pub mod normal;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
