//! Exact and simulated access to the joint law of split-conformal p-values.
//!
//! With `n` calibration scores and `m` test scores that are exchangeable and
//! almost surely distinct, the vector of conformal p-values has a universal
//! distribution that does not depend on the score law: it is the colour
//! sequence of a Pólya urn with `n + 1` colours. This crate exposes
//!
//! * [`scores`]: p-values stored as integer ranks, their empirical
//!   distribution function and tie handling;
//! * [`polya`]: exact pmfs (rational or log-space) and two seeded samplers;
//! * [`bounds`]: the DKW-type tail bound for the p-value ecdf, its iterated
//!   threshold, the Monte-Carlo quantile and the Simes statistic;
//! * [`templates`]: linear and beta template envelopes calibrated by
//!   simulation;
//! * [`prediction`] and [`novelty`]: uniform false coverage / false
//!   discovery proportion bounds for transductive conformal procedures;
//! * [`oracle`]: brute-force enumeration used as ground truth in tests.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature fans
//! replicate loops out over rayon without changing any result: every
//! replicate draws from its own ChaCha stream, see [`rng`].
//!
//! ```
//! use conformal_urn::scores::{ScoreSet, conformal_pvalues};
//!
//! let scores = ScoreSet::new(vec![1.0, 2.0, 3.0], vec![2.5]).unwrap();
//! let pvals = conformal_pvalues(&scores).unwrap();
//! assert_eq!(pvals.ranks(), &[2]);
//! assert_eq!(pvals.pvalue(0), 0.5);
//! ```
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod bounds;
mod error;
pub mod grid;
pub mod novelty;
pub mod oracle;
pub mod polya;
pub mod prediction;
pub mod prob;
pub mod rng;
pub mod scores;
pub mod special;
pub mod templates;

pub use error::{Error, Result};
pub use polya::PolyaLaw;
pub use prob::Probability;
pub use scores::{EcdfStep, PValueSet, ScoreSet};
