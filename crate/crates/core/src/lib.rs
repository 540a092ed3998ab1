//! Half-duplex two-relay MIMO Gaussian diamond channel: the MDF-MAC
//! achievable rate, cut-set upper bounds and a certified constant gap.
//!
//! All rates are in bits per real channel use with unit noise and unit
//! per-node power.

pub mod analysis;
pub mod bounds;
pub mod capacity;
pub mod channel;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod verify;

pub use analysis::{analyze, Analysis};
pub use bounds::{gap_report, GapReport};
pub use channel::{derive_params, random_diamond, DiamondChannel, DiamondParams};
pub use error::{Error, Result};
pub use linalg::{Matrix, PsdMatrix};
pub use protocol::{achievable_rate, AchievabilityReport, Branch, GammaForm};
pub use ensemble::{run_ensemble, EnsembleConfig, EnsembleSummary};
pub use verify::{run_suite, Suite, SuiteReport};
