//! Lower and upper bounds on the perfect secrecy rate of parallel Gaussian
//! relay-eavesdropper channels.
//!
//! The crate is organised around the data path of an experiment:
//!
//! * [`channel`] holds the subchannel description, node geometry and the
//!   distance-dependent Rayleigh fading sampler.
//! * [`rates`] evaluates every closed-form bound at a fixed allocation.
//! * [`optimizer`] maximizes those bounds under sum-power budgets and ships a
//!   brute-force grid maximizer used to validate it.
//! * [`modes`] chooses decode-and-forward (DF) or noise-forwarding (NF) per
//!   subchannel.
//! * [`dm`] is a finite-alphabet evaluator of the underlying mutual
//!   information expressions, used as an independent oracle.
//! * [`experiment`] drives the command-line studies and owns the config and
//!   output formats.

pub mod channel;
pub mod dm;
mod error;
pub mod experiment;
pub mod modes;
pub mod optimizer;
pub mod rates;

pub use channel::{FadingState, Geometry, PowerBudget, SubchannelParams};
pub use error::{Error, Result};
pub use optimizer::{OptimizerConfig, Solution};
pub use rates::{Allocation, Mode, ModePartition, RateBounds};
