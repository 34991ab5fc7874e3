//! Cooperative cognitive-radio queueing: closed-form delay model, PU-delay
//! constrained SU policy optimization, and a slot-level simulator used to
//! validate the model.
//!
//! - [`model`]: rates, stability, queue lengths and delays for a policy.
//! - [`optimizer`]: line search over the PU service rate with a closed-form
//!   inner solution, plus the stability-only baseline.
//! - [`sim`]: seeded slot simulator producing empirical delays and throughput.
//! - [`experiments`]: parameter sweeps and their CSV format.

pub mod error;
pub mod experiments;
pub mod model;
pub mod optimizer;
pub mod sim;

pub use error::{Error, QueueId, Result};
pub use model::{DelaySpec, DerivedRates, NetworkParams, Policy, QueueMetrics, Stability};
pub use optimizer::{Objective, OptResult, Problem, SearchConfig, Status};
pub use sim::{SimConfig, SimReport};
