//! Analytical models and a slot-level simulator for opportunistic ARQ
//! spectrum sharing between a primary and a secondary uplink user in the
//! finite blocklength regime.
//!
//! The crate is split along the pipeline:
//!
//! * [`fbl`] - finite-blocklength error probabilities: the Gaussian
//!   Q-function, channel dispersion, conditional error at a given SINR,
//!   Rayleigh-fading averages with and without interference, and power
//!   root-finding.
//! * [`arq`] - closed forms for the secondary user's ARQ process: outage
//!   recursion and bounds, transmission load, primary-user outage under
//!   successive interference cancellation, and the primary-user delay
//!   distribution.
//! * [`optimizer`] - access-probability policies and per-scheme transmit
//!   powers (open loop, non-opportunistic, equal access, optimal access via
//!   constrained grid search).
//! * [`sim`] - a seeded slot-level Monte Carlo simulator of the whole
//!   system plus an exhaustive small-M enumerator, used to cross-validate
//!   every closed form above.
//!
//! `no_std` compatible (with `alloc`); the companion CLI crate carries all
//! I/O.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod arq;
pub mod error;
pub mod fbl;
pub mod optimizer;
pub mod quad;
pub mod sim;

pub use arq::{
    delay_pmf, derive_schedule, pu_outage_overall, pu_outage_simultaneous, reach_probability,
    step_factor, su_outage, su_outage_bounds, transmission_load, AccessPolicy, DelayPmf,
    OutageProfile, Schedule, TrafficModel,
};
pub use error::{Constraint, Error, Result};
pub use fbl::{
    avg_error_direct, avg_error_interfered, conditional_error, dispersion, q_function,
    required_power, LinkConfig,
};
pub use optimizer::{
    equal_access, optimize_access, power_non_opportunistic, power_open_loop, power_opportunistic,
    scheme_powers, EqualAccess, NonOpportunistic, OptimizerConfig, SchemePowers,
};
pub use sim::{enumerate_exact, simulate, ExactStats, SimConfig, SimReport, SuArrivals};
