//! Group-testing active device discovery for clustered, energy-constrained
//! sensor networks.
//!
//! A network is a list of sensor clusters ([`model::NetworkConfig`]), each
//! with its own activity model and energy weight. The access point probes
//! groups of sensors chosen by a per-cluster Bernoulli design
//! ([`engine::generate_matrix`]), observes an energy/no-energy outcome per
//! probe, and recovers the active set with COMP ([`engine::comp_decode`]).
//! [`design`] picks the sampling probabilities, [`bounds`] evaluates the
//! analytic error bounds and [`montecarlo`] measures the real success rate.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod design;
pub mod engine;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod plot;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use model::{Activity, ActivityKind, ClusterSpec, NetworkConfig, PlanOrigin, SamplingPlan};
