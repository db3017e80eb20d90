//! Simulation and scheduling of multi-edge-network bandwidth aggregation for
//! live-stream uploads.
//!
//! Broadcasters split their upload over several wireless links through a
//! proxy box; a cloud aggregation server recombines the subflows and forwards
//! one stream to the platform's origin server. This crate models the
//! bandwidth algebra of that setup ([`model`]), builds synthetic
//! geo-distributed scenarios ([`topology`]), matches boxes to servers under
//! capacity limits ([`scheduler`]), runs seeded epoch-by-epoch simulations
//! ([`sim`]) and aggregates the results ([`metrics`]).
//!
//! Bandwidth math is generic over [`Scalar`]; the aliases below fix it to
//! `f64` for simulation work or to [`BigRational`] where results must be
//! exact.

pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod scheduler;
pub mod sim;
pub mod topology;

pub use error::{Error, Result};
pub use num_rational::BigRational;
pub use scalar::Scalar;

/// Exact scalar.
pub type Exact = BigRational;

pub type GainEntry = model::GainEntry<f64>;
pub type ExactGainEntry = model::GainEntry<Exact>;
pub type RequestBatch = scheduler::RequestBatch<f64>;
pub type ExactRequestBatch = scheduler::RequestBatch<Exact>;
pub type AllocationPlan = scheduler::AllocationPlan<f64>;
pub type ExactAllocationPlan = scheduler::AllocationPlan<Exact>;
pub type Capacities = scheduler::Capacities<f64>;
pub type ExactCapacities = scheduler::Capacities<Exact>;
pub type ServerPool = scheduler::ServerPool<f64>;
pub type ExactServerPool = scheduler::ServerPool<Exact>;
pub type SimState = sim::SimState<f64>;
pub type ExactSimState = sim::SimState<Exact>;
pub type EpochRecord = sim::EpochRecord<f64>;
pub type ExactEpochRecord = sim::EpochRecord<Exact>;
