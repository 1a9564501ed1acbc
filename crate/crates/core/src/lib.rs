//! Multi-objective flexible job shop scheduling with binary quadratic models.
//!
//! The pipeline: an [`instance::Instance`] is split into job subsets by
//! bottleneck scores ([`decompose`]), each subset is encoded as a pruned
//! [`qubo::Bqm`], minimized by one of the [`samplers`], decoded into a
//! [`schedule::Schedule`] and committed. Finished schedules are compared
//! through the [`pareto`] front metrics.

pub mod decompose;
pub mod instance;
pub mod pareto;
pub mod qubo;
pub mod samplers;
pub mod schedule;

#[cfg(test)]
pub(crate) mod testutil;

pub use instance::{parse_instance, Instance, Time};
pub use qubo::{Assignment, Bqm, LagrangeParams, VarKey};
