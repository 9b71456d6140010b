//! Placement of service function chain instances onto a pool of servers
//! hanging off a shared switch fabric.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`sfc`] merges chain requests into an NF-level DAG, expands it to
//!    instance granularity, and sparsifies the inter-instance traffic matrix.
//! 2. [`fm`] places instances with a greedy first phase and then improves the
//!    placement with Fiduccia-Mattheyses style move passes; [`baselines`]
//!    provides a first-fit heuristic and an exhaustive optimum for small
//!    instances.
//! 3. [`fabric`] replays the placed flows on a slot-based input-queued
//!    crossbar to estimate delivered throughput and delay.
//!
//! [`workload`] generates reproducible random problem instances and handles
//! instance (de)serialization; [`placement`] holds the shared placement state
//! and feasibility predicates used by every solver.

pub mod baselines;
pub mod fabric;
pub mod fm;
pub mod placement;
pub mod sfc;
pub mod workload;

/// Absolute slack for capacity and bandwidth comparisons. Demands and traffic
/// are drawn as integers, so any real violation overshoots by at least 1.
pub(crate) const FEAS_EPS: f64 = 1e-9;
