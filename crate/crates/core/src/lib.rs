//! Distributed generalized Nash equilibrium seeking over time-varying
//! proximity graphs, with a clinical player model for resuscitation teams.
//!
//! Modules:
//! - [`game`]: player profiles, neighbor-averaged quadratic costs, threshold
//!   constraints and KKT certification.
//! - [`clinical`]: second-order transient response, fairness and
//!   communication metrics, synthetic ALS episodes.
//! - [`network`]: proximity graphs, Laplacians, seeded drift.
//! - [`solver`]: projected primal-dual dynamics with sign consensus.
//! - [`oracle`]: centralized extragradient solver and brute-force checker.

// `!(v > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clinical;
pub mod error;
pub mod game;
pub mod network;
pub mod oracle;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use game::{
    ActionBox, ActionProfile, ConstraintSpec, DecisionVector, Game, Interval, KktReport,
    PlayerProfile, SharedConstraint, Topology,
};
pub use network::{Position, ProximityGraph};
pub use scenario::{build_scenario, Scenario, ScenarioParams};
pub use solver::{RunConfig, RunOutput, SignumMode, SolverGains, SolverState};
