//! Solver library for spatial-temporal moving target defense.
//!
//! A defender protects a system by migrating between configurations and
//! choosing how long to stay in each one; attackers of several types pick
//! their best exploit against the announced strategy. The interaction is a
//! Markov Stackelberg game: the defender's problem is an average-cost
//! semi-Markov decision process whose per-state improvement step is an
//! exact bilevel (leader-follower) optimization.
//!
//! The crate provides:
//!
//! - [`model`] — game instances, validation, expected-overlap computation.
//! - [`attacker`] — best-response evaluation with leader-favoring ties.
//! - [`smdp`] — stage costs, the transformation to a discrete-time MDP,
//!   and exact policy evaluation.
//! - [`bilevel`] — the per-state Stackelberg subproblem, solved exactly by
//!   best-response-profile enumeration over linear programs.
//! - [`solver`] — value iteration and relative value iteration with
//!   span-seminorm stopping.
//! - [`baselines`] — uniform-random and Bayesian Stackelberg comparison
//!   policies, with and without temporal decisions.
//! - [`simulator`] — seeded Monte-Carlo replay of the interaction.
//! - [`nvd`] — building instances from CVSS-scored vulnerability records.
//! - [`io`] — instance, policy and result-row file formats.
//! - [`sweep`] — parameter sweeps across solvers.

pub mod attacker;
pub mod baselines;
pub mod bilevel;
pub mod io;
pub mod model;
pub mod nvd;
pub mod simplex;
pub mod simulator;
pub mod smdp;
pub mod solver;
pub mod sweep;
pub mod synthetic;

#[cfg(test)]
pub(crate) mod testutil;

use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An attack id was used with a type whose attack space does not contain it.
    #[error("attack `{attack}` is not in the attack space of type `{attacker_type}`")]
    AttackNotInSpace {
        attack: String,
        attacker_type: String,
    },
    /// An id referenced something the instance does not declare.
    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },
    /// A file did not match the documented schema.
    #[error("schema error: {0}")]
    Schema(String),
    /// A structured input record could not be interpreted.
    #[error("malformed record {index}: {message}")]
    MalformedRecord { index: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
