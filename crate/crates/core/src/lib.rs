//! Exact simulation and auditing of cohort-selection pipelines.
//!
//! A pipeline selects a cohort (a subset of a fixed universe of individuals)
//! with some randomized mechanism and then scores the selected individuals in
//! the context of their cohort. This crate provides:
//!
//! * exact probability arithmetic over cohort distributions ([`core`]),
//! * the four pipeline distance measures, including the mass-moving distance
//!   computed exactly via its coupling characterization ([`distances`]),
//! * policy distances over (cohort, individual) pairs, per-pair cluster
//!   mappings and the two total-variation closeness conditions ([`policies`]),
//! * five cohort-selection mechanisms as exact laws and seeded samplers
//!   ([`mechanisms`]),
//! * intra-cohort fair scoring policies and adversarial witness constructors
//!   ([`scoring`]),
//! * end-to-end robustness audits and canned counterexample scenarios
//!   ([`audit`]),
//! * a JSON scenario document model shared with the command-line front end
//!   ([`scenario`]).
//!
//! All mechanism laws and distances are computed with exact rational
//! arithmetic; floating point appears only in seeded Monte Carlo estimation.

pub mod audit;
#[allow(clippy::module_inception)]
pub mod core;
pub mod distances;
pub mod mechanisms;
pub mod policies;
pub mod scenario;
pub mod scoring;
pub mod simplex;

pub mod rational;

pub use crate::core::{
    Cohort, CohortDistribution, CohortSet, QualityProfile, QualityStructure, UniverseSpec,
};
pub use crate::rational::{q, qf, qi, Q};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("quality structure required but not present")]
    MissingQualityStructure,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("conditional distribution undefined for never-selected individual {0}")]
    NeverSelected(String),
    #[error("linear program infeasible; irreducible constraint subset: {0:?}")]
    LpInfeasible(Vec<String>),
    #[error("linear program unbounded")]
    LpUnbounded,
    #[error("not ({alpha}, {beta})-clusterable: witness pair {witness}")]
    NotClusterable {
        alpha: String,
        beta: String,
        witness: String,
    },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },
    #[error("sampler exceeded {0} rounds without success")]
    SamplerExhausted(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
