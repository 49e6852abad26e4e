//! Counterfactual reasoning in linear Gaussian structural equation models.
//!
//! Given a path diagram with linear coefficients and Gaussian disturbances
//! (optionally correlated through bidirected edges), this crate evaluates the
//! mean and variance a response variable *would have had* under an
//! intervention or a conditional plan `X = x0 + aW`, given point observations
//! `R = r` or interval observations `r1 <= R <= r2` from the actual world.
//! It also solves for the variance-minimizing plan coefficients, ranks
//! candidate covariate sets, decides identifiability from observed subsets
//! (back-door and conditional-instrument criteria), and ships an independent
//! Monte Carlo twin-world simulator for end-to-end validation.
//!
//! Entry points:
//! - [`graph::PathDiagram`] — the causal diagram and its graphical queries.
//! - [`sem::LinearSem`] — structural coefficients plus disturbance moments.
//! - [`engine::Engine`] — counterfactual queries over a structural model or
//!   over a covariance matrix of observed variables.
//! - [`oracle`] — seeded simulation of the factual/counterfactual pair.

pub use nalgebra;

pub mod conditioning;
pub mod engine;
mod error;
pub mod fixtures;
pub mod graph;
pub mod identification;
mod moments;
pub mod oracle;
pub mod sem;

pub use conditioning::{BoxConfig, BoxConstraint, BoxMoments, Evidence, MomentMethod};
pub use engine::{
    CounterfactualResult, CovariateRanking, Engine, EngineConfig, Plan, RankOutcome,
};
pub use error::{Error, Result};
pub use graph::{PathDiagram, VertexPartition};
pub use identification::{IdentificationResult, TauRoute};
pub use moments::GaussianMoments;
pub use sem::LinearSem;
