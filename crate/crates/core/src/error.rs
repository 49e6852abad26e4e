//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by model construction, conditioning and counterfactual queries.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("directed part of the diagram has a cycle through `{0}`")]
    Cycle(String),

    #[error("duplicate edge between `{a}` and `{b}`")]
    DuplicateEdge { a: String, b: String },

    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("coefficient on `{from}` -> `{to}` must be finite and nonzero")]
    InvalidCoefficient { from: String, to: String },

    #[error("error covariance between `{a}` and `{b}` must be finite")]
    InvalidErrorCovariance { a: String, b: String },

    #[error("vertex sets overlap on `{0}`")]
    OverlappingSets(String),

    #[error("no directed edge `{from}` -> `{to}`")]
    MissingEdge { from: String, to: String },

    #[error("response `{y}` is not a descendant of treatment `{x}`")]
    ResponseNotDescendant { x: String, y: String },

    #[error("plan covariate `{0}` is the treatment or one of its descendants")]
    PlanCovariateIsDescendant(String),

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ordered set does not match the descendant block of `{0}`")]
    PartitionMismatch(String),

    #[error("evidence covariance is singular and the observed values lie off its support (residual {0:.3e})")]
    SingularEvidenceCovariance(f64),

    #[error("box evidence carries probability mass below 1e-12")]
    ZeroMassBox,

    #[error("numeric target missed: achieved error {achieved:.3e} exceeds tolerance {tolerance:.3e} at the configured budget")]
    NumericalTargetMissed { achieved: f64, tolerance: f64 },

    #[error("regressor covariance is singular")]
    SingularRegressorCovariance,

    #[error("instrument has (conditionally) zero covariance with the treatment")]
    ZeroInstrumentCovariance,

    #[error("total effect of `{x}` on `{y}` is not identified from the observed variables")]
    Unidentified { x: String, y: String },

    #[error("treatment variance is zero; intervention moments are undefined")]
    DegenerateTreatment,

    #[error("computed variance {0:.3e} is negative beyond tolerance; inputs are inconsistent")]
    NegativeVarianceBeyondTolerance(f64),

    #[error("plan covariate covariance is singular")]
    SingularPlanCovariance,

    #[error("total effect is zero; no plan coefficient can influence the response through the treatment")]
    ZeroTotalEffect,

    #[error("optimal plan needs at least one covariate")]
    EmptyCovariateSet,

    #[error("variable `{0}` is not covered by the observed moments")]
    UnobservedVariable(String),

    #[error("rejection budget exceeded: acceptance rate {rate:.3e} is below 1/{ratio}")]
    RejectionBudgetExceeded { rate: f64, ratio: f64 },

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("structural coefficients are required for this query")]
    StructuralModelRequired,
}

pub type Result<T> = std::result::Result<T, Error>;
