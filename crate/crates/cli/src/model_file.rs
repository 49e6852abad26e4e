//! JSON model files. Structural mode carries coefficients and disturbance
//! moments; observational mode carries the graph plus a covariance matrix of
//! observed variables (coefficients optional and ignored). Unknown keys are
//! rejected everywhere.

use serde::{Deserialize, Serialize};

use cfsem::nalgebra::{DMatrix, DVector};
use cfsem::{Engine, GaussianMoments, LinearSem, PathDiagram};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub mode: Mode,
    pub variables: Vec<String>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub error_cov: Vec<ErrorCovEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Structural,
    Observational,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coef: Option<f64>,
}

/// Either a bidirected-edge covariance `{u, v, cov}` or a per-variable
/// disturbance spec `{var, variance, mean?}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ErrorCovEntry {
    Pair(PairEntry),
    Variable(VariableEntry),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub u: String,
    pub v: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VariableEntry {
    pub var: String,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

/// Row-major covariance data under an explicit variable order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CovarianceBlock {
    pub order: Vec<String>,
    pub data: Vec<f64>,
}

/// A loaded model, ready to power an engine.
pub struct LoadedModel {
    pub file: ModelFile,
    pub diagram: PathDiagram,
    pub structural: Option<LinearSem>,
    pub moments: GaussianMoments,
}

impl LoadedModel {
    pub fn engine(&self) -> Result<Engine, cfsem::Error> {
        match &self.structural {
            Some(sem) => Ok(Engine::from_structural(sem.clone())),
            None => Engine::from_observational(self.diagram.clone(), self.moments.clone()),
        }
    }
}

pub fn parse(text: &str) -> Result<LoadedModel, String> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| format!("ParseError: {e}"))?;
    build(file)
}

pub fn build(file: ModelFile) -> Result<LoadedModel, String> {
    let observed = file
        .observed
        .clone()
        .or_else(|| file.covariance.as_ref().map(|c| c.order.clone()))
        .unwrap_or_else(|| file.variables.clone());

    let directed: Vec<(String, String, f64)> = file
        .edges
        .iter()
        .map(|e| {
            let coef = match file.mode {
                Mode::Structural => e.coef.ok_or_else(|| {
                    format!(
                        "ParseError: edge {} -> {} needs a coefficient in structural mode",
                        e.from, e.to
                    )
                })?,
                // observational queries use only the structure
                Mode::Observational => e.coef.unwrap_or(1.0),
            };
            Ok((e.from.clone(), e.to.clone(), coef))
        })
        .collect::<Result<_, String>>()?;

    let mut bidirected: Vec<(String, String, f64)> = Vec::new();
    let mut variances: Vec<(String, f64)> = Vec::new();
    let mut means: Vec<(String, f64)> = Vec::new();
    for entry in &file.error_cov {
        match entry {
            ErrorCovEntry::Pair(PairEntry { u, v, cov }) => {
                let c = match file.mode {
                    Mode::Structural => cov.ok_or_else(|| {
                        format!(
                            "ParseError: error covariance {u} <-> {v} needs `cov` in structural mode"
                        )
                    })?,
                    Mode::Observational => cov.unwrap_or(1.0),
                };
                bidirected.push((u.clone(), v.clone(), c));
            }
            ErrorCovEntry::Variable(VariableEntry { var, variance, mean }) => {
                variances.push((var.clone(), *variance));
                if let Some(m) = mean {
                    means.push((var.clone(), *m));
                }
            }
        }
    }

    let diagram =
        PathDiagram::from_parts(file.variables.clone(), directed, bidirected)
            .map_err(|e| render_model_error(&e))?;

    match file.mode {
        Mode::Structural => {
            let n = diagram.vertex_count();
            let mut var_vec = vec![1.0; n];
            let mut mean_vec = vec![0.0; n];
            for (name, v) in &variances {
                let i = diagram.index_of(name).map_err(|e| render_model_error(&e))?;
                var_vec[i] = *v;
            }
            for (name, m) in &means {
                let i = diagram.index_of(name).map_err(|e| render_model_error(&e))?;
                mean_vec[i] = *m;
            }
            let sem = LinearSem::with_disturbances(diagram.clone(), &var_vec, &mean_vec)
                .map_err(|e| render_model_error(&e))?;
            let moments = sem.implied_moments();
            let moments = if observed.len() == diagram.vertex_count() {
                moments
            } else {
                let refs: Vec<&str> = observed.iter().map(String::as_str).collect();
                moments
                    .marginal(&refs)
                    .map_err(|e| render_model_error(&e))?
            };
            Ok(LoadedModel {
                file,
                diagram,
                structural: Some(sem),
                moments,
            })
        }
        Mode::Observational => {
            let block = file
                .covariance
                .clone()
                .ok_or_else(|| "ParseError: observational mode needs `covariance`".to_string())?;
            let k = block.order.len();
            if block.data.len() != k * k {
                return Err(format!(
                    "ParseError: covariance data has {} entries for order of length {k}",
                    block.data.len()
                ));
            }
            let cov = DMatrix::from_row_slice(k, k, &block.data);
            let mean = match &file.mean {
                Some(m) if m.len() == k => DVector::from_column_slice(m),
                Some(m) => {
                    return Err(format!(
                        "ParseError: mean has {} entries for order of length {k}",
                        m.len()
                    ))
                }
                None => DVector::zeros(k),
            };
            let moments = GaussianMoments::new(block.order.clone(), mean, cov)
                .map_err(|e| render_model_error(&e))?;
            for v in &block.order {
                diagram.index_of(v).map_err(|e| render_model_error(&e))?;
            }
            if observed != block.order {
                return Err(
                    "ParseError: `observed` must match the covariance order".to_string()
                );
            }
            Ok(LoadedModel {
                file,
                diagram,
                structural: None,
                moments,
            })
        }
    }
}

/// Stable error-class tags; messages keep the library detail.
pub fn error_class(e: &cfsem::Error) -> &'static str {
    use cfsem::Error::*;
    match e {
        Cycle(_) => "CycleError",
        DuplicateEdge { .. } => "DuplicateEdge",
        DuplicateVertex(_) => "DuplicateVertex",
        UnknownVertex(_) => "UnknownVertex",
        InvalidCoefficient { .. } => "NonfiniteCoefficient",
        InvalidErrorCovariance { .. } => "InvalidErrorCovariance",
        OverlappingSets(_) => "OverlappingSets",
        MissingEdge { .. } => "MissingEdge",
        ResponseNotDescendant { .. } => "ResponseNotDescendant",
        PlanCovariateIsDescendant(_) => "PlanCovariateIsDescendant",
        NotPositiveSemidefinite(_) => "NotPositiveSemidefinite",
        DimensionMismatch(_) => "DimensionMismatch",
        PartitionMismatch(_) => "PartitionMismatch",
        SingularEvidenceCovariance(_) => "SingularEvidenceCovariance",
        ZeroMassBox => "ZeroMassBox",
        NumericalTargetMissed { .. } => "NumericalTargetMissed",
        SingularRegressorCovariance => "SingularRegressorCovariance",
        ZeroInstrumentCovariance => "ZeroInstrumentCovariance",
        Unidentified { .. } => "Unidentified",
        DegenerateTreatment => "DegenerateTreatment",
        NegativeVarianceBeyondTolerance(_) => "NegativeVarianceBeyondTolerance",
        SingularPlanCovariance => "SingularPlanCovariance",
        ZeroTotalEffect => "ZeroTotalEffect",
        EmptyCovariateSet => "EmptyCovariateSet",
        UnobservedVariable(_) => "UnobservedVariable",
        RejectionBudgetExceeded { .. } => "RejectionBudgetExceeded",
        InvalidEvidence(_) => "InvalidEvidence",
        InvalidPlan(_) => "InvalidPlan",
        StructuralModelRequired => "StructuralModelRequired",
        _ => "ModelError",
    }
}

pub fn render_model_error(e: &cfsem::Error) -> String {
    format!("{}: {e}", error_class(e))
}
