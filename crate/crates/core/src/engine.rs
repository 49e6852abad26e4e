//! Counterfactual queries: intervention moments, counterfactuals under point
//! and interval evidence, conditional plans, the variance-minimizing optimal
//! plan, and covariate-set ranking.
//!
//! Everything rests on one identity. A plan replaces the treatment equation
//! by `X = x0 + aW` while every disturbance keeps its factual value, so the
//! nondescendant block is unchanged (`W* = W`) and the descendant block moves
//! by the total effect of the treatment shift:
//!
//! ```text
//! S* = S + tau_sx (x0 + aW - X)
//! ```
//!
//! All counterfactual moments are therefore linear/quadratic forms in the
//! evidence-conditioned moments of the observed variables, evaluated without
//! ever dividing by a treatment variance (point-observed treatments have
//! none to divide by).

use nalgebra::{DMatrix, DVector};

use crate::conditioning::{
    condition_box_with_diagnostics, BoxConfig, ConditionDiagnostics, Evidence,
};
use crate::error::{Error, Result};
use crate::graph::PathDiagram;
use crate::identification::{identify, IdentificationResult, IdentifyOptions, TauRoute};
use crate::moments::{symmetrize, GaussianMoments};
use crate::sem::LinearSem;

/// A treatment assignment rule `x = x0 + a. W` over nondescendant covariates;
/// an empty (or all-zero) coefficient vector is an unconditional plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub x: String,
    pub x0: f64,
    pub covariates: Vec<String>,
    pub coefficients: Vec<f64>,
}

impl Plan {
    pub fn unconditional(x: &str, x0: f64) -> Self {
        Self {
            x: x.to_string(),
            x0,
            covariates: Vec::new(),
            coefficients: Vec::new(),
        }
    }

    pub fn conditional(x: &str, x0: f64, covariates: &[&str], coefficients: &[f64]) -> Self {
        Self {
            x: x.to_string(),
            x0,
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            coefficients: coefficients.to_vec(),
        }
    }

    pub fn is_unconditional(&self) -> bool {
        self.coefficients.iter().all(|&a| a == 0.0)
    }
}

/// Propagated numeric-error estimate attached to a counterfactual result;
/// zero when every step was closed-form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentError {
    pub mean: f64,
    pub var: f64,
}

/// Moments of the counterfactual block (response first), the scalar response
/// slice, the identification route that supplied the total effect, and the
/// residual cross-covariance with the plan covariates.
#[derive(Debug, Clone)]
pub struct CounterfactualResult {
    pub moments: GaussianMoments,
    pub y_mean: f64,
    pub y_var: f64,
    pub route: IdentificationResult,
    pub residual_cross_cov: Option<DMatrix<f64>>,
    pub moment_error: MomentError,
}

/// Outcome of ranking one candidate covariate set.
#[derive(Debug, Clone)]
pub struct CovariateRanking {
    pub covariates: Vec<String>,
    pub outcome: RankOutcome,
}

/// Candidates are ranked by the variance-reduction term of the optimal plan;
/// unusable candidates are kept with the reason they were skipped.
#[derive(Debug, Clone)]
pub enum RankOutcome {
    Ranked { score: f64 },
    Skipped { reason: Error },
}

/// Numeric knobs shared by all engine queries.
#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub box_config: BoxConfig,
    pub identify: IdentifyOptions,
}

/// Counterfactual evaluator over either a full structural model or a
/// covariance matrix of observed variables plus the diagram.
#[derive(Debug, Clone)]
pub struct Engine {
    diagram: PathDiagram,
    structural: Option<LinearSem>,
    moments: GaussianMoments,
    config: EngineConfig,
}

impl Engine {
    /// Engine over a full structural model; every variable is observed and
    /// total effects come from the coefficients.
    pub fn from_structural(sem: LinearSem) -> Self {
        let moments = sem.implied_moments();
        Self {
            diagram: sem.diagram().clone(),
            structural: Some(sem),
            moments,
            config: EngineConfig::default(),
        }
    }

    /// Engine over observed moments only; total effects are identified
    /// graphically (back-door, then conditional instrument) and estimated
    /// from the covariance matrix.
    pub fn from_observational(diagram: PathDiagram, moments: GaussianMoments) -> Result<Self> {
        for v in moments.variables() {
            diagram.index_of(v)?;
        }
        Ok(Self {
            diagram,
            structural: None,
            moments,
            config: EngineConfig::default(),
        })
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn diagram(&self) -> &PathDiagram {
        &self.diagram
    }

    pub fn structural(&self) -> Option<&LinearSem> {
        self.structural.as_ref()
    }

    /// Joint moments of the observed variables (implied moments in
    /// structural mode).
    pub fn observed_moments(&self) -> &GaussianMoments {
        &self.moments
    }

    /// Resolves the total-effect route for `(x, y)` without running a query.
    pub fn identify(&self, x: &str, y: &str) -> Result<IdentificationResult> {
        let observed: Vec<&str> = self.moments.variables().iter().map(String::as_str).collect();
        identify(
            &self.diagram,
            &observed,
            &self.moments,
            x,
            y,
            self.structural.as_ref(),
            &self.config.identify,
        )
    }

    /// Mean and variance of `y` under the fixed intervention `x := x0`.
    pub fn intervene(&self, x: &str, y: &str, x0: f64) -> Result<CounterfactualResult> {
        self.diagram.index_of(x)?;
        if self.moments.var_of(x)? <= 1e-12 {
            return Err(Error::DegenerateTreatment);
        }
        self.counterfactual_plan(&Evidence::empty(), &Plan::unconditional(x, x0), y)
    }

    /// Counterfactual moments of `y` under `x := x0` given the point
    /// observations in `evidence` from the actual world.
    pub fn counterfactual_point(
        &self,
        evidence: &Evidence,
        x: &str,
        y: &str,
        x0: f64,
    ) -> Result<CounterfactualResult> {
        evidence.validate()?;
        if !evidence.normalized().boxes().is_empty() {
            return Err(Error::InvalidEvidence(
                "point-observation query received interval evidence".into(),
            ));
        }
        self.counterfactual_plan(evidence, &Plan::unconditional(x, x0), y)
    }

    /// Counterfactual moments of `y` under the plan, given point and/or
    /// interval evidence from the actual world.
    pub fn counterfactual_plan(
        &self,
        evidence: &Evidence,
        plan: &Plan,
        y: &str,
    ) -> Result<CounterfactualResult> {
        let route = self.resolve_tau(&plan.x, y)?;
        let tau = self.require_tau(&route, &plan.x, y)?;
        self.validate_plan(plan)?;
        self.diagram.index_of(y)?;
        self.moments.index_of(y)?;
        let (cond, diag) = self.condition_observed(evidence)?;
        self.evaluate(
            &cond,
            &diag,
            plan,
            &[y.to_string()],
            &DVector::from_element(1, tau),
            route,
        )
    }

    /// Like [`Engine::counterfactual_plan`], but returns moments of the whole
    /// descendant block of the treatment (response first) together with its
    /// cross-covariance against the plan covariates. Needs structural
    /// coefficients for the vector of total effects.
    pub fn counterfactual_plan_block(
        &self,
        evidence: &Evidence,
        plan: &Plan,
        y: &str,
    ) -> Result<CounterfactualResult> {
        let sem = self
            .structural
            .as_ref()
            .ok_or(Error::StructuralModelRequired)?;
        let part = self.diagram.partition(
            &plan.x,
            y,
            &plan.covariates.iter().map(String::as_str).collect::<Vec<_>>(),
        )?;
        let s_refs: Vec<&str> = part.s.iter().map(String::as_str).collect();
        let taus = sem.total_effect(&plan.x, &s_refs)?;
        self.validate_plan(plan)?;
        let route = IdentificationResult {
            route: TauRoute::Structural,
            tau: Some(taus[0]),
        };
        let (cond, diag) = self.condition_observed(evidence)?;
        self.evaluate(&cond, &diag, plan, &part.s, &taus, route)
    }

    /// Solves for the plan coefficients that minimize the counterfactual
    /// variance of `y` over covariates `w`, and evaluates the plan.
    pub fn optimal_plan(
        &self,
        evidence: &Evidence,
        w: &[&str],
        x: &str,
        y: &str,
        x0: f64,
    ) -> Result<(Plan, CounterfactualResult)> {
        if w.is_empty() {
            return Err(Error::EmptyCovariateSet);
        }
        let route = self.resolve_tau(x, y)?;
        let tau = self.require_tau(&route, x, y)?;
        if tau.abs() < 1e-12 {
            return Err(Error::ZeroTotalEffect);
        }
        let probe = Plan::conditional(x, x0, w, &vec![0.0; w.len()]);
        self.validate_plan(&probe)?;
        self.diagram.index_of(y)?;
        self.moments.index_of(y)?;
        let (cond, diag) = self.condition_observed(evidence)?;

        let coeffs = optimal_coefficients(&cond, x, y, w, tau)?;
        let plan = Plan::conditional(x, x0, w, &coeffs);
        let result = self.evaluate(
            &cond,
            &diag,
            &plan,
            &[y.to_string()],
            &DVector::from_element(1, tau),
            route,
        )?;
        Ok((plan, result))
    }

    /// Scores candidate covariate sets by the variance-reduction term their
    /// optimal plan achieves; larger scores rank first, with ties and skipped
    /// candidates keeping their submission order.
    pub fn rank_covariate_sets(
        &self,
        evidence: &Evidence,
        candidates: &[Vec<String>],
        x: &str,
        y: &str,
    ) -> Result<Vec<CovariateRanking>> {
        let route = self.resolve_tau(x, y)?;
        let tau = self.require_tau(&route, x, y)?;
        self.diagram.index_of(y)?;
        let (cond, _) = self.condition_observed(evidence)?;

        let mut ranked: Vec<(usize, CovariateRanking)> = Vec::new();
        let mut skipped: Vec<(usize, CovariateRanking)> = Vec::new();
        for (pos, cand) in candidates.iter().enumerate() {
            let refs: Vec<&str> = cand.iter().map(String::as_str).collect();
            let outcome = self.score_candidate(&cond, x, y, &refs, tau);
            let entry = CovariateRanking {
                covariates: cand.clone(),
                outcome: match outcome {
                    Ok(score) => RankOutcome::Ranked { score },
                    Err(reason) => RankOutcome::Skipped { reason },
                },
            };
            match entry.outcome {
                RankOutcome::Ranked { .. } => ranked.push((pos, entry)),
                RankOutcome::Skipped { .. } => skipped.push((pos, entry)),
            }
        }
        ranked.sort_by(|a, b| {
            let sa = match a.1.outcome {
                RankOutcome::Ranked { score } => score,
                _ => unreachable!(),
            };
            let sb = match b.1.outcome {
                RankOutcome::Ranked { score } => score,
                _ => unreachable!(),
            };
            sb.total_cmp(&sa).then(a.0.cmp(&b.0))
        });
        Ok(ranked
            .into_iter()
            .chain(skipped)
            .map(|(_, e)| e)
            .collect())
    }

    fn score_candidate(
        &self,
        cond: &GaussianMoments,
        x: &str,
        y: &str,
        w: &[&str],
        tau: f64,
    ) -> Result<f64> {
        let desc = self
            .diagram
            .descendant_mask(self.diagram.index_of(x)?);
        for v in w {
            let vi = self.diagram.index_of(v)?;
            if desc[vi] || vi == self.diagram.index_of(x)? {
                return Err(Error::PlanCovariateIsDescendant(v.to_string()));
            }
            self.moments.index_of(v)?;
        }
        if w.is_empty() {
            return Ok(0.0);
        }
        let (sww, q) = plan_blocks(cond, x, y, w, tau)?;
        let inv = invert_plan_cov(&sww)?;
        Ok((&q.transpose() * &inv * &q)[(0, 0)])
    }

    fn resolve_tau(&self, x: &str, y: &str) -> Result<IdentificationResult> {
        self.diagram.index_of(x)?;
        self.diagram.index_of(y)?;
        if x == y {
            return Err(Error::InvalidPlan(
                "treatment and response coincide".into(),
            ));
        }
        self.identify(x, y)
    }

    fn require_tau(&self, route: &IdentificationResult, x: &str, y: &str) -> Result<f64> {
        route.tau.ok_or_else(|| Error::Unidentified {
            x: x.to_string(),
            y: y.to_string(),
        })
    }

    fn validate_plan(&self, plan: &Plan) -> Result<()> {
        let xi = self.diagram.index_of(&plan.x)?;
        self.moments.index_of(&plan.x)?;
        if plan.coefficients.len() != plan.covariates.len() {
            return Err(Error::InvalidPlan(format!(
                "{} covariates with {} coefficients",
                plan.covariates.len(),
                plan.coefficients.len()
            )));
        }
        if !plan.x0.is_finite() || plan.coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidPlan("plan constants must be finite".into()));
        }
        let desc = self.diagram.descendant_mask(xi);
        let mut seen: Vec<&str> = Vec::new();
        for v in &plan.covariates {
            let vi = self.diagram.index_of(v)?;
            if vi == xi || desc[vi] {
                return Err(Error::PlanCovariateIsDescendant(v.clone()));
            }
            if seen.contains(&v.as_str()) {
                return Err(Error::InvalidPlan(format!("covariate `{v}` repeated")));
            }
            seen.push(v);
            self.moments.index_of(v)?;
        }
        Ok(())
    }

    fn condition_observed(
        &self,
        evidence: &Evidence,
    ) -> Result<(GaussianMoments, ConditionDiagnostics)> {
        for v in evidence.variables() {
            self.diagram.index_of(v)?;
            self.moments.index_of(v)?;
        }
        condition_box_with_diagnostics(&self.moments, evidence, &self.config.box_config)
    }

    /// Applies `S* = S + tau (x0 + aW - X)` to the conditioned moments.
    fn evaluate(
        &self,
        cond: &GaussianMoments,
        diag: &ConditionDiagnostics,
        plan: &Plan,
        scope: &[String],
        taus: &DVector<f64>,
        route: IdentificationResult,
    ) -> Result<CounterfactualResult> {
        let n = cond.len();
        let k = scope.len();
        let xi = cond.index_of(&plan.x)?;
        let w_idx: Vec<usize> = plan
            .covariates
            .iter()
            .map(|v| cond.index_of(v))
            .collect::<Result<_>>()?;

        let mut c = DMatrix::zeros(k, n);
        for (r, s) in scope.iter().enumerate() {
            let si = cond.index_of(s)?;
            c[(r, si)] += 1.0;
            c[(r, xi)] -= taus[r];
            for (j, &wi) in w_idx.iter().enumerate() {
                c[(r, wi)] += taus[r] * plan.coefficients[j];
            }
        }

        let mean = &c * cond.mean() + taus * plan.x0;
        let cs = &c * cond.cov();
        let mut cov = &cs * c.transpose();
        symmetrize(&mut cov);
        for i in 0..k {
            let v = cov[(i, i)];
            if v < -1e-9 {
                return Err(Error::NegativeVarianceBeyondTolerance(v));
            }
            if v < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        let residual_cross_cov = if w_idx.is_empty() {
            None
        } else {
            Some(DMatrix::from_fn(k, w_idx.len(), |i, j| cs[(i, w_idx[j])]))
        };

        let row_abs: f64 = (0..n).map(|j| c[(0, j)].abs()).sum();
        let moment_error = MomentError {
            mean: row_abs * diag.mean_error,
            var: row_abs * row_abs * diag.cov_error,
        };

        Ok(CounterfactualResult {
            y_mean: mean[0],
            y_var: cov[(0, 0)],
            moments: GaussianMoments::new_unchecked(scope.to_vec(), mean, cov),
            route,
            residual_cross_cov,
            moment_error,
        })
    }
}

/// `Sigma_ww.[r]` and `q = Sigma_wy.[r] - tau Sigma_wx.[r]` for a plan solve.
fn plan_blocks(
    cond: &GaussianMoments,
    x: &str,
    y: &str,
    w: &[&str],
    tau: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let k = w.len();
    let w_idx: Vec<usize> = w
        .iter()
        .map(|v| cond.index_of(v))
        .collect::<Result<_>>()?;
    let xi = cond.index_of(x)?;
    let yi = cond.index_of(y)?;
    let sww = DMatrix::from_fn(k, k, |i, j| cond.cov()[(w_idx[i], w_idx[j])]);
    let q = DVector::from_fn(k, |i, _| {
        cond.cov()[(w_idx[i], yi)] - tau * cond.cov()[(w_idx[i], xi)]
    });
    Ok((sww, q))
}

fn invert_plan_cov(sww: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = (0..sww.nrows()).fold(0.0f64, |a, i| a.max(sww[(i, i)].abs()));
    let pinv = crate::moments::SymPseudoInverse::new(sww);
    if !pinv.is_invertible() || scale <= 1e-12 {
        return Err(Error::SingularPlanCovariance);
    }
    Ok(pinv.inv)
}

/// Coefficients of the variance-minimizing plan: the response row of the
/// zero condition, `a = (tau Sigma_xw - Sigma_yw) Sigma_ww^{-1} / tau`.
fn optimal_coefficients(
    cond: &GaussianMoments,
    x: &str,
    y: &str,
    w: &[&str],
    tau: f64,
) -> Result<Vec<f64>> {
    let (sww, q) = plan_blocks(cond, x, y, w, tau)?;
    let inv = invert_plan_cov(&sww)?;
    let a = -(&inv * &q) / tau;
    Ok(a.iter().copied().collect())
}
