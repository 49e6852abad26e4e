//! Conditioning of Gaussian moments on point evidence (exact) and axis-aligned
//! interval evidence (exact first/second moments of the truncated law), plus
//! regression-coefficient extraction.

mod quadrature;
mod truncated;

pub use truncated::{box_moments, box_moments_qmc, box_moments_quadrature};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::moments::{symmetrize, GaussianMoments, SymPseudoInverse};

/// An interval constraint `lower <= variable <= upper`; either bound may be
/// infinite, and `lower == upper` degenerates to a point observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    pub variable: String,
    pub lower: f64,
    pub upper: f64,
}

/// Point assignments and interval constraints over disjoint variable sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evidence {
    points: Vec<(String, f64)>,
    boxes: Vec<BoxConstraint>,
}

impl Evidence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(points: Vec<(String, f64)>, boxes: Vec<BoxConstraint>) -> Result<Self> {
        let e = Self { points, boxes };
        e.validate()?;
        Ok(e)
    }

    /// Adds a point observation `variable = value`.
    pub fn and_point(mut self, variable: &str, value: f64) -> Self {
        self.points.push((variable.to_string(), value));
        self
    }

    /// Adds an interval observation `lower <= variable <= upper`.
    pub fn and_box(mut self, variable: &str, lower: f64, upper: f64) -> Self {
        self.boxes.push(BoxConstraint {
            variable: variable.to_string(),
            lower,
            upper,
        });
        self
    }

    pub fn points(&self) -> &[(String, f64)] {
        &self.points
    }

    pub fn boxes(&self) -> &[BoxConstraint] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.boxes.is_empty()
    }

    /// All variables referenced by the evidence.
    pub fn variables(&self) -> Vec<&str> {
        self.points
            .iter()
            .map(|(v, _)| v.as_str())
            .chain(self.boxes.iter().map(|b| b.variable.as_str()))
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for (v, x) in &self.points {
            if !x.is_finite() {
                return Err(Error::InvalidEvidence(format!(
                    "point value for `{v}` is not finite"
                )));
            }
            if seen.contains(&v.as_str()) {
                return Err(Error::InvalidEvidence(format!(
                    "variable `{v}` appears twice"
                )));
            }
            seen.push(v);
        }
        for b in &self.boxes {
            if seen.contains(&b.variable.as_str()) {
                return Err(Error::InvalidEvidence(format!(
                    "variable `{}` appears twice",
                    b.variable
                )));
            }
            seen.push(&b.variable);
            if b.lower.is_nan() || b.upper.is_nan() {
                return Err(Error::InvalidEvidence(format!(
                    "bounds for `{}` contain NaN",
                    b.variable
                )));
            }
            if b.lower > b.upper {
                return Err(Error::InvalidEvidence(format!(
                    "empty interval for `{}`: {} > {}",
                    b.variable, b.lower, b.upper
                )));
            }
            if b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(Error::InvalidEvidence(format!(
                    "interval for `{}` is unbounded in the wrong direction",
                    b.variable
                )));
            }
        }
        Ok(())
    }

    /// Degenerate boxes (`lower == upper`) become point observations.
    pub(crate) fn normalized(&self) -> Evidence {
        let mut points = self.points.clone();
        let mut boxes = Vec::new();
        for b in &self.boxes {
            if b.lower == b.upper {
                points.push((b.variable.clone(), b.lower));
            } else {
                boxes.push(b.clone());
            }
        }
        Evidence { points, boxes }
    }
}

/// Numeric configuration for truncated-moment evaluation.
#[derive(Debug, Clone)]
pub struct BoxConfig {
    /// Absolute error target for adaptive quadrature (dimensions 2-3).
    pub quad_tol: f64,
    /// Evaluation budget per quadrature pass.
    pub quad_budget: usize,
    /// Total quasi-Monte Carlo draws (dimension >= 4).
    pub mc_draws: usize,
    /// Number of randomized shifts the draws are split across.
    pub mc_shifts: usize,
    /// Seed for the randomized shifts.
    pub seed: u64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-8,
            quad_budget: 400_000,
            mc_draws: 200_000,
            mc_shifts: 10,
            seed: 0x5eed_cf5e,
        }
    }
}

/// How a set of truncated moments was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    ClosedForm,
    Quadrature,
    QuasiMonteCarlo,
}

/// Mean, covariance and probability mass of a Gaussian restricted to a box,
/// with per-entry error estimates (bounds for deterministic methods, standard
/// errors for the quasi-Monte Carlo path).
#[derive(Debug, Clone)]
pub struct BoxMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mass: f64,
    pub mean_error: DVector<f64>,
    pub cov_error: DMatrix<f64>,
    pub method: MomentMethod,
}

/// Diagnostics describing the numeric quality of a conditioning pass.
#[derive(Debug, Clone)]
pub struct ConditionDiagnostics {
    /// Probability mass of the box evidence (1 when no boxes).
    pub mass: f64,
    /// Max-entry absolute error (or SE) on the conditioned mean.
    pub mean_error: f64,
    /// Max-entry absolute error (or SE) on the conditioned covariance.
    pub cov_error: f64,
    pub method: Option<MomentMethod>,
}

impl ConditionDiagnostics {
    fn exact() -> Self {
        Self {
            mass: 1.0,
            mean_error: 0.0,
            cov_error: 0.0,
            method: None,
        }
    }
}

/// Exact Gaussian conditioning on point assignments. Conditioned variables
/// stay in the variable list with their observed values and zero variance.
///
/// A rank-deficient evidence covariance is handled by projecting onto its
/// support; observations off the support by more than `1e-8` (scaled) raise
/// [`Error::SingularEvidenceCovariance`].
pub fn condition_point(
    moments: &GaussianMoments,
    assignments: &[(String, f64)],
) -> Result<GaussianMoments> {
    if assignments.is_empty() {
        return Ok(moments.clone());
    }
    let names: Vec<&str> = assignments.iter().map(|(v, _)| v.as_str()).collect();
    let r_idx = moments.indices(&names)?;
    let n = moments.len();
    let k = r_idx.len();

    let sigma_rr = DMatrix::from_fn(k, k, |i, j| moments.cov()[(r_idx[i], r_idx[j])]);
    let d = DVector::from_fn(k, |i, _| assignments[i].1 - moments.mean()[r_idx[i]]);

    let pinv = SymPseudoInverse::new(&sigma_rr);
    if !pinv.is_invertible() {
        let scale = (0..k).fold(1.0f64, |a, i| a.max(sigma_rr[(i, i)].abs())).sqrt();
        let off = pinv.off_support_norm(&d);
        if off > 1e-8 * scale.max(1.0) * d.norm().max(1.0) {
            return Err(Error::SingularEvidenceCovariance(off));
        }
    }

    // Sigma_{.r} as an n x k block
    let cross = DMatrix::from_fn(n, k, |i, j| moments.cov()[(i, r_idx[j])]);
    let gain = &cross * &pinv.inv;
    let mut mean = moments.mean() + &gain * &d;
    let mut cov = moments.cov() - &gain * cross.transpose();
    symmetrize(&mut cov);
    for (slot, &ri) in r_idx.iter().enumerate() {
        mean[ri] = assignments[slot].1;
        for j in 0..n {
            cov[(ri, j)] = 0.0;
            cov[(j, ri)] = 0.0;
        }
    }
    for i in 0..n {
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }
    Ok(GaussianMoments::new_unchecked(
        moments.variables().to_vec(),
        mean,
        cov,
    ))
}

/// Conditions on full evidence: exact point conditioning first, then exact
/// propagation of the box-truncated moments of the interval variables to all
/// variables via `E[V|box] = mu + B (E[R|box] - mu_R)` and
/// `Cov(V|box) = Sigma_{VV.R} + B Cov(R|box) B'`.
pub fn condition_box(
    moments: &GaussianMoments,
    evidence: &Evidence,
    cfg: &BoxConfig,
) -> Result<GaussianMoments> {
    condition_box_with_diagnostics(moments, evidence, cfg).map(|(m, _)| m)
}

/// [`condition_box`] plus numeric diagnostics for downstream error tracking.
pub fn condition_box_with_diagnostics(
    moments: &GaussianMoments,
    evidence: &Evidence,
    cfg: &BoxConfig,
) -> Result<(GaussianMoments, ConditionDiagnostics)> {
    evidence.validate()?;
    let evidence = evidence.normalized();
    let base = condition_point(moments, evidence.points())?;
    if evidence.boxes().is_empty() {
        return Ok((base, ConditionDiagnostics::exact()));
    }

    let n = base.len();
    // Interval variables that still carry variance; deterministic ones only
    // need a membership check.
    let mut active: Vec<(usize, f64, f64)> = Vec::new();
    let scale = (0..n).fold(0.0f64, |a, i| a.max(base.cov()[(i, i)]));
    for b in evidence.boxes() {
        let i = base.index_of(&b.variable)?;
        let var = base.cov()[(i, i)];
        if var <= 1e-12 * scale.max(1.0) {
            let v = base.mean()[i];
            let tol = 1e-9 * scale.max(1.0).sqrt();
            if v < b.lower - tol || v > b.upper + tol {
                return Err(Error::ZeroMassBox);
            }
        } else {
            active.push((i, b.lower, b.upper));
        }
    }
    if active.is_empty() {
        return Ok((base, ConditionDiagnostics::exact()));
    }

    let r_idx: Vec<usize> = active.iter().map(|&(i, _, _)| i).collect();
    let bounds: Vec<(f64, f64)> = active.iter().map(|&(_, lo, hi)| (lo, hi)).collect();
    let r_names: Vec<&str> = r_idx.iter().map(|&i| base.variables()[i].as_str()).collect();
    let marginal = base.marginal(&r_names)?;
    let bm = box_moments(&marginal, &bounds, cfg)?;

    let k = r_idx.len();
    let sigma_rr = DMatrix::from_fn(k, k, |i, j| base.cov()[(r_idx[i], r_idx[j])]);
    let cross = DMatrix::from_fn(n, k, |i, j| base.cov()[(i, r_idx[j])]);
    let pinv = SymPseudoInverse::new(&sigma_rr);
    let gain = &cross * &pinv.inv;

    let shift = &bm.mean - DVector::from_fn(k, |i, _| base.mean()[r_idx[i]]);
    let mean = base.mean() + &gain * shift;
    // Sigma_{VV.R} + B Cov(R|box) B'
    let mut cov = base.cov() - &gain * cross.transpose() + &gain * &bm.cov * gain.transpose();
    symmetrize(&mut cov);
    for i in 0..n {
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }

    // propagate max-entry error bounds through the gain matrix
    let gain_row_norm = (0..n).fold(0.0f64, |a, i| {
        a.max((0..k).map(|j| gain[(i, j)].abs()).sum())
    });
    let be_mean = bm.mean_error.iter().fold(0.0f64, |a, &b| a.max(b));
    let be_cov = bm.cov_error.iter().fold(0.0f64, |a, &b| a.max(b));
    let diag = ConditionDiagnostics {
        mass: bm.mass,
        mean_error: gain_row_norm * be_mean,
        cov_error: gain_row_norm * gain_row_norm * be_cov,
        method: Some(bm.method),
    };
    Ok((
        GaussianMoments::new_unchecked(base.variables().to_vec(), mean, cov),
        diag,
    ))
}

/// Full conditioning entry point used across the crate.
pub fn condition(
    moments: &GaussianMoments,
    evidence: &Evidence,
    cfg: &BoxConfig,
) -> Result<GaussianMoments> {
    condition_box(moments, evidence, cfg)
}

/// Regression coefficient matrix `B_{targets, regressors . given} =
/// Sigma_tr.g Sigma_rr.g^{-1}`.
pub fn regression_coeffs(
    moments: &GaussianMoments,
    targets: &[&str],
    regressors: &[&str],
    given: &[&str],
) -> Result<DMatrix<f64>> {
    let t_idx = moments.indices(targets)?;
    let r_idx = moments.indices(regressors)?;
    let g_idx = moments.indices(given)?;
    for (i, ti) in t_idx.iter().enumerate() {
        if r_idx.contains(ti) || g_idx.contains(ti) {
            return Err(Error::OverlappingSets(targets[i].to_string()));
        }
    }
    for (i, ri) in r_idx.iter().enumerate() {
        if g_idx.contains(ri) {
            return Err(Error::OverlappingSets(regressors[i].to_string()));
        }
    }

    let cond = if g_idx.is_empty() {
        moments.clone()
    } else {
        // condition numerically on zero-residual observations: the Schur
        // complement is all regression_coeffs needs
        let assignments: Vec<(String, f64)> = g_idx
            .iter()
            .map(|&i| (moments.variables()[i].clone(), moments.mean()[i]))
            .collect();
        condition_point(moments, &assignments)?
    };

    let k = r_idx.len();
    let sigma_rr = DMatrix::from_fn(k, k, |i, j| cond.cov()[(r_idx[i], r_idx[j])]);
    let scale = (0..k).fold(1.0f64, |a, i| a.max(sigma_rr[(i, i)].abs()));
    let pinv = SymPseudoInverse::new(&sigma_rr);
    if !pinv.is_invertible() || scale <= 0.0 {
        return Err(Error::SingularRegressorCovariance);
    }
    let cross = DMatrix::from_fn(t_idx.len(), k, |i, j| cond.cov()[(t_idx[i], r_idx[j])]);
    Ok(&cross * &pinv.inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn m2_moments() -> GaussianMoments {
        fixtures::m2().implied_moments()
    }

    #[test]
    fn point_conditioning_matches_hand_algebra() {
        let m = m2_moments();
        let c = condition_point(&m, &[("X".into(), 1.0)]).unwrap();
        // Z | X=1 ~ N(0.5, 0.5)
        assert_abs_diff_eq!(c.mean_of("Z").unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.var_of("Z").unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mean_of("X").unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.var_of("X").unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn conditioning_on_independent_variable_changes_nothing() {
        let g = crate::graph::PathDiagram::builder(["A", "B"]).build().unwrap();
        let sem = crate::sem::LinearSem::new(g).unwrap();
        let m = sem.implied_moments();
        let c = condition_point(&m, &[("A".into(), 2.0)]).unwrap();
        assert_abs_diff_eq!(c.mean_of("B").unwrap(), 0.0);
        assert_abs_diff_eq!(c.var_of("B").unwrap(), 1.0);
    }

    #[test]
    fn conditioning_on_everything_zeroes_the_covariance() {
        let m = m2_moments();
        let c = condition_point(
            &m,
            &[("Z".into(), 0.3), ("X".into(), 1.0), ("Y".into(), -0.2)],
        )
        .unwrap();
        assert!(c.cov().iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(c.mean_of("Y").unwrap(), -0.2);
    }

    #[test]
    fn singular_but_consistent_evidence_projects_onto_support() {
        // A and B perfectly correlated; observing both consistently is legal
        let vars = ["A", "B"];
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = GaussianMoments::new(vars, DVector::zeros(2), cov).unwrap();
        let ok = condition_point(&m, &[("A".into(), 0.7), ("B".into(), 0.7)]);
        assert!(ok.is_ok());
        let bad = condition_point(&m, &[("A".into(), 0.7), ("B".into(), -0.7)]);
        assert!(matches!(bad, Err(Error::SingularEvidenceCovariance(_))));
    }

    #[test]
    fn box_conditioning_on_m1_matches_propagation_algebra() {
        let m = fixtures::m1().implied_moments();
        let ev = Evidence::empty().and_box("X", 0.0, f64::INFINITY);
        let c = condition_box(&m, &ev, &BoxConfig::default()).unwrap();
        let tv = 1.0 - 2.0 / std::f64::consts::PI;
        assert_abs_diff_eq!(c.var_of("X").unwrap(), tv, epsilon = 1e-12);
        assert_abs_diff_eq!(c.cov_of("X", "Y").unwrap(), 0.5 * tv, epsilon = 1e-12);
        assert_abs_diff_eq!(c.var_of("Y").unwrap(), 1.0 + 0.25 * tv, epsilon = 1e-12);
        assert_abs_diff_eq!(
            c.mean_of("Y").unwrap(),
            0.5 * (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_evidence_is_identity() {
        let m = m2_moments();
        let c = condition_box(&m, &Evidence::empty(), &BoxConfig::default()).unwrap();
        assert_eq!(c.mean(), m.mean());
        assert_eq!(c.cov(), m.cov());
    }

    #[test]
    fn degenerate_box_matches_point_conditioning() {
        let m = m2_moments();
        let as_box = Evidence::empty().and_box("X", 1.0, 1.0);
        let a = condition_box(&m, &as_box, &BoxConfig::default()).unwrap();
        let b = condition_point(&m, &[("X".into(), 1.0)]).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(a.mean()[i], b.mean()[i], epsilon = 1e-8);
            for j in 0..3 {
                assert_abs_diff_eq!(a.cov()[(i, j)], b.cov()[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn regression_coefficients_on_fixtures() {
        let m2 = m2_moments();
        let b = regression_coeffs(&m2, &["Y"], &["X"], &[]).unwrap();
        assert_abs_diff_eq!(b[(0, 0)], 1.0, epsilon = 1e-12);
        let bz = regression_coeffs(&m2, &["Y"], &["X"], &["Z"]).unwrap();
        assert_abs_diff_eq!(bz[(0, 0)], 0.5, epsilon = 1e-12);

        let m3 = fixtures::m3().implied_moments();
        let b3 = regression_coeffs(&m3, &["Y"], &["X"], &[]).unwrap();
        assert_abs_diff_eq!(b3[(0, 0)], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn regression_on_independent_regressor_is_zero() {
        let g = crate::graph::PathDiagram::builder(["A", "B"]).build().unwrap();
        let m = crate::sem::LinearSem::new(g).unwrap().implied_moments();
        let b = regression_coeffs(&m, &["B"], &["A"], &[]).unwrap();
        assert_abs_diff_eq!(b[(0, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_regressors_are_rejected() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.3, 1.0, 1.0, 0.3, 0.3, 0.3, 1.0]);
        let m = GaussianMoments::new(["A", "B", "C"], DVector::zeros(3), cov).unwrap();
        assert!(matches!(
            regression_coeffs(&m, &["C"], &["A", "B"], &[]),
            Err(Error::SingularRegressorCovariance)
        ));
    }

    #[test]
    fn evidence_validation_catches_misuse() {
        assert!(Evidence::empty()
            .and_point("X", f64::NAN)
            .validate()
            .is_err());
        assert!(Evidence::empty()
            .and_point("X", 1.0)
            .and_box("X", 0.0, 1.0)
            .validate()
            .is_err());
        assert!(Evidence::empty().and_box("X", 2.0, 1.0).validate().is_err());
        assert!(Evidence::empty()
            .and_box("X", f64::INFINITY, f64::INFINITY)
            .validate()
            .is_err());
    }
}
