//! Linear structural equation models over a path diagram: implied joint
//! moments, disturbance-moment recovery, and total effects.

use nalgebra::{DMatrix, DVector};

use crate::conditioning::{condition, BoxConfig, Evidence};
use crate::error::{Error, Result};
use crate::graph::PathDiagram;
use crate::moments::{min_eigenvalue, symmetrize, GaussianMoments, PSD_TOL};

/// A path diagram together with disturbance moments. The coefficient matrix
/// `A` has `A[i][j]` equal to the coefficient of `v_j` in the equation of
/// `v_i`, zero where no edge exists.
#[derive(Debug, Clone)]
pub struct LinearSem {
    diagram: PathDiagram,
    coeff: DMatrix<f64>,
    noise_mean: DVector<f64>,
    noise_cov: DMatrix<f64>,
}

impl LinearSem {
    /// Model with unit disturbance variances and zero means; bidirected edge
    /// covariances come from the diagram.
    pub fn new(diagram: PathDiagram) -> Result<Self> {
        let n = diagram.vertex_count();
        Self::with_disturbances(diagram, &vec![1.0; n], &vec![0.0; n])
    }

    /// Model with explicit per-vertex disturbance variances and means, given
    /// in vertex declaration order.
    pub fn with_disturbances(
        diagram: PathDiagram,
        variances: &[f64],
        means: &[f64],
    ) -> Result<Self> {
        let n = diagram.vertex_count();
        if variances.len() != n || means.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} vertices, {} variances, {} means",
                n,
                variances.len(),
                means.len()
            )));
        }
        let mut noise_cov = DMatrix::zeros(n, n);
        for (i, &v) in variances.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidErrorCovariance {
                    a: diagram.name(i).to_string(),
                    b: diagram.name(i).to_string(),
                });
            }
            noise_cov[(i, i)] = v;
        }
        for &(a, b, cov) in diagram.bidirected_index_triples() {
            noise_cov[(a, b)] = cov;
            noise_cov[(b, a)] = cov;
        }
        let min_eig = min_eigenvalue(&noise_cov);
        let scale = noise_cov.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if min_eig < -PSD_TOL * scale {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }

        let mut coeff = DMatrix::zeros(n, n);
        for &(f, t, c) in diagram.directed_index_triples() {
            coeff[(t, f)] = c;
        }
        let noise_mean = DVector::from_fn(n, |i, _| means[i]);
        Ok(Self {
            diagram,
            coeff,
            noise_mean,
            noise_cov,
        })
    }

    pub fn diagram(&self) -> &PathDiagram {
        &self.diagram
    }

    pub fn coefficient_matrix(&self) -> &DMatrix<f64> {
        &self.coeff
    }

    pub fn disturbance_mean(&self) -> &DVector<f64> {
        &self.noise_mean
    }

    pub fn disturbance_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `(I - A)^{-1}`, built by back-substitution along the topological order.
    /// Row `i` accumulates `e_i + sum_j A_ij * row_j`, so entry `(i, j)` is the
    /// sum over directed paths `j -> i` of coefficient products (1 on the
    /// diagonal).
    pub(crate) fn path_matrix(&self) -> DMatrix<f64> {
        let n = self.diagram.vertex_count();
        let mut m = DMatrix::zeros(n, n);
        for &i in self.diagram.topological_indices() {
            m[(i, i)] = 1.0;
            for &p in self.diagram.parent_indices(i) {
                let c = self.coeff[(i, p)];
                for j in 0..n {
                    m[(i, j)] += c * m[(p, j)];
                }
            }
        }
        m
    }

    /// Joint moments implied by the structural form:
    /// `mu = (I-A)^{-1} mu_eps`, `Sigma = (I-A)^{-1} Sigma_eps (I-A)^{-T}`.
    pub fn implied_moments(&self) -> GaussianMoments {
        let m = self.path_matrix();
        let mean = &m * &self.noise_mean;
        let mut cov = &m * &self.noise_cov * m.transpose();
        symmetrize(&mut cov);
        GaussianMoments::new_unchecked(self.diagram.vertices().to_vec(), mean, cov)
    }

    /// Total effect vector `tau_sx = (I_ss - A_ss)^{-1} A_sx` for the ordered
    /// descendant block `s`. `s` must contain exactly the descendants of `x`.
    pub fn total_effect(&self, x: &str, s: &[&str]) -> Result<DVector<f64>> {
        let xi = self.diagram.index_of(x)?;
        let s_idx: Vec<usize> = s
            .iter()
            .map(|v| self.diagram.index_of(v))
            .collect::<Result<_>>()?;
        let desc = self.diagram.descendant_mask(xi);
        let n_desc = desc.iter().filter(|&&d| d).count();
        if s_idx.len() != n_desc || s_idx.iter().any(|&i| !desc[i]) {
            return Err(Error::PartitionMismatch(x.to_string()));
        }
        let k = s_idx.len();
        let mut i_minus_a = DMatrix::identity(k, k);
        for (r, &ri) in s_idx.iter().enumerate() {
            for (c, &ci) in s_idx.iter().enumerate() {
                i_minus_a[(r, c)] -= self.coeff[(ri, ci)];
            }
        }
        let a_sx = DVector::from_fn(k, |r, _| self.coeff[(s_idx[r], xi)]);
        i_minus_a
            .lu()
            .solve(&a_sx)
            .ok_or_else(|| Error::DimensionMismatch("singular (I - A_ss)".into()))
    }

    /// Scalar total effect of `x` on `y`; zero when `y` is not a descendant.
    pub fn total_effect_on(&self, x: &str, y: &str) -> Result<f64> {
        let xi = self.diagram.index_of(x)?;
        let yi = self.diagram.index_of(y)?;
        if !self.diagram.descendant_mask(xi)[yi] {
            return Ok(0.0);
        }
        // single back-substitution for column x of (I - A)^{-1}
        let n = self.diagram.vertex_count();
        let mut v = DVector::zeros(n);
        for &i in self.diagram.topological_indices() {
            let mut acc = if i == xi { 1.0 } else { 0.0 };
            for &p in self.diagram.parent_indices(i) {
                acc += self.coeff[(i, p)] * v[p];
            }
            v[i] = acc;
        }
        Ok(v[yi])
    }
}

/// Disturbance moments recovered from joint moments:
/// `mu_eps = (I-A) mu`, `Sigma_eps = (I-A) Sigma (I-A)'`.
pub fn disturbance_moments(a: &DMatrix<f64>, joint: &GaussianMoments) -> Result<GaussianMoments> {
    let n = joint.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix {}x{} against {} variables",
            a.nrows(),
            a.ncols(),
            n
        )));
    }
    let i_minus_a = DMatrix::identity(n, n) - a;
    let mean = &i_minus_a * joint.mean();
    let mut cov = &i_minus_a * joint.cov() * i_minus_a.transpose();
    symmetrize(&mut cov);
    Ok(GaussianMoments::new_unchecked(
        joint.variables().to_vec(),
        mean,
        cov,
    ))
}

/// Disturbance moments after conditioning the joint law on evidence (exact
/// point conditioning; exact first/second moments under box truncation).
pub fn conditional_disturbance_moments(
    a: &DMatrix<f64>,
    joint: &GaussianMoments,
    evidence: &Evidence,
    cfg: &BoxConfig,
) -> Result<GaussianMoments> {
    let conditioned = condition(joint, evidence, cfg)?;
    disturbance_moments(a, &conditioned)
}

/// Sum over all directed paths from `x` to `y` of the products of path
/// coefficients, by exhaustive enumeration. Exponential in the worst case;
/// intended as an oracle for small graphs.
pub fn total_effect_by_paths(g: &PathDiagram, x: &str, y: &str) -> Result<f64> {
    let xi = g.index_of(x)?;
    let yi = g.index_of(y)?;
    let n = g.vertex_count();
    let mut children: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(f, t, c) in g.directed_index_triples() {
        children[f].push((t, c));
    }
    fn walk(v: usize, yi: usize, prod: f64, children: &[Vec<(usize, f64)>], acc: &mut f64) {
        if v == yi {
            *acc += prod;
            return;
        }
        for &(c, coef) in &children[v] {
            walk(c, yi, prod * coef, children, acc);
        }
    }
    let mut acc = 0.0;
    if xi == yi {
        return Ok(1.0);
    }
    walk(xi, yi, 1.0, &children, &mut acc);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_structure_means_moments_equal_disturbances() {
        let g = PathDiagram::builder(["A", "B"]).build().unwrap();
        let sem = LinearSem::with_disturbances(g, &[2.0, 3.0], &[1.0, -1.0]).unwrap();
        let m = sem.implied_moments();
        assert_abs_diff_eq!(m.mean_of("A").unwrap(), 1.0);
        assert_abs_diff_eq!(m.var_of("B").unwrap(), 3.0);
        assert_abs_diff_eq!(m.cov_of("A", "B").unwrap(), 0.0);
    }

    #[test]
    fn m2_implied_moments() {
        let m = fixtures::m2().implied_moments();
        assert_abs_diff_eq!(m.var_of("X").unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov_of("X", "Y").unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.var_of("Y").unwrap(), 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov_of("Z", "Y").unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn m3_implied_moments() {
        let m = fixtures::m3().implied_moments();
        assert_abs_diff_eq!(m.var_of("Y").unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov_of("X", "Y").unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov_of("Z", "Y").unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn disturbance_moments_roundtrip() {
        let sem = fixtures::m2();
        let eps = disturbance_moments(sem.coefficient_matrix(), &sem.implied_moments()).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(eps.mean()[i], sem.disturbance_mean()[i], epsilon = 1e-12);
            for j in 0..3 {
                assert_abs_diff_eq!(
                    eps.cov()[(i, j)],
                    sem.disturbance_cov()[(i, j)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn m2_disturbance_cov_is_identity() {
        let sem = fixtures::m2();
        let eps = disturbance_moments(sem.coefficient_matrix(), &sem.implied_moments()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(eps.cov()[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_coefficients_leave_moments_unchanged() {
        let g = PathDiagram::builder(["A", "B"]).build().unwrap();
        let sem = LinearSem::with_disturbances(g, &[1.5, 0.5], &[0.3, 0.0]).unwrap();
        let joint = sem.implied_moments();
        let eps = disturbance_moments(sem.coefficient_matrix(), &joint).unwrap();
        assert_eq!(eps.mean(), joint.mean());
        assert_eq!(eps.cov(), joint.cov());
    }

    #[test]
    fn total_effect_on_fixtures() {
        assert_abs_diff_eq!(fixtures::m1().total_effect_on("X", "Y").unwrap(), 0.5);
        assert_abs_diff_eq!(fixtures::m2().total_effect_on("X", "Y").unwrap(), 0.5);
        let tau = fixtures::m2().total_effect("X", &["Y"]).unwrap();
        assert_abs_diff_eq!(tau[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn total_effect_rejects_wrong_block() {
        let sem = fixtures::m2();
        assert!(matches!(
            sem.total_effect("X", &["Y", "Z"]),
            Err(Error::PartitionMismatch(_))
        ));
    }

    #[test]
    fn path_enumeration_oracle() {
        let g = fixtures::m1().diagram().clone();
        assert_abs_diff_eq!(total_effect_by_paths(&g, "X", "Y").unwrap(), 0.5);

        let chain = PathDiagram::builder(["X", "M", "Y"])
            .edge("X", "M", 2.0)
            .edge("M", "Y", 3.0)
            .edge("X", "Y", 1.0)
            .build()
            .unwrap();
        assert_abs_diff_eq!(total_effect_by_paths(&chain, "X", "Y").unwrap(), 7.0);
        assert_abs_diff_eq!(total_effect_by_paths(&chain, "Y", "X").unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_psd_disturbances() {
        let g = PathDiagram::builder(["A", "B"])
            .confounded("A", "B", 2.0)
            .build()
            .unwrap();
        assert!(matches!(
            LinearSem::new(g),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }
}
