//! First and second moments over an ordered variable set.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the smallest eigenvalue when validating covariance matrices.
pub(crate) const PSD_TOL: f64 = 1e-9;

/// A mean vector and covariance matrix over an ordered list of variables.
///
/// The same type carries joint, conditional, disturbance and counterfactual
/// moments; the variable order fixes the matrix layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    variables: Vec<String>,
    index: HashMap<String, usize>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianMoments {
    /// Builds moments, validating dimensions, symmetry and positive
    /// semidefiniteness (eigenvalues above `-1e-9` at unit scale).
    pub fn new(
        variables: impl IntoIterator<Item = impl Into<String>>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        let variables: Vec<String> = variables.into_iter().map(Into::into).collect();
        let n = variables.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} variables, mean of length {}, covariance {}x{}",
                n,
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::DimensionMismatch(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut cov = cov;
        symmetrize(&mut cov);
        let min_eig = min_eigenvalue(&cov);
        if min_eig < -PSD_TOL * scale.max(1.0) {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        Ok(Self::new_unchecked(variables, mean, cov))
    }

    /// Builds moments without the PSD check; callers guarantee validity.
    pub(crate) fn new_unchecked(
        variables: Vec<String>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Self {
        let index = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Self {
            variables,
            index,
            mean,
            cov,
        }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnobservedVariable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn mean_of(&self, name: &str) -> Result<f64> {
        Ok(self.mean[self.index_of(name)?])
    }

    pub fn var_of(&self, name: &str) -> Result<f64> {
        let i = self.index_of(name)?;
        Ok(self.cov[(i, i)])
    }

    pub fn cov_of(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.cov[(self.index_of(a)?, self.index_of(b)?)])
    }

    /// Marginal moments over a subset, in the requested order.
    pub fn marginal(&self, subset: &[&str]) -> Result<GaussianMoments> {
        let idx: Vec<usize> = subset
            .iter()
            .map(|v| self.index_of(v))
            .collect::<Result<_>>()?;
        let mean = DVector::from_fn(idx.len(), |i, _| self.mean[idx[i]]);
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        Ok(Self::new_unchecked(
            subset.iter().map(|s| s.to_string()).collect(),
            mean,
            cov,
        ))
    }

    /// Indices of `subset` within this moment's variable order.
    pub(crate) fn indices(&self, subset: &[&str]) -> Result<Vec<usize>> {
        subset.iter().map(|v| self.index_of(v)).collect()
    }
}

/// Forces exact symmetry by averaging off-diagonal pairs.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix via its
/// eigendecomposition. Returns the inverse together with the rank and, for a
/// residual vector, the norm of its component outside the range space.
pub(crate) struct SymPseudoInverse {
    pub inv: DMatrix<f64>,
    pub rank: usize,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    cut: f64,
}

impl SymPseudoInverse {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                inv: DMatrix::zeros(0, 0),
                rank: 0,
                eigvecs: DMatrix::zeros(0, 0),
                eigvals: DVector::zeros(0),
                cut: 0.0,
            };
        }
        let eig = m.clone().symmetric_eigen();
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let cut = max_abs.max(1.0) * 1e-12;
        let mut inv = DMatrix::zeros(n, n);
        let mut rank = 0;
        for k in 0..n {
            let l = eig.eigenvalues[k];
            if l > cut {
                rank += 1;
                let v = eig.eigenvectors.column(k);
                inv += (&v * v.transpose()) / l;
            }
        }
        Self {
            inv,
            rank,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
            cut,
        }
    }

    /// Norm of the component of `d` orthogonal to the range of the matrix.
    pub fn off_support_norm(&self, d: &DVector<f64>) -> f64 {
        let mut sq = 0.0;
        for k in 0..self.eigvals.len() {
            if self.eigvals[k] <= self.cut {
                let c = self.eigvecs.column(k).dot(d);
                sq += c * c;
            }
        }
        sq.sqrt()
    }

    pub fn is_invertible(&self) -> bool {
        self.rank == self.eigvals.len()
    }
}

/// Factor `L` with `L L' = m` for a symmetric PSD matrix, tolerating
/// semidefiniteness by clipping slightly negative eigenvalues to zero.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        return ch.l();
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut l = eig.eigenvectors;
    for k in 0..n {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for i in 0..n {
            l[(i, k)] *= s;
        }
    }
    l
}
