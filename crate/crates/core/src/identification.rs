//! Identification of the total effect from a designated observed subset:
//! bounded search for a back-door adjustment set or a conditional instrument,
//! and the matching covariance-based estimators.

use crate::conditioning::regression_coeffs;
use crate::error::{Error, Result};
use crate::graph::PathDiagram;
use crate::moments::GaussianMoments;
use crate::sem::LinearSem;

/// How the total effect was (or was not) obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TauRoute {
    /// Computed from the structural coefficient matrix.
    Structural,
    /// Back-door adjustment for the listed set.
    Backdoor { adjustment: Vec<String> },
    /// Conditional instrument `instrument` given `conditioning`.
    ConditionalIv {
        instrument: String,
        conditioning: Vec<String>,
    },
    /// No admissible set found within the search bounds.
    Unidentified,
}

/// Outcome of an identification query; `tau` is present exactly when the
/// route is not [`TauRoute::Unidentified`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub route: TauRoute,
    pub tau: Option<f64>,
}

impl IdentificationResult {
    pub fn is_identified(&self) -> bool {
        self.tau.is_some()
    }
}

/// Options for the admissible-set search.
#[derive(Debug, Clone)]
pub struct IdentifyOptions {
    /// Largest conditioning-set cardinality tried (per criterion).
    pub max_set_size: usize,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self { max_set_size: 4 }
    }
}

/// Back-door estimator `beta_{yx.t}` from observed moments. The caller is
/// responsible for having checked the criterion; an inadmissible `t` yields a
/// number that need not equal the total effect.
pub fn backdoor_estimate(sigma: &GaussianMoments, x: &str, y: &str, t: &[&str]) -> Result<f64> {
    let b = regression_coeffs(sigma, &[y], &[x], t)?;
    Ok(b[(0, 0)])
}

/// Conditional-instrument estimator `sigma_{yz.t} / sigma_{xz.t}`.
pub fn iv_estimate(sigma: &GaussianMoments, x: &str, y: &str, z: &str, t: &[&str]) -> Result<f64> {
    let (syz, sxz) = conditional_cross(sigma, y, x, z, t)?;
    if sxz.abs() < 1e-12 {
        return Err(Error::ZeroInstrumentCovariance);
    }
    Ok(syz / sxz)
}

/// `(sigma_{yz.t}, sigma_{xz.t})` via Schur complements.
fn conditional_cross(
    sigma: &GaussianMoments,
    y: &str,
    x: &str,
    z: &str,
    t: &[&str],
) -> Result<(f64, f64)> {
    if t.is_empty() {
        return Ok((sigma.cov_of(y, z)?, sigma.cov_of(x, z)?));
    }
    let assignments: Vec<(String, f64)> = t
        .iter()
        .map(|v| Ok((v.to_string(), sigma.mean_of(v)?)))
        .collect::<Result<_>>()?;
    let cond = crate::conditioning::condition_point(sigma, &assignments)?;
    Ok((cond.cov_of(y, z)?, cond.cov_of(x, z)?))
}

/// Searches the observed subsets for a route to the total effect of `x` on
/// `y` and evaluates it from `sigma`. When `structural` is supplied the exact
/// coefficient-based total effect is returned directly.
///
/// The search tries back-door sets first, then conditional instruments, in
/// increasing cardinality with ties broken by vertex declaration order; the
/// first admissible hit wins.
pub fn identify(
    g: &PathDiagram,
    observed: &[&str],
    sigma: &GaussianMoments,
    x: &str,
    y: &str,
    structural: Option<&LinearSem>,
    opts: &IdentifyOptions,
) -> Result<IdentificationResult> {
    g.index_of(x)?;
    g.index_of(y)?;
    for v in observed {
        g.index_of(v)?;
    }
    if let Some(sem) = structural {
        return Ok(IdentificationResult {
            route: TauRoute::Structural,
            tau: Some(sem.total_effect_on(x, y)?),
        });
    }
    if !observed.contains(&x) || !observed.contains(&y) {
        return Ok(IdentificationResult {
            route: TauRoute::Unidentified,
            tau: None,
        });
    }

    // candidate conditioning variables in declaration order
    let pool: Vec<&str> = g
        .vertices()
        .iter()
        .map(String::as_str)
        .filter(|v| *v != x && *v != y && observed.contains(v))
        .collect();
    let cap = opts.max_set_size.min(pool.len());

    for size in 0..=cap {
        let mut found: Option<IdentificationResult> = None;
        for_each_subset(&pool, size, &mut |t| {
            if found.is_some() {
                return;
            }
            if g.backdoor_admissible(x, y, t).unwrap_or(false) {
                if let Ok(tau) = backdoor_estimate(sigma, x, y, t) {
                    found = Some(IdentificationResult {
                        route: TauRoute::Backdoor {
                            adjustment: t.iter().map(|s| s.to_string()).collect(),
                        },
                        tau: Some(tau),
                    });
                }
            }
        });
        if let Some(r) = found {
            return Ok(r);
        }
    }

    for size in 0..=cap {
        for z in &pool {
            let rest: Vec<&str> = pool.iter().copied().filter(|v| v != z).collect();
            if size > rest.len() {
                continue;
            }
            let mut found: Option<IdentificationResult> = None;
            for_each_subset(&rest, size, &mut |t| {
                if found.is_some() {
                    return;
                }
                if g.conditional_iv(x, y, z, t).unwrap_or(false) {
                    if let Ok(tau) = iv_estimate(sigma, x, y, z, t) {
                        found = Some(IdentificationResult {
                            route: TauRoute::ConditionalIv {
                                instrument: z.to_string(),
                                conditioning: t.iter().map(|s| s.to_string()).collect(),
                            },
                            tau: Some(tau),
                        });
                    }
                }
            });
            if let Some(r) = found {
                return Ok(r);
            }
        }
    }

    Ok(IdentificationResult {
        route: TauRoute::Unidentified,
        tau: None,
    })
}

/// Visits all size-`k` subsets of `pool` in lexicographic index order.
fn for_each_subset<'a>(pool: &[&'a str], k: usize, visit: &mut impl FnMut(&[&'a str])) {
    fn rec<'a>(
        pool: &[&'a str],
        k: usize,
        start: usize,
        current: &mut Vec<&'a str>,
        visit: &mut impl FnMut(&[&'a str]),
    ) {
        if current.len() == k {
            visit(current);
            return;
        }
        let remaining = k - current.len();
        for i in start..=pool.len().saturating_sub(remaining) {
            current.push(pool[i]);
            rec(pool, k, i + 1, current, visit);
            current.pop();
        }
    }
    if k == 0 {
        visit(&[]);
        return;
    }
    if k > pool.len() {
        return;
    }
    rec(pool, k, 0, &mut Vec::with_capacity(k), visit);
}
