//! Shared test support: seeded random structural models and an independent
//! rejection-sampling estimator for box-truncated moments.

#![allow(dead_code)]

use cfsem::nalgebra::{DMatrix, DVector};
use cfsem::{GaussianMoments, LinearSem, PathDiagram};
use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

#[derive(Clone)]
pub struct RandomModelOpts {
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub edge_prob: f64,
    pub bidirected_prob: f64,
    pub max_parents: usize,
    pub random_means: bool,
}

impl Default for RandomModelOpts {
    fn default() -> Self {
        Self {
            min_vertices: 2,
            max_vertices: 6,
            edge_prob: 0.5,
            bidirected_prob: 0.15,
            max_parents: 3,
            random_means: false,
        }
    }
}

/// Random acyclic model with coefficients in [-1.5, 1.5] (bounded away from
/// zero) and unit disturbance variances; bidirected covariances are retried
/// until the disturbance covariance is positive semidefinite.
pub fn random_sem(rng: &mut ChaCha12Rng, opts: &RandomModelOpts) -> LinearSem {
    loop {
        let n = rng.random_range(opts.min_vertices..=opts.max_vertices);
        let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
        let mut builder = PathDiagram::builder(names.clone());
        let mut parent_count = vec![0usize; n];
        // declaration order doubles as a topological order
        for j in 1..n {
            for i in 0..j {
                if parent_count[j] < opts.max_parents && rng.random::<f64>() < opts.edge_prob {
                    let mut coef: f64 = rng.random_range(-1.5..1.5);
                    if coef.abs() < 0.1 {
                        coef = if coef >= 0.0 { 0.1 } else { -0.1 };
                    }
                    builder = builder.edge(&names[i], &names[j], coef);
                    parent_count[j] += 1;
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < opts.bidirected_prob {
                    let cov = rng.random_range(-0.5..0.5);
                    builder = builder.confounded(&names[i], &names[j], cov);
                }
            }
        }
        let Ok(diagram) = builder.build() else {
            continue;
        };
        let variances = vec![1.0; n];
        let means: Vec<f64> = if opts.random_means {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            vec![0.0; n]
        };
        if let Ok(sem) = LinearSem::with_disturbances(diagram, &variances, &means) {
            return sem;
        }
    }
}

/// A treatment with at least one descendant, and a random descendant as the
/// response.
pub fn pick_treatment_response(rng: &mut ChaCha12Rng, sem: &LinearSem) -> Option<(String, String)> {
    let g = sem.diagram();
    let candidates: Vec<&String> = g
        .vertices()
        .iter()
        .filter(|v| !g.descendants(v).unwrap().is_empty())
        .collect();
    let x = candidates.choose(rng)?.to_string();
    let desc = g.descendants(&x).unwrap();
    let y = desc.choose(rng)?.clone();
    Some((x, y))
}

/// Random model that always has a usable treatment/response pair.
pub fn random_sem_with_pair(
    rng: &mut ChaCha12Rng,
    opts: &RandomModelOpts,
) -> (LinearSem, String, String) {
    loop {
        let sem = random_sem(rng, opts);
        if let Some((x, y)) = pick_treatment_response(rng, &sem) {
            return (sem, x, y);
        }
    }
}

pub struct RejectionMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mass: f64,
    pub mass_se: f64,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
    pub kept: usize,
}

/// Plain rejection sampling of a Gaussian restricted to a box; completely
/// independent of the library's truncated-moment ladder.
pub fn rejection_box_moments(
    moments: &GaussianMoments,
    bounds: &[(f64, f64)],
    attempts: usize,
    seed: u64,
) -> RejectionMoments {
    let d = moments.len();
    let chol = moments
        .cov()
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| {
            let eig = moments.cov().clone().symmetric_eigen();
            let mut l = eig.eigenvectors.clone();
            for k in 0..d {
                let s = eig.eigenvalues[k].max(0.0).sqrt();
                for i in 0..d {
                    l[(i, k)] *= s;
                }
            }
            l
        });
    let mut r = rng(seed);
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for _ in 0..attempts {
        let z = DVector::from_fn(d, |_, _| {
            rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut r)
        });
        let x = moments.mean() + &chol * z;
        if bounds
            .iter()
            .enumerate()
            .all(|(i, &(lo, hi))| x[i] >= lo && x[i] <= hi)
        {
            kept.push(x);
        }
    }
    let n = kept.len().max(1) as f64;
    let mean = kept
        .iter()
        .fold(DVector::zeros(d), |acc, x| acc + x)
        / n;
    let mut cov = DMatrix::zeros(d, d);
    for x in &kept {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    if kept.len() > 1 {
        cov /= n - 1.0;
    }
    let mean_se = DVector::from_fn(d, |i, _| (cov[(i, i)] / n).sqrt());
    // SE of a covariance entry via the fourth-moment delta method
    let cov_se = DMatrix::from_fn(d, d, |i, j| {
        let mut v = 0.0;
        for x in kept.iter() {
            let p = (x[i] - mean[i]) * (x[j] - mean[j]) - cov[(i, j)];
            v += p * p;
        }
        (v / (n * n)).sqrt()
    });
    let mass = kept.len() as f64 / attempts as f64;
    let mass_se = (mass * (1.0 - mass) / attempts as f64).sqrt();
    RejectionMoments {
        mean,
        cov,
        mass,
        mass_se,
        mean_se,
        cov_se,
        kept: kept.len(),
    }
}

/// `sigma_{yy.x}` etc. via exact conditioning, for independent cross-checks.
pub fn conditional_variance_given(moments: &GaussianMoments, y: &str, given: &[&str]) -> f64 {
    let assignments: Vec<(String, f64)> = given
        .iter()
        .map(|v| (v.to_string(), moments.mean_of(v).unwrap()))
        .collect();
    let cond = cfsem::conditioning::condition_point(moments, &assignments).unwrap();
    cond.var_of(y).unwrap()
}
