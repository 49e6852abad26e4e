//! Independent Monte Carlo oracle. Samples the structural model, applies
//! point evidence by exact conditioning of the disturbance vector and
//! interval evidence by rejection in the factual world, then replays the
//! structural equations under the plan with the same disturbances and
//! reports empirical counterfactual moments with standard errors.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conditioning::Evidence;
use crate::engine::Plan;
use crate::error::{Error, Result};
use crate::moments::{psd_factor, SymPseudoInverse};
use crate::sem::LinearSem;

/// Simulation size, seed and the abort guard for rejection sampling.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_draws: usize,
    pub seed: u64,
    /// Rejection aborts once the acceptance rate is credibly below
    /// `1 / max_rejection_ratio`.
    pub max_rejection_ratio: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_draws: 1_000_000,
            seed: 0xcf5e,
            max_rejection_ratio: 1e4,
        }
    }
}

/// Empirical counterfactual moments with their standard errors.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
    pub n_kept: usize,
    pub attempts: u64,
    /// Fraction of factual draws that satisfied the interval evidence.
    pub acceptance_rate: f64,
    pub acceptance_se: f64,
    /// Empirical covariance of the counterfactual response with each plan
    /// covariate, with standard errors (empty for unconditional plans).
    pub covariate_cross_cov: Vec<f64>,
    pub covariate_cross_se: Vec<f64>,
}

/// Flattened evaluation machinery: vertices are processed nondescendants
/// first, then the treatment, then its descendants, which is a topological
/// order in which plan covariates are ready before the treatment fires.
struct Replayer {
    order: Vec<usize>,
    // per slot: (vertex, parent slots with coefficients)
    equations: Vec<(usize, Vec<(usize, f64)>)>,
    x_slot: usize,
    w_slots: Vec<usize>,
    y_slot: usize,
    box_checks: Vec<(usize, f64, f64)>,
}

impl Replayer {
    fn new(model: &LinearSem, evidence: &Evidence, plan: &Plan, y: &str) -> Result<Self> {
        let g = model.diagram();
        let xi = g.index_of(&plan.x)?;
        let yi = g.index_of(y)?;
        let desc = g.descendant_mask(xi);

        let mut order = Vec::with_capacity(g.vertex_count());
        for &v in g.topological_indices() {
            if !desc[v] && v != xi {
                order.push(v);
            }
        }
        order.push(xi);
        for &v in g.topological_indices() {
            if desc[v] {
                order.push(v);
            }
        }
        let slot_of = |vertex: usize| order.iter().position(|&v| v == vertex).unwrap();

        let coeff = model.coefficient_matrix();
        let equations = order
            .iter()
            .map(|&v| {
                let parents = g
                    .parent_indices(v)
                    .iter()
                    .map(|&p| (slot_of(p), coeff[(v, p)]))
                    .collect();
                (v, parents)
            })
            .collect();

        let mut w_slots = Vec::with_capacity(plan.covariates.len());
        for w in &plan.covariates {
            let wi = g.index_of(w)?;
            if wi == xi || desc[wi] {
                return Err(Error::PlanCovariateIsDescendant(w.clone()));
            }
            w_slots.push(slot_of(wi));
        }

        let mut box_checks = Vec::new();
        for b in evidence.boxes() {
            let bi = g.index_of(&b.variable)?;
            box_checks.push((slot_of(bi), b.lower, b.upper));
        }

        let x_slot = slot_of(xi);
        let y_slot = slot_of(yi);
        Ok(Self {
            order,
            equations,
            x_slot,
            w_slots,
            y_slot,
            box_checks,
        })
    }

    #[inline]
    fn factual(&self, eps: &[f64], vals: &mut [f64]) {
        for (slot, (v, parents)) in self.equations.iter().enumerate() {
            let mut acc = eps[*v];
            for &(p, c) in parents {
                acc += c * vals[p];
            }
            vals[slot] = acc;
        }
    }

    #[inline]
    fn in_box(&self, vals: &[f64]) -> bool {
        self.box_checks
            .iter()
            .all(|&(s, lo, hi)| vals[s] >= lo && vals[s] <= hi)
    }

    #[inline]
    fn counterfactual(&self, eps: &[f64], plan: &Plan, vals: &mut [f64]) -> f64 {
        for (slot, (v, parents)) in self.equations.iter().enumerate() {
            if slot == self.x_slot {
                let mut x = plan.x0;
                for (j, &w) in self.w_slots.iter().enumerate() {
                    x += plan.coefficients[j] * vals[w];
                }
                vals[slot] = x;
                continue;
            }
            let mut acc = eps[*v];
            for &(p, c) in parents {
                acc += c * vals[p];
            }
            vals[slot] = acc;
        }
        vals[self.y_slot]
    }
}

/// Disturbance law after conditioning on the point evidence `R = r`, worked
/// entirely in disturbance space: with `V = M eps`, the constraint rows are
/// linear in `eps` and exact Gaussian conditioning applies.
fn conditioned_disturbances(
    model: &LinearSem,
    evidence: &Evidence,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mu = model.disturbance_mean().clone();
    let sigma = model.disturbance_cov().clone();
    if evidence.points().is_empty() {
        return Ok((mu, sigma));
    }
    let g = model.diagram();
    let m = {
        // rows of (I - A)^{-1} for the observed vertices
        let full = model.path_matrix();
        let rows: Vec<usize> = evidence
            .points()
            .iter()
            .map(|(v, _)| g.index_of(v))
            .collect::<Result<_>>()?;
        DMatrix::from_fn(rows.len(), g.vertex_count(), |i, j| full[(rows[i], j)])
    };
    let r_mean = &m * &mu;
    let r_cov = &m * &sigma * m.transpose();
    let d = DVector::from_fn(evidence.points().len(), |i, _| {
        evidence.points()[i].1 - r_mean[i]
    });
    let pinv = SymPseudoInverse::new(&r_cov);
    if !pinv.is_invertible() {
        let scale = (0..r_cov.nrows())
            .fold(1.0f64, |a, i| a.max(r_cov[(i, i)].abs()))
            .sqrt();
        let off = pinv.off_support_norm(&d);
        if off > 1e-8 * scale.max(1.0) * d.norm().max(1.0) {
            return Err(Error::SingularEvidenceCovariance(off));
        }
    }
    let cross = &sigma * m.transpose();
    let gain = &cross * &pinv.inv;
    let mean = &mu + &gain * &d;
    let mut cov = &sigma - &gain * cross.transpose();
    crate::moments::symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Draws the joint law of the model: `eps ~ N(mu_eps, Sigma_eps)` propagated
/// through the structural equations. Rows are draws, columns follow the
/// vertex declaration order. Identical seeds give identical matrices.
pub fn simulate_joint(model: &LinearSem, cfg: &SimConfig) -> DMatrix<f64> {
    let n = model.diagram().vertex_count();
    if n == 0 {
        return DMatrix::zeros(cfg.n_draws, 0);
    }
    let plan = Plan::unconditional(model.diagram().name(0), 0.0);
    // an unconditional no-op replayer purely for the shared evaluation order
    let replayer = Replayer::new(model, &Evidence::empty(), &plan, model.diagram().name(0))
        .expect("valid model");
    let l = psd_factor(model.disturbance_cov());
    let mu = model.disturbance_mean();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut out = DMatrix::zeros(cfg.n_draws, n);
    let mut z = vec![0.0f64; n];
    let mut eps = vec![0.0f64; n];
    let mut vals = vec![0.0f64; n];
    for row in 0..cfg.n_draws {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut acc = mu[i];
            for k in 0..n {
                acc += l[(i, k)] * z[k];
            }
            eps[i] = acc;
        }
        // factual pass with X from its own equation
        for (slot, (v, parents)) in replayer.equations.iter().enumerate() {
            let mut acc = eps[*v];
            for &(p, c) in parents {
                acc += c * vals[p];
            }
            vals[slot] = acc;
        }
        for (slot, &v) in replayer.order.iter().enumerate() {
            out[(row, v)] = vals[slot];
        }
    }
    out
}

/// Runs the twin-world experiment: keep a disturbance draw whose factual
/// world satisfies the evidence, replay the counterfactual world under the
/// plan with the same disturbances, and accumulate the response.
pub fn mc_counterfactual(
    model: &LinearSem,
    evidence: &Evidence,
    plan: &Plan,
    y: &str,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    evidence.validate()?;
    let evidence = evidence.normalized();
    let replayer = Replayer::new(model, &evidence, plan, y)?;
    if plan.coefficients.len() != plan.covariates.len() {
        return Err(Error::InvalidPlan(format!(
            "{} covariates with {} coefficients",
            plan.covariates.len(),
            plan.coefficients.len()
        )));
    }
    let (eps_mean, eps_cov) = conditioned_disturbances(model, &evidence)?;
    let l = psd_factor(&eps_cov);
    let n = model.diagram().vertex_count();
    let needs_factual = !replayer.box_checks.is_empty();

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let n_draws = cfg.n_draws.max(1);
    let ratio = cfg.max_rejection_ratio.max(1.0);
    let hard_cap = (n_draws as f64 * ratio).min(1e18) as u64;
    let warmup = (200.0 * ratio).min(1e18) as u64;

    let mut kept_y = Vec::with_capacity(n_draws);
    let mut kept_w: Vec<Vec<f64>> = vec![Vec::new(); replayer.w_slots.len()];
    for w in kept_w.iter_mut() {
        w.reserve(n_draws);
    }
    let mut attempts: u64 = 0;
    let mut z = vec![0.0f64; n];
    let mut eps = vec![0.0f64; n];
    let mut vals = vec![0.0f64; n];

    while kept_y.len() < n_draws {
        attempts += 1;
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut acc = eps_mean[i];
            for k in 0..n {
                acc += l[(i, k)] * z[k];
            }
            eps[i] = acc;
        }
        if needs_factual {
            replayer.factual(&eps, &mut vals);
            if !replayer.in_box(&vals) {
                if attempts % 8192 == 0 {
                    let rate = kept_y.len() as f64 / attempts as f64;
                    if attempts >= hard_cap || (attempts >= warmup && rate < 0.5 / ratio) {
                        return Err(Error::RejectionBudgetExceeded { rate, ratio });
                    }
                }
                continue;
            }
        }
        let y_star = replayer.counterfactual(&eps, plan, &mut vals);
        kept_y.push(y_star);
        for (j, &w) in replayer.w_slots.iter().enumerate() {
            kept_w[j].push(vals[w]);
        }
    }

    let n_kept = kept_y.len();
    let nf = n_kept as f64;
    let mean = neumaier_sum(kept_y.iter().copied()) / nf;
    let m2 = neumaier_sum(kept_y.iter().map(|&v| (v - mean) * (v - mean)));
    let m4 = neumaier_sum(kept_y.iter().map(|&v| {
        let d = (v - mean) * (v - mean);
        d * d
    }));
    let variance = if n_kept > 1 { m2 / (nf - 1.0) } else { 0.0 };
    let m2n = m2 / nf;
    let m4n = m4 / nf;
    let mean_se = (variance / nf).sqrt();
    let variance_se = ((m4n - m2n * m2n).max(0.0) / nf).sqrt();

    let mut covariate_cross_cov = Vec::with_capacity(kept_w.len());
    let mut covariate_cross_se = Vec::with_capacity(kept_w.len());
    for series in &kept_w {
        let wm = neumaier_sum(series.iter().copied()) / nf;
        let prods: Vec<f64> = kept_y
            .iter()
            .zip(series)
            .map(|(&yv, &wv)| (yv - mean) * (wv - wm))
            .collect();
        let c = neumaier_sum(prods.iter().copied()) / (nf - 1.0);
        let var_prod =
            neumaier_sum(prods.iter().map(|&p| (p - c) * (p - c))) / nf;
        covariate_cross_cov.push(c);
        covariate_cross_se.push((var_prod / nf).sqrt());
    }

    let acceptance_rate = if needs_factual {
        nf / attempts as f64
    } else {
        1.0
    };
    let acceptance_se = if needs_factual {
        (acceptance_rate * (1.0 - acceptance_rate) / attempts as f64).sqrt()
    } else {
        0.0
    };

    Ok(McEstimate {
        mean,
        variance,
        mean_se,
        variance_se,
        n_kept,
        attempts,
        acceptance_rate,
        acceptance_se,
        covariate_cross_cov,
        covariate_cross_se,
    })
}

/// Compensated (Neumaier) summation; order-stable reductions for the large
/// accumulations above.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn small_cfg(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_draws: n,
            seed,
            max_rejection_ratio: 1e4,
        }
    }

    #[test]
    fn same_seed_same_output() {
        let model = fixtures::m2();
        let a = simulate_joint(&model, &small_cfg(64, 7));
        let b = simulate_joint(&model, &small_cfg(64, 7));
        assert_eq!(a, b);
        let c = simulate_joint(&model, &small_cfg(64, 8));
        assert_ne!(a, c);
    }

    #[test]
    fn deterministic_model_yields_its_mean() {
        let g = crate::graph::PathDiagram::builder(["A", "B"])
            .edge("A", "B", 2.0)
            .build()
            .unwrap();
        let sem = LinearSem::with_disturbances(g, &[0.0, 0.0], &[1.0, 0.5]).unwrap();
        let out = simulate_joint(&sem, &small_cfg(1, 3));
        assert_abs_diff_eq!(out[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[(0, 1)], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn sample_covariance_tracks_implied_moments() {
        let model = fixtures::m2();
        let n = 200_000;
        let s = simulate_joint(&model, &small_cfg(n, 42));
        let implied = model.implied_moments();
        for i in 0..3 {
            for j in 0..3 {
                let mi = s.column(i).mean();
                let mj = s.column(j).mean();
                let mut acc = 0.0;
                for r in 0..n {
                    acc += (s[(r, i)] - mi) * (s[(r, j)] - mj);
                }
                let cov = acc / (n as f64 - 1.0);
                // generous 5-sigma-ish tolerance at this sample size
                assert_abs_diff_eq!(cov, implied.cov()[(i, j)], epsilon = 0.05);
            }
        }
    }

    #[test]
    fn oracle_matches_intervention_closed_form() {
        let model = fixtures::m2();
        let est = mc_counterfactual(
            &model,
            &Evidence::empty(),
            &Plan::unconditional("X", 1.0),
            "Y",
            &small_cfg(200_000, 11),
        )
        .unwrap();
        assert!((est.mean - 0.5).abs() < 4.0 * est.mean_se);
        assert!((est.variance - 2.0).abs() < 4.0 * est.variance_se);
    }

    #[test]
    fn oracle_matches_point_counterfactual() {
        let model = fixtures::m2();
        let ev = Evidence::empty().and_point("X", 1.0);
        let est = mc_counterfactual(
            &model,
            &ev,
            &Plan::unconditional("X", 0.0),
            "Y",
            &small_cfg(200_000, 13),
        )
        .unwrap();
        assert!((est.mean - 0.5).abs() < 4.0 * est.mean_se);
        assert!((est.variance - 1.5).abs() < 4.0 * est.variance_se);
    }

    #[test]
    fn optimal_plan_decorrelates_response_from_covariate() {
        let model = fixtures::m2();
        let plan = Plan::conditional("X", 0.0, &["Z"], &[-2.0]);
        let est = mc_counterfactual(
            &model,
            &Evidence::empty(),
            &plan,
            "Y",
            &small_cfg(200_000, 17),
        )
        .unwrap();
        assert!((est.variance - 1.0).abs() < 4.0 * est.variance_se);
        assert!(est.covariate_cross_cov[0].abs() < 4.0 * est.covariate_cross_se[0]);
    }

    #[test]
    fn tiny_box_trips_the_rejection_guard() {
        let model = fixtures::m1();
        let ev = Evidence::empty().and_box("X", 6.0, f64::INFINITY);
        let err = mc_counterfactual(
            &model,
            &ev,
            &Plan::unconditional("X", 0.0),
            "Y",
            &small_cfg(10_000, 19),
        )
        .unwrap_err();
        assert!(matches!(err, Error::RejectionBudgetExceeded { .. }));
    }
}
