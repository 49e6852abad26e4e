//! First and second moments of a multivariate Gaussian restricted to an
//! axis-aligned box. Dimension 1 has a closed form; dimensions 2-3 use
//! adaptive nested quadrature; higher dimensions use a quasi-Monte Carlo
//! separation-of-variables sampler with randomized shifts.

use libm::{erf, erfc};
use nalgebra::{DMatrix, DVector};

use super::quadrature::integrate;
use super::{BoxConfig, BoxMoments, MomentMethod};
use crate::error::{Error, Result};
use crate::moments::GaussianMoments;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// Integration windows are clipped this many standard deviations out; the
/// discarded tail mass is below 1e-17.
const TAIL_SIGMAS: f64 = 8.5;
const ZERO_MASS: f64 = 1e-12;

pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * FRAC_1_SQRT_2PI
}

pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Inverse standard normal CDF, Wichura's rational approximations (relative
/// accuracy around 1e-15 over the full open unit interval).
pub(crate) fn norm_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&QUANT_A, r) / poly(&QUANT_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&QUANT_C, r) / poly(&QUANT_D, r)
    } else {
        let r = r - 5.0;
        poly(&QUANT_E, r) / poly(&QUANT_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const QUANT_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946_1e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const QUANT_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545_5e3,
];
const QUANT_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const QUANT_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_8,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const QUANT_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const QUANT_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// P(alpha <= Z <= beta) for standard normal, stable in both tails.
fn std_mass(alpha: f64, beta: f64) -> f64 {
    if alpha >= beta {
        return 0.0;
    }
    let m = if alpha > 0.0 {
        0.5 * (erfc(alpha / SQRT_2) - erfc(beta / SQRT_2))
    } else if beta < 0.0 {
        0.5 * (erfc(-beta / SQRT_2) - erfc(-alpha / SQRT_2))
    } else {
        0.5 * (erf(beta / SQRT_2) - erf(alpha / SQRT_2))
    };
    m.max(0.0)
}

/// Mean, variance and mass of a scalar normal `N(mu, var)` truncated to
/// `[lo, hi]` (either bound may be infinite).
pub(crate) fn truncated_scalar(mu: f64, var: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    debug_assert!(var >= 0.0);
    if var <= 0.0 {
        let inside = lo <= mu && mu <= hi;
        return (mu, 0.0, if inside { 1.0 } else { 0.0 });
    }
    let sigma = var.sqrt();
    let alpha = if lo == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (lo - mu) / sigma
    };
    let beta = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        (hi - mu) / sigma
    };
    let mass = std_mass(alpha, beta);
    if mass <= 0.0 {
        return (mu, 0.0, 0.0);
    }
    let phi_a = if alpha.is_finite() { norm_pdf(alpha) } else { 0.0 };
    let phi_b = if beta.is_finite() { norm_pdf(beta) } else { 0.0 };
    let a_phi_a = if alpha.is_finite() { alpha * phi_a } else { 0.0 };
    let b_phi_b = if beta.is_finite() { beta * phi_b } else { 0.0 };
    let r1 = (phi_a - phi_b) / mass;
    let r2 = (a_phi_a - b_phi_b) / mass;
    let mean = mu + sigma * r1;
    let v = var * (1.0 + r2 - r1 * r1);
    (mean, v.max(0.0), mass)
}

fn clip_window(lo: f64, hi: f64, mu: f64, sigma: f64) -> Option<(f64, f64)> {
    let a = lo.max(mu - TAIL_SIGMAS * sigma);
    let b = hi.min(mu + TAIL_SIGMAS * sigma);
    if a < b {
        Some((a, b))
    } else {
        None
    }
}

struct RawIntegrals {
    /// [Z, E_1..E_d, M_11, M_12, .., M_dd (upper triangle, row major)]
    values: Vec<f64>,
    error: f64,
    converged: bool,
}

fn component_count(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

/// Assembles normalized moments out of box-weighted raw integrals.
fn assemble(
    d: usize,
    raw: &RawIntegrals,
    tol: f64,
    method: MomentMethod,
) -> Result<BoxMoments> {
    if !raw.converged {
        return Err(Error::NumericalTargetMissed {
            achieved: raw.error,
            tolerance: tol,
        });
    }
    let mass = raw.values[0];
    if !(mass > ZERO_MASS) {
        return Err(Error::ZeroMassBox);
    }
    let mass = mass.min(1.0);
    let e_int = raw.error;
    let mean = DVector::from_fn(d, |i, _| raw.values[1 + i] / mass);
    let mut second = DMatrix::zeros(d, d);
    let mut k = 1 + d;
    for i in 0..d {
        for j in i..d {
            let v = raw.values[k] / mass;
            second[(i, j)] = v;
            second[(j, i)] = v;
            k += 1;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] = second[(i, j)] - mean[i] * mean[j];
        }
    }
    for i in 0..d {
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }
    // first-order propagation of the integral error bound through the ratios
    let mean_error = DVector::from_fn(d, |i, _| (e_int + mean[i].abs() * e_int) / mass);
    let cov_error = DMatrix::from_fn(d, d, |i, j| {
        let e2 = (e_int + second[(i, j)].abs() * e_int) / mass;
        e2 + mean[i].abs() * mean_error[j] + mean[j].abs() * mean_error[i]
    });
    Ok(BoxMoments {
        mean,
        cov,
        mass,
        mean_error,
        cov_error,
        method,
    })
}

/// Truncated moments by adaptive quadrature; supports dimensions 1-3.
pub fn box_moments_quadrature(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    cfg: &BoxConfig,
) -> Result<BoxMoments> {
    let d = marginal.len();
    if bounds.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for {} variables",
            bounds.len(),
            d
        )));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::DimensionMismatch(format!(
            "quadrature supports 1-3 dimensions, got {d}"
        )));
    }
    let tol = cfg.quad_tol;
    let raw = match d {
        1 => quad_1d(marginal, bounds, tol, cfg.quad_budget),
        2 => quad_2d(marginal, bounds, tol, cfg.quad_budget),
        _ => quad_3d(marginal, bounds, tol, cfg.quad_budget),
    };
    match raw {
        Some(raw) => assemble(d, &raw, tol, MomentMethod::Quadrature),
        None => Err(Error::ZeroMassBox),
    }
}

fn quad_1d(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    tol: f64,
    budget: usize,
) -> Option<RawIntegrals> {
    let mu = marginal.mean()[0];
    let var = marginal.cov()[(0, 0)].max(0.0);
    let sigma = var.sqrt().max(1e-300);
    let (a, b) = clip_window(bounds[0].0, bounds[0].1, mu, sigma)?;
    let inv_sigma = 1.0 / sigma;
    let out = integrate(
        |x, y| {
            let pdf = norm_pdf((x - mu) * inv_sigma) * inv_sigma;
            y[0] = pdf;
            y[1] = pdf * x;
            y[2] = pdf * x * x;
        },
        3,
        a,
        b,
        tol,
        budget,
    );
    Some(RawIntegrals {
        values: out.value,
        error: out.error,
        converged: out.converged,
    })
}

fn quad_2d(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    tol: f64,
    budget: usize,
) -> Option<RawIntegrals> {
    let mu = marginal.mean();
    let cov = marginal.cov();
    let s11 = cov[(0, 0)].max(0.0);
    let sigma1 = s11.sqrt().max(1e-300);
    let (a1, b1) = clip_window(bounds[0].0, bounds[0].1, mu[0], sigma1)?;
    let slope = cov[(0, 1)] / s11.max(1e-300);
    let v2 = (cov[(1, 1)] - cov[(0, 1)] * slope).max(0.0);
    let (lo2, hi2) = bounds[1];
    let inv_sigma1 = 1.0 / sigma1;
    let out = integrate(
        |x1, y| {
            let pdf1 = norm_pdf((x1 - mu[0]) * inv_sigma1) * inv_sigma1;
            let m2 = mu[1] + slope * (x1 - mu[0]);
            let (tm, tv, z) = truncated_scalar(m2, v2, lo2, hi2);
            let w = pdf1 * z;
            y[0] = w;
            y[1] = w * x1;
            y[2] = w * tm;
            y[3] = w * x1 * x1;
            y[4] = w * x1 * tm;
            y[5] = w * (tv + tm * tm);
        },
        component_count(2),
        a1,
        b1,
        tol,
        budget,
    );
    Some(RawIntegrals {
        values: out.value,
        error: out.error,
        converged: out.converged,
    })
}

fn quad_3d(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    tol: f64,
    budget: usize,
) -> Option<RawIntegrals> {
    let mu = marginal.mean();
    let cov = marginal.cov();
    let s11 = cov[(0, 0)].max(0.0);
    let sigma1 = s11.sqrt().max(1e-300);
    let (a1, b1) = clip_window(bounds[0].0, bounds[0].1, mu[0], sigma1)?;

    // (x2, x3) | x1 has mean shifting linearly in x1 and a constant covariance
    let inv_s11 = 1.0 / s11.max(1e-300);
    let g2 = cov[(0, 1)] * inv_s11;
    let g3 = cov[(0, 2)] * inv_s11;
    let c22 = (cov[(1, 1)] - cov[(0, 1)] * g2).max(0.0);
    let c23 = cov[(1, 2)] - cov[(0, 2)] * g2;
    let c33 = (cov[(2, 2)] - cov[(0, 2)] * g3).max(0.0);
    // x3 | x1, x2
    let slope32 = if c22 > 0.0 { c23 / c22 } else { 0.0 };
    let v3 = (c33 - slope32 * c23).max(0.0);
    let sigma2 = c22.sqrt().max(1e-300);

    let (lo2, hi2) = bounds[1];
    let (lo3, hi3) = bounds[2];
    let inv_sigma1 = 1.0 / sigma1;
    let inner_tol = tol * 0.25;
    let inner_budget = budget;
    let mut inner_error_max = 0.0f64;
    let mut inner_converged = true;

    let out = integrate(
        |x1, y| {
            let pdf1 = norm_pdf((x1 - mu[0]) * inv_sigma1) * inv_sigma1;
            let m2 = mu[1] + g2 * (x1 - mu[0]);
            let m3_base = mu[2] + g3 * (x1 - mu[0]);
            y.fill(0.0);
            let Some((a2, b2)) = clip_window(lo2, hi2, m2, sigma2) else {
                return;
            };
            let inv_sigma2 = 1.0 / sigma2;
            let inner = integrate(
                |x2, g| {
                    let pdf2 = norm_pdf((x2 - m2) * inv_sigma2) * inv_sigma2;
                    let m3 = m3_base + slope32 * (x2 - m2);
                    let (tm, tv, z) = truncated_scalar(m3, v3, lo3, hi3);
                    let w = pdf2 * z;
                    g[0] = w;
                    g[1] = w * x2;
                    g[2] = w * x2 * x2;
                    g[3] = w * tm;
                    g[4] = w * x2 * tm;
                    g[5] = w * (tv + tm * tm);
                },
                6,
                a2,
                b2,
                inner_tol,
                inner_budget,
            );
            inner_error_max = inner_error_max.max(inner.error);
            inner_converged &= inner.converged;
            let g = &inner.value;
            // order: Z, E1, E2, E3, M11, M12, M13, M22, M23, M33
            y[0] = pdf1 * g[0];
            y[1] = pdf1 * g[0] * x1;
            y[2] = pdf1 * g[1];
            y[3] = pdf1 * g[3];
            y[4] = pdf1 * g[0] * x1 * x1;
            y[5] = pdf1 * g[1] * x1;
            y[6] = pdf1 * g[3] * x1;
            y[7] = pdf1 * g[2];
            y[8] = pdf1 * g[4];
            y[9] = pdf1 * g[5];
        },
        component_count(3),
        a1,
        b1,
        tol,
        budget,
    );
    Some(RawIntegrals {
        values: out.value,
        error: out.error + inner_error_max,
        converged: out.converged && inner_converged,
    })
}

/// Lower-triangular factor with `L L' ~= m`, tolerating rank deficiency by
/// zeroing the affected columns.
fn tri_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let scale = (0..n).fold(0.0f64, |a, i| a.max(m[(i, i)].abs())).max(1e-300);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > 1e-12 * scale {
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
    }
    l
}

const HALTON_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(base: u64, mut i: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Truncated moments by quasi-Monte Carlo separation-of-variables sampling
/// with randomized (Cranley-Patterson) shifts; error estimates are standard
/// errors across the shifts. Works in any dimension.
pub fn box_moments_qmc(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    cfg: &BoxConfig,
) -> Result<BoxMoments> {
    use rand::{Rng, SeedableRng};
    let d = marginal.len();
    if bounds.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for {} variables",
            bounds.len(),
            d
        )));
    }
    if d > HALTON_PRIMES.len() {
        return Err(Error::DimensionMismatch(format!(
            "box dimension {d} exceeds the QMC limit of {}",
            HALTON_PRIMES.len()
        )));
    }
    let mu = marginal.mean();
    let l = tri_factor(marginal.cov());
    let diag_scale = (0..d)
        .fold(0.0f64, |a, i| a.max(marginal.cov()[(i, i)]))
        .sqrt();
    let det_tol = 1e-10 * diag_scale.max(1e-300);

    let shifts = cfg.mc_shifts.max(2);
    let n_per = (cfg.mc_draws / shifts).max(1);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut mass_k = Vec::with_capacity(shifts);
    let mut mean_k: Vec<DVector<f64>> = Vec::with_capacity(shifts);
    let mut cov_k: Vec<DMatrix<f64>> = Vec::with_capacity(shifts);
    let mut e = vec![0.0f64; d];
    let mut x = vec![0.0f64; d];

    for _ in 0..shifts {
        let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let mut sw = 0.0;
        let mut swx = DVector::<f64>::zeros(d);
        let mut swxx = DMatrix::<f64>::zeros(d, d);
        for t in 0..n_per {
            let idx = (t + 1) as u64;
            let mut w = 1.0;
            for i in 0..d {
                let mut shifted = radical_inverse(HALTON_PRIMES[i], idx) + shift[i];
                if shifted >= 1.0 {
                    shifted -= 1.0;
                }
                let mut center = mu[i];
                for k in 0..i {
                    center += l[(i, k)] * e[k];
                }
                let lii = l[(i, i)];
                if lii <= det_tol {
                    // deterministic coordinate: weight by box membership
                    let tol = 1e-9 * diag_scale.max(1.0);
                    if center < bounds[i].0 - tol || center > bounds[i].1 + tol {
                        w = 0.0;
                    }
                    e[i] = 0.0;
                    x[i] = center;
                    if w == 0.0 {
                        break;
                    }
                    continue;
                }
                let a = if bounds[i].0 == f64::NEG_INFINITY {
                    0.0
                } else {
                    norm_cdf((bounds[i].0 - center) / lii)
                };
                let b = if bounds[i].1 == f64::INFINITY {
                    1.0
                } else {
                    norm_cdf((bounds[i].1 - center) / lii)
                };
                let p = b - a;
                if p <= 0.0 {
                    w = 0.0;
                    break;
                }
                w *= p;
                let u = (a + shifted * p).clamp(1e-16, 1.0 - 1e-16);
                e[i] = norm_quantile(u);
                x[i] = center + lii * e[i];
            }
            if w > 0.0 {
                sw += w;
                for i in 0..d {
                    swx[i] += w * x[i];
                    for j in 0..d {
                        swxx[(i, j)] += w * x[i] * x[j];
                    }
                }
            }
        }
        let z = sw / n_per as f64;
        mass_k.push(z);
        if sw > 0.0 {
            let m = &swx / sw;
            let mut c = &swxx / sw;
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] -= m[i] * m[j];
                }
            }
            mean_k.push(m);
            cov_k.push(c);
        } else {
            mean_k.push(DVector::zeros(d));
            cov_k.push(DMatrix::zeros(d, d));
        }
    }

    let kf = shifts as f64;
    let mass: f64 = mass_k.iter().sum::<f64>() / kf;
    if !(mass > ZERO_MASS) {
        return Err(Error::ZeroMassBox);
    }
    let mean = mean_k.iter().fold(DVector::zeros(d), |a, m| a + m) / kf;
    let cov = cov_k.iter().fold(DMatrix::zeros(d, d), |a, c| a + c) / kf;
    let mean_error = DVector::from_fn(d, |i, _| {
        let v = mean_k.iter().map(|m| (m[i] - mean[i]).powi(2)).sum::<f64>() / (kf - 1.0);
        (v / kf).sqrt()
    });
    let cov_error = DMatrix::from_fn(d, d, |i, j| {
        let v = cov_k
            .iter()
            .map(|c| (c[(i, j)] - cov[(i, j)]).powi(2))
            .sum::<f64>()
            / (kf - 1.0);
        (v / kf).sqrt()
    });
    Ok(BoxMoments {
        mean,
        cov,
        mass: mass.min(1.0),
        mean_error,
        cov_error,
        method: MomentMethod::QuasiMonteCarlo,
    })
}

/// Truncated moments via the accuracy ladder: closed form in dimension 1,
/// adaptive quadrature in dimensions 2-3, quasi-Monte Carlo above.
pub fn box_moments(
    marginal: &GaussianMoments,
    bounds: &[(f64, f64)],
    cfg: &BoxConfig,
) -> Result<BoxMoments> {
    let d = marginal.len();
    if bounds.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for {} variables",
            bounds.len(),
            d
        )));
    }
    if d == 0 {
        return Ok(BoxMoments {
            mean: DVector::zeros(0),
            cov: DMatrix::zeros(0, 0),
            mass: 1.0,
            mean_error: DVector::zeros(0),
            cov_error: DMatrix::zeros(0, 0),
            method: MomentMethod::ClosedForm,
        });
    }
    match d {
        1 => {
            let mu = marginal.mean()[0];
            let var = marginal.cov()[(0, 0)].max(0.0);
            let (mean, v, mass) = truncated_scalar(mu, var, bounds[0].0, bounds[0].1);
            if !(mass > ZERO_MASS) {
                return Err(Error::ZeroMassBox);
            }
            let sigma = var.sqrt();
            Ok(BoxMoments {
                mean: DVector::from_element(1, mean),
                cov: DMatrix::from_element(1, 1, v),
                mass: mass.min(1.0),
                mean_error: DVector::from_element(1, 1e-14 * (mean.abs() + sigma)),
                cov_error: DMatrix::from_element(1, 1, 1e-14 * var.max(1.0)),
                method: MomentMethod::ClosedForm,
            })
        }
        2 | 3 => box_moments_quadrature(marginal, bounds, cfg),
        _ => box_moments_qmc(marginal, bounds, cfg),
    }
}
