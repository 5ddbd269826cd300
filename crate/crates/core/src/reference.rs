//! Gaussian and Gumbel copulas, and the extreme-value (Pickands) form of
//! the Gumbel family.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaEvaluator;
use crate::distributions::sample_exp1;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::special::{bivariate_normal_cdf, std_normal_cdf, std_normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub r12: f64,
}

impl GaussianParams {
    pub fn new(r12: f64) -> Result<Self> {
        if !(r12.abs() < 1.0) {
            return Err(Error::domain(format!(
                "Gaussian correlation must lie in (-1, 1), got {r12}"
            )));
        }
        Ok(GaussianParams { r12 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub theta: f64,
}

impl GumbelParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 1.0) || !theta.is_finite() {
            return Err(Error::domain(format!(
                "Gumbel parameter must be >= 1, got {theta}"
            )));
        }
        Ok(GumbelParams { theta })
    }
}

/// `Φ₂(Φ⁻¹(u), Φ⁻¹(v); r)`, with exact values on the boundary of the square.
pub fn gauss_cdf(p: &GaussianParams, u: f64, v: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return v.min(1.0);
    }
    if v >= 1.0 {
        return u;
    }
    if p.r12 == 0.0 {
        return u * v;
    }
    // Interior arguments keep the quantiles finite.
    let x = std_normal_quantile(u).unwrap_or(0.0);
    let y = std_normal_quantile(v).unwrap_or(0.0);
    bivariate_normal_cdf(x, y, p.r12)
        .unwrap_or(0.0)
        .clamp(0.0, u.min(v))
}

/// `R₁₂ = sin(πτ̂/2)`.
pub fn gauss_fit_from_tau(tau_hat: f64) -> Result<GaussianParams> {
    if tau_hat.is_nan() || tau_hat.abs() >= 1.0 {
        return Err(Error::fit(format!(
            "a Gaussian copula needs |tau| < 1, got tau = {tau_hat}"
        )));
    }
    GaussianParams::new((FRAC_PI_2 * tau_hat).sin())
}

pub fn gauss_sample<R: Rng + ?Sized>(p: &GaussianParams, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let r = p.r12;
    let c = (1.0 - r * r).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (std_normal_cdf(z1), std_normal_cdf(r * z1 + c * z2))
        })
        .collect()
}

/// `exp(−[(−ln u)^θ + (−ln v)^θ]^{1/θ})`.
pub fn gumbel_cdf(p: &GumbelParams, u: f64, v: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return v.min(1.0);
    }
    if v >= 1.0 {
        return u;
    }
    let theta = p.theta;
    let a = -u.ln();
    let b = -v.ln();
    // Factor out the larger term to avoid overflow for large θ.
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let sum = hi * (1.0 + (lo / hi).powf(theta)).powf(1.0 / theta);
    (-sum).exp()
}

/// `θ = 1/(1 − τ̂)`.
pub fn gumbel_fit_from_tau(tau_hat: f64) -> Result<GumbelParams> {
    if !(0.0..1.0).contains(&tau_hat) {
        return Err(Error::fit(format!(
            "a Gumbel copula needs 0 <= tau < 1, got tau = {tau_hat}"
        )));
    }
    GumbelParams::new(1.0 / (1.0 - tau_hat))
}

/// Upper tail dependence `2 − 2^{1/θ}`.
pub fn gumbel_lambda_u(p: &GumbelParams) -> f64 {
    2.0 - 2f64.powf(1.0 / p.theta)
}

/// Positive stable variable with Laplace transform `exp(−t^a)`, `0 < a < 1`
/// (Chambers–Mallows–Stuck / Kanter).
fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e = sample_exp1(rng);
    let ln_s = (a * u).sin().ln() - (u.sin().ln()) / a
        + (1.0 - a) / a * (((1.0 - a) * u).sin().ln() - e.ln());
    ln_s.exp()
}

/// Gumbel pairs from the frailty construction `U_i = exp(−(E_i/S)^{1/θ})`.
pub fn gumbel_sample<R: Rng + ?Sized>(p: &GumbelParams, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let a = 1.0 / p.theta;
    (0..n)
        .map(|_| {
            if p.theta == 1.0 {
                return ((-sample_exp1(rng)).exp(), (-sample_exp1(rng)).exp());
            }
            let s = positive_stable(a, rng);
            let e1 = sample_exp1(rng);
            let e2 = sample_exp1(rng);
            ((-(e1 / s).powf(a)).exp(), (-(e2 / s).powf(a)).exp())
        })
        .collect()
}

/// Pickands dependence function of the Gumbel copula,
/// `A(t) = (t^θ + (1 − t)^θ)^{1/θ}`.
pub fn pickands_gumbel(theta: f64, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    (t.powf(theta) + (1.0 - t).powf(theta)).powf(1.0 / theta)
}

/// `A′(t)` for the Gumbel Pickands function.
pub fn pickands_gumbel_derivative(theta: f64, t: f64) -> f64 {
    let s = t.powf(theta) + (1.0 - t).powf(theta);
    s.powf(1.0 / theta - 1.0) * (t.powf(theta - 1.0) - (1.0 - t).powf(theta - 1.0))
}

/// Kendall's tau of an extreme-value copula, `∫₀¹ t(1−t)/A(t) dA′(t)`,
/// evaluated for the Gumbel `A` after integrating by parts:
/// `−∫ A′(t) · d/dt[t(1−t)/A(t)] dt` over `[1e-8, 1 − 1e-8]`.
pub fn ev_kendall_tau(theta: f64) -> Result<f64> {
    GumbelParams::new(theta)?;
    let eps = 1e-8;
    let rule = GaussLegendre::cached(20);
    let integrand = |t: f64| {
        let a = pickands_gumbel(theta, t);
        let da = pickands_gumbel_derivative(theta, t);
        let dg = ((1.0 - 2.0 * t) * a - t * (1.0 - t) * da) / (a * a);
        -da * dg
    };
    Ok(rule.integrate_composite(eps, 1.0 - eps, 64, integrand))
}

/// Gaussian copula evaluator.
#[derive(Debug, Clone, Copy)]
pub struct GaussianCopula(GaussianParams);

impl GaussianCopula {
    pub fn new(p: GaussianParams) -> Self {
        GaussianCopula(p)
    }
}

impl CopulaEvaluator for GaussianCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        gauss_cdf(&self.0, u, v)
    }
}

/// Gumbel copula evaluator.
#[derive(Debug, Clone, Copy)]
pub struct GumbelCopula(GumbelParams);

impl GumbelCopula {
    pub fn new(p: GumbelParams) -> Self {
        GumbelCopula(p)
    }
}

impl CopulaEvaluator for GumbelCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        gumbel_cdf(&self.0, u, v)
    }
}
