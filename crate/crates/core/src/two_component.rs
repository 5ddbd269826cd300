//! The two-component copula.
//!
//! Losses are modelled as `X_i = σ_i · W · Y_i` with a common shock
//! `W ~ Exp(1)` and independent business factors `1/Y_i ~ Gamma(α_i, 1)`, so
//! each margin is Pareto II(σ_i, α_i). Conditioning on `W` gives, on the
//! open square,
//!
//! ```text
//! C(u, v) = u + v − 1 + ∫₀^∞ P(α₁, w·s(u)) · P(α₂, w·r(v)) · e^{−w} dw
//! s(u) = 1 / ((1 − u)^{−1/α₁} − 1),   r(v) = 1 / ((1 − v)^{−1/α₂} − 1)
//! ```
//!
//! where `P` is the regularized lower incomplete gamma function. The scale
//! parameters σ_i do not enter the copula.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaEvaluator;
use crate::distributions::{fit_gpd_mle, sample_exp1, sample_gamma, GpdFit};
use crate::empirical::{LossSample, PseudoSample};
use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::quadrature::trapezoid_log_half_line;
use crate::special::{ln_beta, ln_gamma, GammaCdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoComponentParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl TwoComponentParams {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0) || !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(Error::domain(format!(
                "two-component copula requires alpha1, alpha2 > 0, got ({alpha1}, {alpha2})"
            )));
        }
        Ok(TwoComponentParams { alpha1, alpha2 })
    }
}

/// Parameters of the loss model `X_i = σ_i W Y_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub tc: TwoComponentParams,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ModelParams {
    pub fn new(alpha1: f64, alpha2: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        let tc = TwoComponentParams::new(alpha1, alpha2)?;
        if !(sigma1 > 0.0 && sigma2 > 0.0) || !sigma1.is_finite() || !sigma2.is_finite() {
            return Err(Error::domain(format!(
                "model scales must be positive, got ({sigma1}, {sigma2})"
            )));
        }
        Ok(ModelParams { tc, sigma1, sigma2 })
    }
}

/// `ln(e^x − 1)` for `x > 0` without overflow.
fn ln_expm1(x: f64) -> f64 {
    if x > 36.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

// Below this, ln of the integrand bound is treated as negligible.
const LN_NEGLIGIBLE: f64 = -39.0;
// e^{-w}·w is below 2e-16 past w = 40.
const LN_W_MAX: f64 = 3.69;

/// Evaluator for one parameter pair, with the gamma laws and density
/// normalizer precomputed.
#[derive(Debug, Clone)]
pub struct TwoComponentCopula {
    params: TwoComponentParams,
    g1: GammaCdf,
    g2: GammaCdf,
    ln_gamma1_plus1: f64,
    ln_gamma2_plus1: f64,
    ln_norm: f64,
    step: f64,
}

impl TwoComponentCopula {
    pub fn new(params: TwoComponentParams) -> Result<Self> {
        let TwoComponentParams { alpha1, alpha2 } =
            TwoComponentParams::new(params.alpha1, params.alpha2)?;
        let ln_norm = (alpha1 + alpha2 + 1.0).ln() + ln_beta(alpha1 + 1.0, alpha2 + 1.0)?;
        // The gamma CDFs switch over a width of order 1/√α in ln w.
        let step = 0.3 / alpha1.max(alpha2).max(1.0).sqrt();
        Ok(TwoComponentCopula {
            params,
            g1: GammaCdf::new(alpha1)?,
            g2: GammaCdf::new(alpha2)?,
            ln_gamma1_plus1: ln_gamma(alpha1 + 1.0)?,
            ln_gamma2_plus1: ln_gamma(alpha2 + 1.0)?,
            ln_norm,
            step,
        })
    }

    pub fn params(&self) -> TwoComponentParams {
        self.params
    }

    /// Lower end of the `ln w` window: the integrand is bounded by
    /// `w · min(1, (sw)^{α₁}/Γ(α₁+1)) · min(1, (rw)^{α₂}/Γ(α₂+1))`, a concave
    /// piecewise-linear function in `ln w`; Newton steps on it land at or
    /// below the point where the bound reaches `LN_NEGLIGIBLE`.
    fn window_start(&self, ln_s: f64, ln_r: f64, extra_power: f64) -> f64 {
        let (a1, a2) = (self.params.alpha1, self.params.alpha2);
        let bound = |y: f64| {
            let p1 = a1 * (ln_s + y) - self.ln_gamma1_plus1;
            let p2 = a2 * (ln_r + y) - self.ln_gamma2_plus1;
            let value = (1.0 + extra_power) * y + p1.min(0.0) + p2.min(0.0) - LN_NEGLIGIBLE;
            let slope = 1.0
                + extra_power
                + if p1 < 0.0 { a1 } else { 0.0 }
                + if p2 < 0.0 { a2 } else { 0.0 };
            (value, slope)
        };
        let mut y = 0.0;
        for _ in 0..8 {
            let (value, slope) = bound(y);
            if value <= 0.0 {
                break;
            }
            y -= value / slope;
        }
        y.min(LN_W_MAX - 1.0)
    }

    /// `∫₀^∞ P(α₁, ws) P(α₂, wr) e^{−w} dw`, given `ln s` and `ln r`.
    fn joint_integral(&self, ln_s: f64, ln_r: f64) -> f64 {
        let (s, r) = (ln_s.exp(), ln_r.exp());
        let y_lo = self.window_start(ln_s, ln_r, 0.0);
        let cut1 = saturation_point(self.params.alpha1);
        let cut2 = saturation_point(self.params.alpha2);
        trapezoid_log_half_line(
            |w| {
                let x1 = w * s;
                let x2 = w * r;
                let p1 = if x1 > cut1 { 1.0 } else { self.g1.cdf(x1) };
                let p2 = if x2 > cut2 { 1.0 } else { self.g2.cdf(x2) };
                p1 * p2 * (-w).exp()
            },
            y_lo,
            LN_W_MAX,
            self.step,
        )
    }

    /// `ln s(u) = −ln((1−u)^{−1/α} − 1)`.
    fn ln_scale(u: f64, alpha: f64) -> f64 {
        -ln_expm1(-(-u).ln_1p() / alpha)
    }

    /// Copula CDF on `[0, 1]²`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return u.min(1.0);
        }
        if u >= 1.0 {
            return v;
        }
        let z = self.joint_integral(
            Self::ln_scale(u, self.params.alpha1),
            Self::ln_scale(v, self.params.alpha2),
        );
        (u + v - 1.0 + z).clamp(0.0, u.min(v))
    }

    /// `ln c(u, v)` from `l1 = ln(1−u)` and `l2 = ln(1−v)`.
    #[inline]
    pub fn ln_density_from_logs(&self, l1: f64, l2: f64) -> f64 {
        let TwoComponentParams {
            alpha1: a1,
            alpha2: a2,
        } = self.params;
        let e1 = -l1 / a1;
        let e2 = -l2 / a2;
        (1.0 / a1 + 1.0) * (-l1) + (1.0 / a2 + 1.0) * (-l2) + a2 * ln_expm1(e1) + a1 * ln_expm1(e2)
            - self.ln_norm
            - (a1 + a2 + 1.0) * ln_expm1(e1 + e2)
    }

    /// Copula density on the open square, evaluated in log space.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!(
                "two-component density is defined on the open unit square, got ({u}, {v})"
            )));
        }
        Ok(self.ln_density_from_logs((-u).ln_1p(), (-v).ln_1p()).exp())
    }

    /// The pre-limit upper tail dependence function at `t ∈ (0, 1/2]`:
    ///
    /// ```text
    /// t^{1/α₁−1}/α₁ ∫ f₁(w t^{1/α₁}) F₂(w t^{1/α₂}) w e^{−w} dw
    ///   + t^{1/α₂−1}/α₂ ∫ F₁(w t^{1/α₁}) f₂(w t^{1/α₂}) w e^{−w} dw
    /// ```
    pub fn lambda_u_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 0.5) {
            return Err(Error::domain(format!(
                "tail curve needs t in (0, 0.5], got {t}"
            )));
        }
        let TwoComponentParams {
            alpha1: a1,
            alpha2: a2,
        } = self.params;
        let ln_t = t.ln();
        let (ln_s, ln_r) = (ln_t / a1, ln_t / a2);
        let (s, r) = (ln_s.exp(), ln_r.exp());
        // The densities f_i carry one power less than F_i near zero, the
        // extra factor w adds one back.
        let y_lo = self.window_start(ln_s, ln_r, 0.0) - 40.0;
        let step = self.step.min(0.1);
        let first = trapezoid_log_half_line(
            |w| self.g1.pdf(w * s) * self.g2.cdf(w * r) * w * (-w).exp(),
            y_lo,
            LN_W_MAX + 0.5,
            step,
        );
        let second = trapezoid_log_half_line(
            |w| self.g1.cdf(w * s) * self.g2.pdf(w * r) * w * (-w).exp(),
            y_lo,
            LN_W_MAX + 0.5,
            step,
        );
        Ok(((1.0 / a1 - 1.0) * ln_t).exp() / a1 * first
            + ((1.0 / a2 - 1.0) * ln_t).exp() / a2 * second)
    }
}

/// Past this argument `P(α, x)` equals 1 to double precision.
fn saturation_point(alpha: f64) -> f64 {
    alpha + 12.0 * alpha.sqrt() + 40.0
}

impl CopulaEvaluator for TwoComponentCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        TwoComponentCopula::cdf(self, u, v)
    }
}

pub fn tc_cdf(p: &TwoComponentParams, u: f64, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!(
            "copula arguments must lie in [0, 1]², got ({u}, {v})"
        )));
    }
    Ok(TwoComponentCopula::new(*p)?.cdf(u, v))
}

pub fn tc_density(p: &TwoComponentParams, u: f64, v: f64) -> Result<f64> {
    TwoComponentCopula::new(*p)?.density(u, v)
}

/// Heuristic reading of the tail curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailVerdict {
    /// The curve decreases monotonically toward zero and its smallest-`t`
    /// value is below 1e-3.
    Zero,
    Undetermined,
}

impl TailVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            TailVerdict::Zero => "zero",
            TailVerdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    /// `(t, λ_U(t))`, sorted by increasing `t`.
    pub points: Vec<(f64, f64)>,
    pub verdict: TailVerdict,
}

/// `count` log-spaced points in `[t_min, t_max]`.
pub fn log_spaced_grid(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                t_max
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Default tail grid: 40 log-spaced points in `[1e-6, 0.5]`.
pub fn default_tail_grid() -> Vec<f64> {
    log_spaced_grid(1e-6, 0.5, 40)
}

pub fn tc_lambda_u_curve(p: &TwoComponentParams, t_grid: &[f64]) -> Result<TailCurve> {
    if t_grid.is_empty() {
        return Err(Error::domain("tail curve needs at least one grid point"));
    }
    let copula = TwoComponentCopula::new(*p)?;
    let mut points = t_grid
        .iter()
        .map(|&t| copula.lambda_u_at(t).map(|l| (t, l)))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = points.windows(2).all(|w| w[1].1 >= w[0].1);
    let verdict = if monotone && points[0].1 < 1e-3 {
        TailVerdict::Zero
    } else {
        TailVerdict::Undetermined
    };
    Ok(TailCurve { points, verdict })
}

/// `n` draws `(X₁, X₂) = (σ₁ W/G₁, σ₂ W/G₂)`, one shared `W` per pair.
pub fn tc_sample<R: Rng + ?Sized>(m: &ModelParams, n: usize, rng: &mut R) -> Result<LossSample> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let pairs = (0..n)
        .map(|_| {
            let w = sample_exp1(rng);
            let g1 = sample_gamma(m.tc.alpha1, rng);
            let g2 = sample_gamma(m.tc.alpha2, rng);
            (m.sigma1 * w / g1, m.sigma2 * w / g2)
        })
        .collect();
    LossSample::new(pairs)
}

/// `n` pairs with uniform margins and the two-component copula:
/// `U_i = 1 − (1 + W/G_i)^{−α_i}`, i.e. the Pareto II CDF applied to the
/// model draw with unit scale.
pub fn tc_sample_uniform<R: Rng + ?Sized>(
    p: &TwoComponentParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    Ok((0..n)
        .map(|_| {
            let w = sample_exp1(rng);
            let g1 = sample_gamma(p.alpha1, rng);
            let g2 = sample_gamma(p.alpha2, rng);
            (
                -(-p.alpha1 * (w / g1).ln_1p()).exp_m1(),
                -(-p.alpha2 * (w / g2).ln_1p()).exp_m1(),
            )
        })
        .collect())
}

/// Clayton copula CDF `(u^{−θ} + v^{−θ} − 1)^{−1/θ}`.
pub fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return v.min(1.0);
    }
    if v >= 1.0 {
        return u;
    }
    (u.powf(-theta) + v.powf(-theta) - 1.0).powf(-1.0 / theta)
}

/// Clayton pairs by the Marshall–Olkin construction: `S ~ Gamma(1/θ, 1)`,
/// `E_i ~ Exp(1)`, `U_i = (1 + E_i/S)^{−1/θ}`.
pub fn clayton_sample<R: Rng + ?Sized>(
    theta: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!(
            "Clayton parameter must be positive, got {theta}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    Ok((0..n)
        .map(|_| {
            let s = sample_gamma(1.0 / theta, rng);
            let e1 = sample_exp1(rng);
            let e2 = sample_exp1(rng);
            (
                (-(e1 / s).ln_1p() / theta).exp(),
                (-(e2 / s).ln_1p() / theta).exp(),
            )
        })
        .collect())
}

/// Margin-based estimate: `α̂_i = 1/ξ̂_i` from GPD fits of each margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginFit {
    pub params: TwoComponentParams,
    pub first: GpdFit,
    pub second: GpdFit,
}

pub fn tc_fit_margins(data: &LossSample) -> Result<MarginFit> {
    let first = fit_gpd_mle(&data.first())?;
    let second = fit_gpd_mle(&data.second())?;
    for (i, fit) in [(1, &first), (2, &second)] {
        if !(fit.params.xi > 0.0) {
            return Err(Error::fit(format!(
                "margin {i} has fitted xi = {:.6} <= 0; the two-component copula needs alpha > 0",
                fit.params.xi
            )));
        }
    }
    Ok(MarginFit {
        params: TwoComponentParams::new(1.0 / first.params.xi, 1.0 / second.params.xi)?,
        first,
        second,
    })
}

const ALPHA_BOX: (f64, f64) = (0.05, 100.0);

/// Maximum pseudo-likelihood: maximizes `Σ ln c(u_i, v_i)` over
/// `(α₁, α₂) ∈ [0.05, 100]²` with Nelder–Mead in log-parameter space,
/// restarted from (1, 1), the optional `hint`, and (5, 5).
pub fn tc_fit_pseudo_likelihood(
    ps: &PseudoSample,
    hint: Option<TwoComponentParams>,
) -> Result<TwoComponentParams> {
    if ps.len() < 10 {
        return Err(Error::domain(format!(
            "pseudo-likelihood fit needs at least 10 observations, got {}",
            ps.len()
        )));
    }
    let logs: Vec<(f64, f64)> = ps
        .pairs()
        .iter()
        .map(|&(u, v)| ((-u).ln_1p(), (-v).ln_1p()))
        .collect();
    let (lo, hi) = (ALPHA_BOX.0.ln(), ALPHA_BOX.1.ln());
    let objective = |x: &[f64]| -> f64 {
        if x.iter().any(|&c| !(lo..=hi).contains(&c)) {
            return f64::INFINITY;
        }
        let Ok(copula) = TwoComponentCopula::new(TwoComponentParams {
            alpha1: x[0].exp(),
            alpha2: x[1].exp(),
        }) else {
            return f64::INFINITY;
        };
        let total: f64 = logs
            .iter()
            .map(|&(l1, l2)| copula.ln_density_from_logs(l1, l2))
            .sum();
        if total.is_finite() {
            -total
        } else {
            f64::INFINITY
        }
    };

    let mut starts = vec![[0.0, 0.0]];
    if let Some(h) = hint {
        let clamp = |a: f64| a.ln().clamp(lo + 0.1, hi - 0.1);
        starts.push([clamp(h.alpha1), clamp(h.alpha2)]);
    }
    starts.push([5f64.ln(), 5f64.ln()]);

    let best = starts
        .iter()
        .map(|s| nelder_mead(objective, s, 0.3, 1e-6, 600))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::fit("no optimizer start"))?;
    if !best.value.is_finite() {
        return Err(Error::fit("pseudo-likelihood is not finite at any start"));
    }
    let edge = 1e-3;
    if best.point.iter().any(|&c| c - lo < edge || hi - c < edge) {
        return Err(Error::fit(format!(
            "pseudo-likelihood optimum at ({:.4}, {:.4}) lies on the search-box boundary [0.05, 100]",
            best.point[0].exp(),
            best.point[1].exp()
        )));
    }
    TwoComponentParams::new(best.point[0].exp(), best.point[1].exp())
}
