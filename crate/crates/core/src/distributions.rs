//! Univariate laws of the two-component model: Exp(1), Gamma(α, 1), the
//! generalized Pareto distribution with zero location, and Pareto type II.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{golden_section_max, safeguarded_newton};

/// Generalized Pareto parameters with the location fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    /// Shape ξ.
    pub xi: f64,
    /// Scale σ > 0.
    pub sigma: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !xi.is_finite() {
            return Err(Error::domain(format!(
                "GPD needs finite xi and sigma > 0, got xi={xi}, sigma={sigma}"
            )));
        }
        Ok(GpdParams { xi, sigma })
    }
}

/// Pareto type II (Lomax) parameters with the location fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoIIParams {
    pub sigma: f64,
    /// Tail index α = 1/ξ.
    pub alpha: f64,
}

impl ParetoIIParams {
    pub fn new(sigma: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0 && alpha > 0.0) || !sigma.is_finite() || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "Pareto II needs sigma > 0 and alpha > 0, got sigma={sigma}, alpha={alpha}"
            )));
        }
        Ok(ParetoIIParams { sigma, alpha })
    }
}

/// Result of a GPD maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub params: GpdParams,
    pub log_likelihood: f64,
    pub n: usize,
}

pub fn gpd_cdf(p: &GpdParams, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / p.sigma;
    if p.xi == 0.0 {
        return -(-z).exp_m1();
    }
    if p.xi < 0.0 && x >= -p.sigma / p.xi {
        return 1.0;
    }
    -(-(p.xi * z).ln_1p() / p.xi).exp_m1()
}

pub fn pareto2_cdf(p: &ParetoIIParams, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -(-p.alpha * (x / p.sigma).ln_1p()).exp_m1()
}

/// Inverse of [`pareto2_cdf`]: `σ((1−u)^{−1/α} − 1)`.
pub fn pareto2_quantile(p: &ParetoIIParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!(
            "pareto2_quantile requires 0 < u < 1, got {u}"
        )));
    }
    Ok(p.sigma * (-(-u).ln_1p() / p.alpha).exp_m1())
}

/// `GPD(ξ, 0, σ) ~ P(II)(0, σ/ξ, 1/ξ)` for ξ > 0.
pub fn pareto_from_gpd(g: &GpdParams) -> Result<ParetoIIParams> {
    if !(g.xi > 0.0) {
        return Err(Error::domain(format!(
            "GPD shape xi = {} is not positive; no Pareto II equivalent",
            g.xi
        )));
    }
    ParetoIIParams::new(g.sigma / g.xi, 1.0 / g.xi)
}

pub fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Gamma(`alpha`, 1) draw by Marsaglia–Tsang's squeeze method; for
/// `alpha < 1` a Gamma(`alpha + 1`) draw is scaled by `U^{1/alpha}`.
pub fn sample_gamma<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0);
    if alpha < 1.0 {
        let boost: f64 = Open01.sample(rng);
        let g = sample_gamma(alpha + 1.0, rng) * boost.powf(1.0 / alpha);
        return g.max(f64::MIN_POSITIVE);
    }
    let d = alpha - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = Open01.sample(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

fn gpd_log_likelihood(data: &[f64], xi: f64, sigma: f64) -> f64 {
    let n = data.len() as f64;
    if xi.abs() < 1e-12 {
        return -n * sigma.ln() - data.iter().sum::<f64>() / sigma;
    }
    let mut acc = 0.0;
    for &x in data {
        let t = xi * x / sigma;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln_1p();
    }
    -n * sigma.ln() - (1.0 + 1.0 / xi) * acc
}

/// Maximizes the likelihood over σ for fixed ξ. The score in `ln σ`,
/// `−n + Σ (1+ξ) y/(1+ξy)` with `y = x/σ`, is strictly decreasing, so the
/// root is unique and bracketed.
fn profile_ln_sigma(data: &[f64], xi: f64, max_x: f64, start: f64) -> f64 {
    let n = data.len() as f64;
    if xi.abs() < 1e-12 {
        return (data.iter().sum::<f64>() / n).ln();
    }
    let score = |ln_sigma: f64| {
        let inv_sigma = (-ln_sigma).exp();
        let (mut value, mut slope) = (-n, 0.0);
        for &x in data {
            let y = x * inv_sigma;
            let denom = 1.0 + xi * y;
            value += (1.0 + xi) * y / denom;
            slope -= (1.0 + xi) * y / (denom * denom);
        }
        (value, slope)
    };
    let mut lo = if xi < 0.0 {
        (-xi * max_x).ln() + 1e-12
    } else {
        start - 1.0
    };
    while xi > 0.0 && score(lo).0 <= 0.0 {
        lo -= 2.0;
    }
    let mut hi = start.max(lo) + 1.0;
    while score(hi).0 >= 0.0 {
        hi += 2.0;
    }
    safeguarded_newton(score, lo, hi, start.clamp(lo, hi), 1e-12)
}

const XI_MIN: f64 = -0.99;
const XI_MAX: f64 = 5.0;
const XI_GRID: usize = 60;

/// Maximum-likelihood fit of GPD(ξ, 0, σ).
///
/// The likelihood is profiled over ξ ∈ (−0.99, 5]: a grid locates the peak,
/// golden-section search refines ξ to 1e-8, and σ is solved from its score
/// equation at each ξ.
pub fn fit_gpd_mle(data: &[f64]) -> Result<GpdFit> {
    if data.len() < 10 {
        return Err(Error::domain(format!(
            "GPD fit needs at least 10 observations, got {}",
            data.len()
        )));
    }
    if let Some(bad) = data.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::domain(format!(
            "GPD fit needs positive finite data, got {bad}"
        )));
    }
    let max_x = data.iter().cloned().fold(f64::MIN, f64::max);
    let min_x = data.iter().cloned().fold(f64::MAX, f64::min);
    if max_x == min_x {
        return Err(Error::fit(
            "all observations are equal; GPD fit is degenerate",
        ));
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;

    let profile = |xi: f64| -> (f64, f64) {
        let ln_sigma = profile_ln_sigma(data, xi, max_x, mean.ln());
        (gpd_log_likelihood(data, xi, ln_sigma.exp()), ln_sigma)
    };

    let step = (XI_MAX - XI_MIN) / XI_GRID as f64;
    let grid: Vec<f64> = (1..=XI_GRID).map(|i| XI_MIN + i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&xi| profile(xi).0).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::fit("GPD likelihood is not finite anywhere on the shape grid"))?;
    if best == 0 || best == XI_GRID - 1 {
        return Err(Error::fit(format!(
            "GPD likelihood maximum not bracketed inside xi in ({XI_MIN}, {XI_MAX}]"
        )));
    }

    let lo = grid[best - 1];
    let hi = grid[best + 1];
    let (xi, _) = golden_section_max(|xi| profile(xi).0, lo, hi, 1e-8);
    let (log_likelihood, ln_sigma) = profile(xi);
    if !log_likelihood.is_finite() {
        return Err(Error::fit("GPD likelihood is not finite at the optimum"));
    }
    Ok(GpdFit {
        params: GpdParams::new(xi, ln_sigma.exp())?,
        log_likelihood,
        n: data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::{prop_assert, proptest};

    fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gpd_cdf_fixtures() {
        let p = GpdParams::new(1.0, 1.0).unwrap();
        assert!((gpd_cdf(&p, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(gpd_cdf(&GpdParams::new(0.0, 2.0).unwrap(), 0.0), 0.0);
        let p = GpdParams::new(0.5, 1.0).unwrap();
        assert!((gpd_cdf(&p, 3.0) - 0.84).abs() < 1e-15);
        let exp = GpdParams::new(0.0, 2.0).unwrap();
        assert!((gpd_cdf(&exp, 3.0) - (1.0 - (-1.5f64).exp())).abs() < 1e-15);
        let bounded = GpdParams::new(-0.5, 1.0).unwrap();
        assert_eq!(gpd_cdf(&bounded, 2.0), 1.0);
        assert_eq!(gpd_cdf(&bounded, 5.0), 1.0);
        assert!(GpdParams::new(0.1, 0.0).is_err());
    }

    #[test]
    fn pareto_fixtures() {
        let p = ParetoIIParams::new(1.0, 1.0).unwrap();
        assert!((pareto2_cdf(&p, 1.0) - 0.5).abs() < 1e-15);
        assert!((pareto2_quantile(&p, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pareto2_cdf(&p, 0.0), 0.0);
        assert!(pareto2_quantile(&p, 0.0).is_err());
        assert!(pareto2_quantile(&p, 1.0).is_err());
    }

    #[test]
    fn pareto_from_gpd_fixtures() {
        let p = pareto_from_gpd(&GpdParams::new(0.5, 1.0).unwrap()).unwrap();
        assert_eq!((p.sigma, p.alpha), (2.0, 2.0));
        let p = pareto_from_gpd(&GpdParams::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!((p.sigma, p.alpha), (1.0, 1.0));
        assert!(pareto_from_gpd(&GpdParams::new(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn exp_and_gamma_sample_means() {
        let n = 100_000;
        let mut rng = StreamRng::from_seed(11);
        let mean: f64 = (0..n).map(|_| sample_exp1(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        for alpha in [0.3, 1.0, 2.5, 17.0] {
            let mean: f64 = (0..n).map(|_| sample_gamma(alpha, &mut rng)).sum::<f64>() / n as f64;
            let band = 3.0 * alpha.sqrt() / (n as f64).sqrt();
            assert!((mean - alpha).abs() < band, "alpha={alpha}: {mean}");
        }
        let a: Vec<f64> = {
            let mut r = StreamRng::from_seed(5);
            (0..10).map(|_| sample_gamma(1.7, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = StreamRng::from_seed(5);
            (0..10).map(|_| sample_gamma(1.7, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn feller_pareto_construction_matches_pareto_cdf() {
        // σ·(U1/U2) with U1 ~ Γ(1,1), U2 ~ Γ(α,1) is Pareto II(σ, α).
        let n = 10_000;
        let (sigma, alpha) = (1.5, 2.3);
        let mut rng = StreamRng::from_seed(2024);
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sigma * sample_gamma(1.0, &mut rng) / sample_gamma(alpha, &mut rng))
            .collect();
        let p = ParetoIIParams::new(sigma, alpha).unwrap();
        let d = ks_distance(&mut xs, |x| pareto2_cdf(&p, x));
        assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn gpd_mle_recovers_pareto_and_exponential() {
        let n = 10_000;
        let mut rng = StreamRng::from_seed(99);
        let p = ParetoIIParams::new(1.0, 2.0).unwrap();
        let data: Vec<f64> = (0..n)
            .map(|_| pareto2_quantile(&p, rng.sample::<f64, _>(Open01)).unwrap())
            .collect();
        let fit = fit_gpd_mle(&data).unwrap();
        assert!((fit.params.xi - 0.5).abs() < 0.05, "{fit:?}");
        assert!((fit.params.sigma - 0.5).abs() < 0.1, "{fit:?}");
        let truth = gpd_log_likelihood(&data, 0.5, 0.5);
        assert!(fit.log_likelihood >= truth);

        let data: Vec<f64> = (0..n).map(|_| sample_exp1(&mut rng)).collect();
        let fit = fit_gpd_mle(&data).unwrap();
        assert!(fit.params.xi.abs() < 0.05, "{fit:?}");
        assert!(fit.log_likelihood >= gpd_log_likelihood(&data, 0.0, 1.0));
    }

    #[test]
    fn gpd_mle_rejects_degenerate_input() {
        assert!(matches!(fit_gpd_mle(&[2.0; 20]), Err(Error::Fit(_))));
        assert!(matches!(fit_gpd_mle(&[1.0, 2.0]), Err(Error::Domain(_))));
        let mut with_zero = vec![1.0; 15];
        with_zero[3] = 0.0;
        assert!(fit_gpd_mle(&with_zero).is_err());
    }

    proptest! {
        #[test]
        fn gpd_and_mapped_pareto_agree(xi in 0.01f64..3.0, sigma in 0.01f64..10.0, x in 0.0f64..1e4) {
            let g = GpdParams::new(xi, sigma).unwrap();
            let p = pareto_from_gpd(&g).unwrap();
            let a = gpd_cdf(&g, x);
            let b = pareto2_cdf(&p, x);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }

        #[test]
        fn pareto_quantile_inverts_cdf(sigma in 0.01f64..10.0, alpha in 0.05f64..50.0, u in 1e-9f64..0.999_999) {
            let p = ParetoIIParams::new(sigma, alpha).unwrap();
            let x = pareto2_quantile(&p, u).unwrap();
            prop_assert!((pareto2_cdf(&p, x) - u).abs() < 1e-12);
            let x2 = pareto2_quantile(&p, u * 1.000_001).unwrap();
            prop_assert!(x2 > x);
        }

        #[test]
        fn mle_beats_true_parameters(seed in 0u64..40) {
            let mut rng = StreamRng::from_seed(seed);
            let p = ParetoIIParams::new(0.7, 1.6).unwrap();
            let data: Vec<f64> = (0..400)
                .map(|_| pareto2_quantile(&p, rng.sample::<f64, _>(Open01)).unwrap())
                .collect();
            let fit = fit_gpd_mle(&data).unwrap();
            let truth = gpd_log_likelihood(&data, 1.0 / 1.6, 0.7 / 1.6);
            prop_assert!(fit.log_likelihood >= truth - 1e-9);
        }
    }
}
