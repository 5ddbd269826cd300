//! Numerical integration rules shared by the copula and special-function code.
//!
//! Three tools live here:
//!
//! - fixed-order Gauss–Legendre rules (nodes computed by Newton iteration on
//!   the Legendre recurrence, cached per order),
//! - an adaptive Gauss–Kronrod (7/15) integrator for finite intervals,
//! - a trapezoidal rule in logarithmic coordinates for integrals over
//!   `[0, ∞)`. After the substitution `w = e^y` an integrand that is analytic
//!   in `w > 0` and decays at both ends becomes analytic on the whole real
//!   line, where the trapezoidal rule converges geometrically in the step.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared, lazily computed rule of order `n`.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
    }

    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * width;
                self.integrate(lo, lo + width, &f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
///
/// Intervals are bisected until the Kronrod/Gauss difference on each piece is
/// below its share of `abs_tol`, or the recursion reaches `max_depth`.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        max_depth: u32,
    ) -> f64 {
        let (value, err) = gk15(f, a, b);
        if err <= tol || depth >= max_depth || !err.is_finite() {
            return value;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, 0.5 * tol, depth + 1, max_depth)
            + recurse(f, mid, b, 0.5 * tol, depth + 1, max_depth)
    }
    if a == b {
        return 0.0;
    }
    recurse(&f, a, b, abs_tol, 0, max_depth)
}

/// Adaptive integration over a sequence of break points; each consecutive
/// pair is integrated separately with the full tolerance.
pub fn integrate_adaptive_pieces(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    max_depth: u32,
) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate_adaptive(&f, w[0], w[1], abs_tol, max_depth))
        .sum()
}

/// Trapezoidal rule for `∫₀^∞ f(w) dw` in the variable `y = ln w`.
///
/// The sum runs over `y = y_lo, y_lo + step, …` up to `y_hi`; callers pick the
/// window so that the integrand `f(e^y)·e^y` is negligible outside it.
pub fn trapezoid_log_half_line(f: impl Fn(f64) -> f64, y_lo: f64, y_hi: f64, step: f64) -> f64 {
    let count = ((y_hi - y_lo) / step).ceil().max(1.0) as usize;
    let mut sum = 0.0;
    for k in 0..=count {
        let w = (y_lo + k as f64 * step).exp();
        sum += f(w) * w;
    }
    sum * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in [1usize, 2, 5, 10, 20, 33] {
            let rule = GaussLegendre::new(n);
            assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (got - want).abs() < 1e-13,
                    "n={n} deg={deg}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn kronrod_constants_integrate_polynomials_exactly() {
        let k_sum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g_sum: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((k_sum - 2.0).abs() < 1e-15);
        assert!((g_sum - 2.0).abs() < 1e-15);
        for deg in 0..23 {
            let (v, _) = gk15(&|x: f64| x.powi(deg), -1.0, 1.0);
            let want = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((v - want).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let v = integrate_adaptive(
            |x| if x > 0.0 { x.powf(-0.5) } else { 0.0 },
            0.0,
            1.0,
            1e-10,
            60,
        );
        assert!((v - 2.0).abs() < 1e-8, "{v}");
        let v = integrate_adaptive(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 30);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_trapezoid_converges_on_gamma_integrals() {
        // ∫₀^∞ w^{a} e^{-w} dw = Γ(a+1)
        let v = trapezoid_log_half_line(|w| w.powf(2.5) * (-w).exp(), -40.0, 4.5, 0.2);
        let want = 3.323_350_970_447_843; // Γ(3.5)
        assert!((v - want).abs() < 1e-12, "{v}");
        let v = trapezoid_log_half_line(|w| w.powf(-0.7) * (-w).exp(), -140.0, 4.5, 0.2);
        let want = 2.991_568_987_687_591; // Γ(0.3)
        assert!((v - want).abs() < 1e-10, "{v}");
    }
}
