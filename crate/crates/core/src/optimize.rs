//! Small derivative-free optimizers used by the fitting routines.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)` once the bracket is narrower than `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of a decreasing function on `[lo, hi]` (with `g(lo) > 0 > g(hi)`),
/// Newton steps safeguarded by bisection. `g` returns `(value, derivative)`.
pub fn safeguarded_newton(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> f64 {
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let (value, slope) = g(x);
        if value == 0.0 {
            return x;
        }
        if value > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() < tol || hi - lo < tol {
            return next;
        }
        x = next;
    }
    x
}

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct Simplex {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder–Mead minimization with standard coefficients. Stops when the
/// simplex diameter and the spread of function values both fall below `tol`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    initial_step: f64,
    tol: f64,
    max_evals: usize,
) -> Simplex {
    let dim = start.len();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    points.push(start.to_vec());
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += initial_step;
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let mut evals = dim + 1;

    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = points[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&points[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = (values[dim] - values[0]).abs();
        if (diameter < tol && spread < tol * (1.0 + values[0].abs())) || evals >= max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| points[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&points[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                points[dim] = expanded;
                values[dim] = fe;
            } else {
                points[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            points[dim] = reflected;
            values[dim] = fr;
        } else {
            let (candidate, fc) = if fr < values[dim] {
                let c = along(-0.5);
                let v = f(&c);
                (c, v)
            } else {
                let c = along(0.5);
                let v = f(&c);
                (c, v)
            };
            evals += 1;
            if fc < values[dim].min(fr) {
                points[dim] = candidate;
                values[dim] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=dim {
                    let shrunk: Vec<f64> = points[i]
                        .iter()
                        .zip(&points[0])
                        .map(|(p, b)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = f(&shrunk);
                    points[i] = shrunk;
                }
                evals += dim;
            }
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Simplex {
        point: points[best].clone(),
        value: values[best],
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, -5.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn newton_root_of_decreasing_function() {
        let r = safeguarded_newton(|x| (2.0 - x.exp(), -x.exp()), -10.0, 10.0, 9.0, 1e-14);
        assert!((r - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let rosen = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let res = nelder_mead(rosen, &[-1.2, 1.0], 0.5, 1e-10, 5000);
        assert!((res.point[0] - 1.0).abs() < 1e-4, "{:?}", res);
        assert!((res.point[1] - 1.0).abs() < 1e-4);
    }
}
