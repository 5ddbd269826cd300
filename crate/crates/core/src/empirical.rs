//! Rank-based, nonparametric machinery: pseudo-observations, Deheuvels'
//! empirical copula, Kendall's tau and the Cramér–von-Mises statistic.

use serde::{Deserialize, Serialize};

use crate::copula::CopulaEvaluator;
use crate::error::{Error, Result};

/// Paired observations `(x1_i, x2_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSample {
    pairs: Vec<(f64, f64)>,
}

impl LossSample {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("a sample needs at least one pair"));
        }
        if let Some(bad) = pairs.iter().find(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::domain(format!("non-finite observation {bad:?}")));
        }
        Ok(LossSample { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn first(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn second(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// Pairs on the open unit square, typically scaled ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pairs: Vec<(f64, f64)>,
}

impl PseudoSample {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("a pseudo-sample needs at least one pair"));
        }
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if let Some(bad) = pairs.iter().find(|(a, b)| !inside(*a) || !inside(*b)) {
            return Err(Error::domain(format!(
                "pseudo-observation {bad:?} is outside the open unit square"
            )));
        }
        Ok(PseudoSample { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `#{j : x_j ≤ x_i}` for every `i` (ties share the maximal rank).
fn max_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        for &idx in &order[start..end] {
            ranks[idx] = end;
        }
        start = end;
    }
    ranks
}

/// Scaled ranks `u_ji = n/(n+1) · F̂_j(x_ji) = rank/(n+1)`.
pub fn pseudo_observations_of(pairs: &[(f64, f64)]) -> PseudoSample {
    let n = pairs.len();
    let scale = 1.0 / (n as f64 + 1.0);
    let r1 = max_ranks(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let r2 = max_ranks(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    PseudoSample {
        pairs: r1
            .into_iter()
            .zip(r2)
            .map(|(a, b)| (a as f64 * scale, b as f64 * scale))
            .collect(),
    }
}

pub fn pseudo_observations(sample: &LossSample) -> PseudoSample {
    pseudo_observations_of(sample.pairs())
}

/// Deheuvels' empirical copula `C_n(v1, v2) = (1/n) Σ 1(u1i ≤ v1, u2i ≤ v2)`.
pub fn empirical_copula(ps: &PseudoSample, v1: f64, v2: f64) -> f64 {
    let hits = ps
        .pairs
        .iter()
        .filter(|(a, b)| *a <= v1 && *b <= v2)
        .count();
    hits as f64 / ps.len() as f64
}

impl CopulaEvaluator for PseudoSample {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        empirical_copula(self, u, v)
    }
}

/// `C_n(u_i)` at every sample point, in `O(n log n)` by sweeping the first
/// coordinate and counting the second with a Fenwick tree.
pub fn empirical_copula_at_sample(ps: &PseudoSample) -> Vec<f64> {
    let n = ps.len();
    let mut vs: Vec<f64> = ps.pairs.iter().map(|p| p.1).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    let slot = |v: f64| vs.partition_point(|&x| x <= v);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ps.pairs[a].0.total_cmp(&ps.pairs[b].0));

    let mut tree = vec![0u32; vs.len() + 1];
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let u = ps.pairs[order[start]].0;
        let mut end = start;
        while end < n && ps.pairs[order[end]].0 == u {
            let mut i = slot(ps.pairs[order[end]].1);
            while i < tree.len() {
                tree[i] += 1;
                i += i & i.wrapping_neg();
            }
            end += 1;
        }
        for &idx in &order[start..end] {
            let mut i = slot(ps.pairs[idx].1);
            let mut count = 0u32;
            while i > 0 {
                count += tree[i];
                i -= i & i.wrapping_neg();
            }
            out[idx] = count as f64 / n as f64;
        }
        start = end;
    }
    out
}

fn check_tau_input(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.len() < 2 {
        return Err(Error::domain("Kendall's tau needs at least two pairs"));
    }
    let (x0, y0) = pairs[0];
    if pairs.iter().all(|p| p.0 == x0) {
        return Err(Error::degenerate("all first coordinates are equal"));
    }
    if pairs.iter().all(|p| p.1 == y0) {
        return Err(Error::degenerate("all second coordinates are equal"));
    }
    Ok(())
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

fn sort_counting_inversions(values: &mut [f64], scratch: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = values.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        sort_counting_inversions(left, sl) + sort_counting_inversions(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if values[j] < values[i] {
            scratch[k] = values[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            scratch[k] = values[i];
            i += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&values[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&values[j..n]);
    values.copy_from_slice(&scratch[..n]);
    swaps
}

/// Sample Kendall's tau, `(concordant − discordant) / C(n, 2)`.
///
/// Pairs tied in either coordinate add nothing to the numerator; the
/// denominator stays `C(n, 2)`. Knight's merge-sort algorithm, `O(n log n)`.
pub fn kendall_tau(pairs: &[(f64, f64)]) -> Result<f64> {
    check_tau_input(pairs)?;
    let n = pairs.len() as u64;
    let total = n * (n - 1) / 2;
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let tied_x = tied_pairs(&sorted.iter().map(|p| p.0).collect::<Vec<_>>());
    let tied_xy = tied_pairs(&sorted);
    let mut ys: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let mut scratch = vec![0.0; ys.len()];
    let discordant = sort_counting_inversions(&mut ys, &mut scratch);
    let tied_y = tied_pairs(&ys);
    let numerator =
        total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * discordant as i64;
    Ok(numerator as f64 / total as f64)
}

/// Quadratic-time reference implementation of [`kendall_tau`].
pub fn kendall_tau_quadratic(pairs: &[(f64, f64)]) -> Result<f64> {
    check_tau_input(pairs)?;
    let n = pairs.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1);
            score += if s > 0.0 {
                1
            } else if s < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

/// Cramér–von-Mises distance `Σ_i (C_n(u_i) − C(u_i))²` between the empirical
/// copula and a fitted copula, evaluated at the sample points.
pub fn cvm_statistic(ps: &PseudoSample, fitted: &(impl CopulaEvaluator + ?Sized)) -> f64 {
    let empirical = empirical_copula_at_sample(ps);
    ps.pairs
        .iter()
        .zip(empirical)
        .map(|(&(u, v), cn)| {
            let d = cn - fitted.cdf(u, v);
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Independence;
    use crate::rng::StreamRng;
    use proptest::collection::vec;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::Rng;

    fn fixture() -> PseudoSample {
        PseudoSample::new(vec![(0.25, 0.25), (0.5, 0.75), (0.75, 0.5)]).unwrap()
    }

    #[test]
    fn pseudo_observation_fixtures() {
        let s = LossSample::new(vec![(5.0, 2.0), (1.0, 4.0), (3.0, 6.0)]).unwrap();
        let ps = pseudo_observations(&s);
        assert_eq!(ps.pairs(), &[(0.75, 0.25), (0.25, 0.5), (0.5, 0.75)]);
        let one = pseudo_observations(&LossSample::new(vec![(3.0, -1.0)]).unwrap());
        assert_eq!(one.pairs(), &[(0.5, 0.5)]);
        let cubed =
            LossSample::new(s.pairs().iter().map(|p| (p.0.powi(3) + 1.0, p.1)).collect()).unwrap();
        assert_eq!(pseudo_observations(&cubed), ps);
    }

    #[test]
    fn ties_take_the_maximal_rank() {
        let s = LossSample::new(vec![(1.0, 1.0), (2.0, 1.0), (2.0, 3.0), (0.5, 2.0)]).unwrap();
        let ps = pseudo_observations(&s);
        assert_eq!(ps.pairs()[1].0, 0.8);
        assert_eq!(ps.pairs()[2].0, 0.8);
        assert_eq!(ps.pairs()[0].1, 0.4);
        assert_eq!(ps.pairs()[1].1, 0.4);
    }

    #[test]
    fn empirical_copula_fixtures() {
        let ps = fixture();
        assert!((empirical_copula(&ps, 0.5, 0.5) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_copula(&ps, 1.0, 1.0), 1.0);
        assert_eq!(empirical_copula(&ps, 0.0, 0.9), 0.0);
        let at = empirical_copula_at_sample(&ps);
        assert_eq!(at, vec![1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn empirical_copula_has_discrete_uniform_margins() {
        let mut rng = StreamRng::from_seed(3);
        let pairs: Vec<(f64, f64)> = (0..50).map(|_| (rng.random(), rng.random())).collect();
        let ps = pseudo_observations_of(&pairs);
        let n = 50.0;
        for k in 1..=50 {
            let c = empirical_copula(&ps, k as f64 / (n + 1.0), 1.0);
            assert!((c - k as f64 / n).abs() < 1e-15);
        }
    }

    #[test]
    fn kendall_tau_fixtures() {
        let up = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        let down = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)];
        let mixed = [(1.0, 1.0), (2.0, 3.0), (3.0, 2.0)];
        assert_eq!(kendall_tau(&up).unwrap(), 1.0);
        assert_eq!(kendall_tau(&down).unwrap(), -1.0);
        assert!((kendall_tau(&mixed).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            kendall_tau(&[(1.0, 1.0), (1.0, 2.0)]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            kendall_tau(&[(1.0, 2.0), (3.0, 2.0)]),
            Err(Error::Degenerate(_))
        ));
        assert!(kendall_tau(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn cvm_fixtures() {
        let ps = fixture();
        // C_n at the sample points is (1/3, 2/3, 2/3); uv is (1/16, 3/8, 3/8).
        let want = (1.0f64 / 3.0 - 1.0 / 16.0).powi(2)
            + (2.0f64 / 3.0 - 3.0 / 8.0).powi(2)
            + (2.0f64 / 3.0 - 3.0 / 8.0).powi(2);
        let got = cvm_statistic(&ps, &Independence);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 561.0 / 2304.0).abs() < 1e-15);
        let own = ps.clone();
        assert_eq!(cvm_statistic(&ps, &own), 0.0);
        let reordered = PseudoSample::new(vec![(0.75, 0.5), (0.25, 0.25), (0.5, 0.75)]).unwrap();
        assert!((cvm_statistic(&reordered, &Independence) - got).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn fast_tau_equals_brute_force(pairs in vec((0i32..15, 0i32..15), 2..200)) {
            let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            match (kendall_tau(&pairs), kendall_tau_quadratic(&pairs)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn tau_is_invariant_under_increasing_maps(pairs in vec((-50.0f64..50.0, -50.0f64..50.0), 2..80)) {
            let mapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (a.exp(), b * b * b + 2.0 * b)).collect();
            if let (Ok(a), Ok(b)) = (kendall_tau(&pairs), kendall_tau(&mapped)) {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn fast_empirical_copula_matches_direct(pairs in vec((0i32..10, 0i32..10), 1..120)) {
            let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            let ps = pseudo_observations_of(&pairs);
            let fast = empirical_copula_at_sample(&ps);
            for (i, &(u, v)) in ps.pairs().iter().enumerate() {
                prop_assert_eq!(fast[i], empirical_copula(&ps, u, v));
            }
        }
    }
}
