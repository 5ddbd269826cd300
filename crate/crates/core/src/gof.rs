//! Parametric-bootstrap Cramér–von Mises goodness-of-fit test, the
//! Benjamini–Hochberg style correction and the simulation study that ties
//! them together.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaParams, Family};
use crate::empirical::{
    cvm_statistic, kendall_tau, pseudo_observations, pseudo_observations_of, LossSample,
    PseudoSample,
};
use crate::error::{Error, Result};
use crate::reference::{
    gauss_fit_from_tau, gauss_sample, gumbel_fit_from_tau, gumbel_lambda_u, gumbel_sample,
};
use crate::rng::{derive_seed, StreamRng};
use crate::two_component::{
    tc_fit_margins, tc_fit_pseudo_likelihood, tc_lambda_u_curve, tc_sample, tc_sample_uniform,
    ModelParams, TailCurve, TwoComponentParams,
};

/// How the two-component shapes are re-estimated inside the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcEstimator {
    /// Maximum pseudo-likelihood on the ranks.
    #[default]
    PseudoLikelihood,
    /// `α̂ = 1/ξ̂` from GPD fits of the raw margins; bootstrap samples are
    /// drawn from the loss model with unit scales.
    MarginMle,
}

impl TcEstimator {
    pub fn name(self) -> &'static str {
        match self {
            TcEstimator::PseudoLikelihood => "pseudo_likelihood",
            TcEstimator::MarginMle => "margin_mle",
        }
    }
}

impl fmt::Display for TcEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TcEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pseudo_likelihood" | "pseudo-likelihood" => Ok(TcEstimator::PseudoLikelihood),
            "margin_mle" | "margin-mle" => Ok(TcEstimator::MarginMle),
            other => Err(Error::domain(format!(
                "unknown estimator '{other}' (expected pseudo_likelihood or margin_mle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofConfig {
    pub family: Family,
    pub bootstrap_k: usize,
    pub seed: u64,
    pub tc_estimator: TcEstimator,
}

impl GofConfig {
    pub const DEFAULT_BOOTSTRAP_K: usize = 1000;

    pub fn new(family: Family, bootstrap_k: usize, seed: u64) -> Result<Self> {
        if bootstrap_k == 0 {
            return Err(Error::domain("bootstrap_k must be at least 1"));
        }
        Ok(GofConfig {
            family,
            bootstrap_k,
            seed,
            tc_estimator: TcEstimator::default(),
        })
    }

    pub fn with_tc_estimator(mut self, estimator: TcEstimator) -> Self {
        self.tc_estimator = estimator;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub family: Family,
    pub fitted_params: CopulaParams,
    pub observed_statistic: f64,
    pub p_value: f64,
    pub valid_iterations: usize,
    pub skipped_iterations: usize,
    /// Statistics of the valid iterations, in iteration order.
    pub bootstrap_statistics: Vec<f64>,
    /// Set for the two-component family only.
    pub tc_estimator: Option<TcEstimator>,
}

/// Fits the family to pseudo-observations. `raw` is needed by the
/// margin-based two-component estimator; `hint` seeds the pseudo-likelihood
/// search.
fn fit_family(
    family: Family,
    ps: &PseudoSample,
    raw: Option<&LossSample>,
    estimator: TcEstimator,
    hint: Option<TwoComponentParams>,
) -> Result<CopulaParams> {
    match family {
        Family::Gaussian => Ok(CopulaParams::Gaussian(gauss_fit_from_tau(kendall_tau(
            ps.pairs(),
        )?)?)),
        Family::Gumbel => Ok(CopulaParams::Gumbel(gumbel_fit_from_tau(kendall_tau(
            ps.pairs(),
        )?)?)),
        Family::TwoComponent => match (estimator, raw) {
            (TcEstimator::MarginMle, Some(data)) => {
                Ok(CopulaParams::TwoComponent(tc_fit_margins(data)?.params))
            }
            (TcEstimator::MarginMle, None) => {
                Err(Error::fit("margin-based estimator needs the raw losses"))
            }
            (TcEstimator::PseudoLikelihood, _) => Ok(CopulaParams::TwoComponent(
                tc_fit_pseudo_likelihood(ps, hint)?,
            )),
        },
    }
}

/// One bootstrap replicate: its statistic, or `None` when the refit is
/// invalid and the iteration is passed over.
fn bootstrap_iteration(
    fitted: &CopulaParams,
    n: usize,
    estimator: TcEstimator,
    rng: &mut StreamRng,
) -> Option<f64> {
    let (ps, raw) = match *fitted {
        CopulaParams::Gaussian(p) => (pseudo_observations_of(&gauss_sample(&p, n, rng)), None),
        CopulaParams::Gumbel(p) => (pseudo_observations_of(&gumbel_sample(&p, n, rng)), None),
        CopulaParams::TwoComponent(p) => match estimator {
            TcEstimator::PseudoLikelihood => (
                pseudo_observations_of(&tc_sample_uniform(&p, n, rng).ok()?),
                None,
            ),
            TcEstimator::MarginMle => {
                let model = ModelParams::new(p.alpha1, p.alpha2, 1.0, 1.0).ok()?;
                let data = tc_sample(&model, n, rng).ok()?;
                (pseudo_observations(&data), Some(data))
            }
        },
    };
    let hint = match fitted {
        CopulaParams::TwoComponent(p) => Some(*p),
        _ => None,
    };
    let refit = fit_family(fitted.family(), &ps, raw.as_ref(), estimator, hint).ok()?;
    let evaluator = refit.evaluator().ok()?;
    Some(cvm_statistic(&ps, evaluator.as_ref()))
}

/// Runs the test on `sample`:
///
/// 1. pseudo-observations;
/// 2. fit `θ̂` (an invalid fit fails the whole test);
/// 3. `ρ̂ = Σ (C_n(u_i) − C_θ̂(u_i))²`;
/// 4. for `k < K`, draw `n` pairs from `C_θ̂` on stream `(seed, k)`, re-rank,
///    refit `θ̂⁰` (skipping the iteration when the fit is invalid) and
///    compute `ρ̂⁰_k` against `C_θ̂⁰`;
/// 5. `p̂ = Σ_valid 1(ρ̂⁰_k ≥ ρ̂) / (V + 1)`.
pub fn gof_test(sample: &LossSample, cfg: &GofConfig) -> Result<GofReport> {
    if cfg.bootstrap_k == 0 {
        return Err(Error::domain("bootstrap_k must be at least 1"));
    }
    let ps = pseudo_observations(sample);
    let hint = match (cfg.family, cfg.tc_estimator) {
        (Family::TwoComponent, TcEstimator::PseudoLikelihood) => {
            tc_fit_margins(sample).ok().map(|f| f.params)
        }
        _ => None,
    };
    let fitted = fit_family(cfg.family, &ps, Some(sample), cfg.tc_estimator, hint)?;
    let observed = cvm_statistic(&ps, fitted.evaluator()?.as_ref());

    let n = sample.len();
    let replicates: Vec<Option<f64>> = (0..cfg.bootstrap_k as u64)
        .into_par_iter()
        .map(|k| {
            bootstrap_iteration(
                &fitted,
                n,
                cfg.tc_estimator,
                &mut StreamRng::new(cfg.seed, k),
            )
        })
        .collect();
    let bootstrap_statistics: Vec<f64> = replicates.into_iter().flatten().collect();
    let valid = bootstrap_statistics.len();
    let exceed = bootstrap_statistics
        .iter()
        .filter(|&&s| s >= observed)
        .count();

    Ok(GofReport {
        family: cfg.family,
        fitted_params: fitted,
        observed_statistic: observed,
        p_value: exceed as f64 / (valid as f64 + 1.0),
        valid_iterations: valid,
        skipped_iterations: cfg.bootstrap_k - valid,
        bootstrap_statistics,
        tc_estimator: (cfg.family == Family::TwoComponent).then_some(cfg.tc_estimator),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    pub m: usize,
    pub threshold: f64,
    pub decisions: Vec<(String, bool)>,
}

/// Rejects hypothesis `i` when `p_i < β / Σ_{j≤m} 1/j`.
pub fn bh_correct(p_values: &[(String, f64)], beta: f64) -> Result<BhResult> {
    if p_values.is_empty() {
        return Err(Error::domain(
            "multiple-testing correction needs at least one p-value",
        ));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if let Some((name, p)) = p_values.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
        return Err(Error::domain(format!(
            "p-value for {name} must lie in [0, 1], got {p}"
        )));
    }
    let m = p_values.len();
    let harmonic: f64 = (1..=m).map(|j| 1.0 / j as f64).sum();
    let threshold = beta / harmonic;
    Ok(BhResult {
        m,
        threshold,
        decisions: p_values
            .iter()
            .map(|(name, p)| (name.clone(), *p < threshold))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub families: Vec<Family>,
    pub bootstrap_k: usize,
    pub seed: u64,
    pub beta: f64,
    pub tc_estimator: TcEstimator,
    /// Externally computed p-values that join the correction, e.g. an
    /// extreme-value test run elsewhere.
    pub external_p_values: Vec<(String, f64)>,
    pub tail_grid: Vec<f64>,
}

impl StudyConfig {
    pub fn new(seed: u64) -> Self {
        StudyConfig {
            families: Family::ALL.to_vec(),
            bootstrap_k: GofConfig::DEFAULT_BOOTSTRAP_K,
            seed,
            beta: 0.05,
            tc_estimator: TcEstimator::default(),
            external_p_values: Vec::new(),
            tail_grid: crate::two_component::default_tail_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaU {
    Value(f64),
    Curve(TailCurve),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilyOutcome {
    Completed(GofReport),
    /// The fit on the observed data was invalid, so the test fails.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: Family,
    /// Tau inversion for the reference families, margin MLE for the
    /// two-component family.
    pub headline_fit: std::result::Result<CopulaParams, String>,
    pub lambda_u: Option<LambdaU>,
    pub outcome: FamilyOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n: usize,
    pub kendall_tau: f64,
    pub families: Vec<FamilyResult>,
    /// `None` when no test completed and no external p-value was given.
    pub bh: Option<BhResult>,
}

impl StudyReport {
    pub fn family(&self, family: Family) -> Option<&FamilyResult> {
        self.families.iter().find(|f| f.family == family)
    }

    pub fn gof(&self, family: Family) -> Option<&GofReport> {
        match &self.family(family)?.outcome {
            FamilyOutcome::Completed(r) => Some(r),
            FamilyOutcome::Failed(_) => None,
        }
    }

    /// The correction's decision for `family`, if its test completed.
    pub fn rejected(&self, family: Family) -> Option<bool> {
        let bh = self.bh.as_ref()?;
        bh.decisions
            .iter()
            .find(|(name, _)| name == family.name())
            .map(|d| d.1)
    }
}

fn headline_fit(family: Family, data: &LossSample, tau: f64) -> Result<CopulaParams> {
    match family {
        Family::Gaussian => Ok(CopulaParams::Gaussian(gauss_fit_from_tau(tau)?)),
        Family::Gumbel => Ok(CopulaParams::Gumbel(gumbel_fit_from_tau(tau)?)),
        Family::TwoComponent => Ok(CopulaParams::TwoComponent(tc_fit_margins(data)?.params)),
    }
}

fn lambda_u(fit: &CopulaParams, grid: &[f64]) -> Result<LambdaU> {
    Ok(match fit {
        CopulaParams::Gaussian(_) => LambdaU::Value(0.0),
        CopulaParams::Gumbel(p) => LambdaU::Value(gumbel_lambda_u(p)),
        CopulaParams::TwoComponent(p) => LambdaU::Curve(tc_lambda_u_curve(p, grid)?),
    })
}

/// Fits every configured family to `data`, runs its test, and applies the
/// correction over the completed tests plus any external p-values. A family
/// whose fit is invalid is recorded as a failed test.
pub fn analyze(data: &LossSample, cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.families.is_empty() {
        return Err(Error::domain("at least one copula family is required"));
    }
    let tau = kendall_tau(data.pairs())?;
    let mut families = Vec::with_capacity(cfg.families.len());
    let mut p_values = Vec::new();
    for (i, &family) in cfg.families.iter().enumerate() {
        let headline = headline_fit(family, data, tau);
        let lambda = match &headline {
            Ok(fit) => Some(lambda_u(fit, &cfg.tail_grid)?),
            Err(_) => None,
        };
        let gof_cfg = GofConfig::new(family, cfg.bootstrap_k, derive_seed(cfg.seed, 1 + i as u64))?
            .with_tc_estimator(cfg.tc_estimator);
        let outcome = match gof_test(data, &gof_cfg) {
            Ok(report) => {
                p_values.push((family.name().to_string(), report.p_value));
                FamilyOutcome::Completed(report)
            }
            Err(Error::Fit(msg)) => FamilyOutcome::Failed(msg),
            Err(e) => return Err(e),
        };
        families.push(FamilyResult {
            family,
            headline_fit: headline.map_err(|e| e.to_string()),
            lambda_u: lambda,
            outcome,
        });
    }
    p_values.extend(cfg.external_p_values.iter().cloned());
    let bh = if p_values.is_empty() {
        None
    } else {
        Some(bh_correct(&p_values, cfg.beta)?)
    };
    Ok(StudyReport {
        n: data.len(),
        kendall_tau: tau,
        families,
        bh,
    })
}

/// Stream tag of the simulated dataset.
const DATA_TAG: u64 = 0;

/// Simulates `n` observations from the loss model on a stream derived from
/// `cfg.seed`.
pub fn simulate_study_data(m: &ModelParams, n: usize, seed: u64) -> Result<LossSample> {
    tc_sample(m, n, &mut StreamRng::new(derive_seed(seed, DATA_TAG), 0))
}

/// Simulates from the loss model and analyzes the result.
pub fn run_study(m: &ModelParams, n: usize, cfg: &StudyConfig) -> Result<StudyReport> {
    if n < 50 {
        return Err(Error::domain(format!("study needs n >= 50, got {n}")));
    }
    let data = simulate_study_data(m, n, cfg.seed)?;
    analyze(&data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Independence;
    use crate::distributions::pareto2_quantile;
    use crate::distributions::ParetoIIParams;
    use rand::Rng;

    fn table_model() -> ModelParams {
        ModelParams::new(3.387732, 1.181292, 1.0, 0.9).unwrap()
    }

    #[test]
    fn bh_thresholds() {
        let four: Vec<(String, f64)> = ["a", "b", "c", "d"]
            .iter()
            .map(|s| (s.to_string(), 0.03))
            .collect();
        let r = bh_correct(&four, 0.05).unwrap();
        assert!((r.threshold - 0.05 / (1.0 + 0.5 + 1.0 / 3.0 + 0.25)).abs() < 1e-15);
        assert_eq!(format!("{:.3}", r.threshold), "0.024");
        assert!(r.decisions.iter().all(|d| !d.1));
        let one = bh_correct(&[("a".into(), 0.049)], 0.05).unwrap();
        assert_eq!(one.threshold, 0.05);
        assert!(one.decisions[0].1);
        let three = bh_correct(&four[..3], 0.05).unwrap();
        assert!((three.threshold - 0.05 / (11.0 / 6.0)).abs() < 1e-15);
        assert!(bh_correct(&[], 0.05).is_err());
        assert!(bh_correct(&[("a".into(), 1.5)], 0.05).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GofConfig::new(Family::Gaussian, 0, 1).is_err());
        assert_eq!(
            "margin_mle".parse::<TcEstimator>().unwrap(),
            TcEstimator::MarginMle
        );
        assert!("mle".parse::<TcEstimator>().is_err());
    }

    #[test]
    fn single_iteration_p_value() {
        // With perfectly dependent-free independent data the Gaussian fit is
        // near zero; K = 1 gives p ∈ {0, 1/2}.
        let data = tc_sample(&table_model(), 200, &mut StreamRng::new(3, 0)).unwrap();
        let r = gof_test(&data, &GofConfig::new(Family::Gaussian, 1, 7).unwrap()).unwrap();
        assert_eq!(r.valid_iterations, 1);
        let expected = if r.bootstrap_statistics[0] >= r.observed_statistic {
            0.5
        } else {
            0.0
        };
        assert_eq!(r.p_value, expected);
    }

    #[test]
    fn report_accounting_and_p_value_formula() {
        let data = tc_sample(&table_model(), 300, &mut StreamRng::new(4, 0)).unwrap();
        for family in Family::ALL {
            let cfg = GofConfig::new(family, 30, 11).unwrap();
            let r = gof_test(&data, &cfg).unwrap();
            assert_eq!(r.valid_iterations + r.skipped_iterations, 30);
            assert_eq!(r.bootstrap_statistics.len(), r.valid_iterations);
            let exceed = r
                .bootstrap_statistics
                .iter()
                .filter(|&&s| s >= r.observed_statistic)
                .count();
            assert_eq!(r.p_value, exceed as f64 / (r.valid_iterations as f64 + 1.0));
            assert!(r.p_value >= 0.0 && r.p_value <= 1.0);
            assert_eq!(r.tc_estimator.is_some(), family == Family::TwoComponent);
            let ps = pseudo_observations(&data);
            let direct = cvm_statistic(&ps, r.fitted_params.evaluator().unwrap().as_ref());
            assert_eq!(direct, r.observed_statistic);
        }
    }

    #[test]
    fn bootstrap_is_independent_of_thread_count() {
        let data = tc_sample(&table_model(), 150, &mut StreamRng::new(5, 0)).unwrap();
        let cfg = GofConfig::new(Family::TwoComponent, 12, 99).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| gof_test(&data, &cfg).unwrap());
        let b = three.install(|| gof_test(&data, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn gumbel_test_fails_on_negative_dependence() {
        let mut rng = StreamRng::new(6, 0);
        let pairs: Vec<(f64, f64)> = (0..300)
            .map(|_| {
                let x: f64 = rng.random::<f64>() + 0.01;
                (x, 1.0 / x + 0.1 * rng.random::<f64>())
            })
            .collect();
        let data = LossSample::new(pairs).unwrap();
        let err = gof_test(&data, &GofConfig::new(Family::Gumbel, 5, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Fit(_)));

        let mut cfg = StudyConfig::new(3);
        cfg.bootstrap_k = 5;
        cfg.families = vec![Family::Gaussian, Family::Gumbel];
        let study = analyze(&data, &cfg).unwrap();
        assert!(matches!(
            study.family(Family::Gumbel).unwrap().outcome,
            FamilyOutcome::Failed(_)
        ));
        assert!(study.family(Family::Gumbel).unwrap().headline_fit.is_err());
        let bh = study.bh.as_ref().unwrap();
        assert_eq!(bh.m, 1);
        assert_eq!(bh.threshold, 0.05);
    }

    #[test]
    fn study_is_deterministic_and_counts_tests() {
        let mut cfg = StudyConfig::new(2024);
        cfg.bootstrap_k = 8;
        let a = run_study(&table_model(), 200, &cfg).unwrap();
        let b = run_study(&table_model(), 200, &cfg).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let completed = a
            .families
            .iter()
            .filter(|f| matches!(f.outcome, FamilyOutcome::Completed(_)))
            .count();
        assert_eq!(a.families.len(), 3);
        assert_eq!(a.bh.as_ref().unwrap().m, completed);
        cfg.external_p_values = vec![("extreme-value".into(), 0.3)];
        let c = run_study(&table_model(), 200, &cfg).unwrap();
        let bh = c.bh.unwrap();
        assert_eq!(bh.m, completed + 1);
        let harmonic: f64 = (1..=bh.m).map(|j| 1.0 / j as f64).sum();
        assert!((bh.threshold - 0.05 / harmonic).abs() < 1e-15);
        assert!(run_study(&table_model(), 49, &cfg).is_err());
        match &a.family(Family::Gaussian).unwrap().lambda_u {
            Some(LambdaU::Value(v)) => assert_eq!(*v, 0.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            a.family(Family::TwoComponent).unwrap().lambda_u,
            Some(LambdaU::Curve(_))
        ));
    }

    #[test]
    fn independence_data_gives_small_gaussian_fit() {
        let mut rng = StreamRng::new(8, 0);
        let p1 = ParetoIIParams::new(1.0, 3.0).unwrap();
        let p2 = ParetoIIParams::new(2.0, 1.5).unwrap();
        let pairs = (0..1000)
            .map(|_| {
                let a: f64 = rng.random::<f64>().max(1e-12);
                let b: f64 = rng.random::<f64>().max(1e-12);
                (
                    pareto2_quantile(&p1, a).unwrap(),
                    pareto2_quantile(&p2, b).unwrap(),
                )
            })
            .collect();
        let data = LossSample::new(pairs).unwrap();
        let mut cfg = StudyConfig::new(12);
        cfg.bootstrap_k = 20;
        cfg.families = vec![Family::Gaussian];
        let study = analyze(&data, &cfg).unwrap();
        match study.family(Family::Gaussian).unwrap().headline_fit {
            Ok(CopulaParams::Gaussian(p)) => assert!(p.r12.abs() < 0.05),
            ref other => panic!("{other:?}"),
        }
        let ps = pseudo_observations(&data);
        assert!(cvm_statistic(&ps, &Independence) < 1.0);
    }
}
