//! Common copula vocabulary: the evaluator trait, the family tag and the
//! tagged parameter set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::{GaussianCopula, GaussianParams, GumbelCopula, GumbelParams};
use crate::two_component::{TwoComponentCopula, TwoComponentParams};

/// Anything that can evaluate a bivariate copula CDF on `[0, 1]²`.
pub trait CopulaEvaluator: Sync {
    fn cdf(&self, u: f64, v: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> CopulaEvaluator for F {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        self(u, v)
    }
}

/// The independence copula `Π(u, v) = uv`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Independence;

impl CopulaEvaluator for Independence {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        u.clamp(0.0, 1.0) * v.clamp(0.0, 1.0)
    }
}

/// Copula families with a goodness-of-fit pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    Gumbel,
    TwoComponent,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Gumbel, Family::TwoComponent];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Gumbel => "gumbel",
            Family::TwoComponent => "two-component",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "gumbel" => Ok(Family::Gumbel),
            "two-component" | "two_component" | "twocomponent" | "tc" => Ok(Family::TwoComponent),
            other => Err(Error::domain(format!(
                "unknown copula family '{other}' (expected gaussian, gumbel or two-component)"
            ))),
        }
    }
}

/// Fitted parameters of one of the supported families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CopulaParams {
    Gaussian(GaussianParams),
    Gumbel(GumbelParams),
    TwoComponent(TwoComponentParams),
}

impl CopulaParams {
    pub fn family(&self) -> Family {
        match self {
            CopulaParams::Gaussian(_) => Family::Gaussian,
            CopulaParams::Gumbel(_) => Family::Gumbel,
            CopulaParams::TwoComponent(_) => Family::TwoComponent,
        }
    }

    pub fn evaluator(&self) -> Result<Box<dyn CopulaEvaluator + Send>> {
        Ok(match *self {
            CopulaParams::Gaussian(p) => Box::new(GaussianCopula::new(p)),
            CopulaParams::Gumbel(p) => Box::new(GumbelCopula::new(p)),
            CopulaParams::TwoComponent(p) => Box::new(TwoComponentCopula::new(p)?),
        })
    }

    /// `key=value` pairs describing the parameters.
    pub fn key_values(&self) -> Vec<(&'static str, f64)> {
        match *self {
            CopulaParams::Gaussian(p) => vec![("r12", p.r12)],
            CopulaParams::Gumbel(p) => vec![("theta", p.theta)],
            CopulaParams::TwoComponent(p) => vec![("alpha1", p.alpha1), ("alpha2", p.alpha2)],
        }
    }
}
