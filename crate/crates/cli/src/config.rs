//! Flat `key=value` study configuration.

use std::path::{Path, PathBuf};

use tcopula::gof::TcEstimator;
use tcopula::Family;

use crate::CliError;

/// Values read from a config file. Every field is optional; command-line
/// flags take precedence.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub bootstrap_k: Option<usize>,
    pub beta: Option<f64>,
    pub families: Option<Vec<Family>>,
    pub tc_estimator: Option<TcEstimator>,
    pub data_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub hist_out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value.parse().map_err(|_| {
        CliError::Usage(format!(
            "config line {line}: invalid value '{value}' for {key}"
        ))
    })
}

pub fn parse_families(list: &str) -> Result<Vec<Family>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Family>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = FileConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {line}: expected key=value, got '{content}'"
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "alpha1" => cfg.alpha1 = Some(parse_value(key, value, line)?),
                "alpha2" => cfg.alpha2 = Some(parse_value(key, value, line)?),
                "sigma1" => cfg.sigma1 = Some(parse_value(key, value, line)?),
                "sigma2" => cfg.sigma2 = Some(parse_value(key, value, line)?),
                "n" => cfg.n = Some(parse_value(key, value, line)?),
                "seed" => cfg.seed = Some(parse_value(key, value, line)?),
                "bootstrap_k" => cfg.bootstrap_k = Some(parse_value(key, value, line)?),
                "beta" => cfg.beta = Some(parse_value(key, value, line)?),
                "families" => cfg.families = Some(parse_families(value)?),
                "tc_estimator" => {
                    cfg.tc_estimator = Some(
                        value
                            .parse()
                            .map_err(|e: tcopula::Error| CliError::Usage(e.to_string()))?,
                    )
                }
                "data_out" => cfg.data_out = Some(PathBuf::from(value)),
                "report_out" => cfg.report_out = Some(PathBuf::from(value)),
                "hist_out" => cfg.hist_out = Some(PathBuf::from(value)),
                other => {
                    return Err(CliError::Usage(format!(
                        "config line {line}: unknown key '{other}'"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Io(format!("cannot read config {}: {e}", p.display()))
                })?;
                FileConfig::parse(&text)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let cfg = FileConfig::parse(
            "# study\nalpha1 = 3.387732\nalpha2=1.181292\nn=1000 # draws\nfamilies=gaussian, two-component\ntc_estimator=margin_mle\n\n",
        )
        .unwrap();
        assert_eq!(cfg.alpha1, Some(3.387732));
        assert_eq!(cfg.n, Some(1000));
        assert_eq!(
            cfg.families,
            Some(vec![Family::Gaussian, Family::TwoComponent])
        );
        assert_eq!(cfg.tc_estimator, Some(TcEstimator::MarginMle));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            FileConfig::parse("alpha3=1"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(FileConfig::parse("n=-4"), Err(CliError::Usage(_))));
        assert!(matches!(
            FileConfig::parse("just words"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            FileConfig::parse("families=gaussian,clayton"),
            Err(CliError::Usage(_))
        ));
    }
}
