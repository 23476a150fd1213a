//! TOML scenario files for the simulation harness.
//!
//! ```toml
//! k = 4                # treatments besides the control
//! j = 2                # strata
//! n = 10               # per cell, or a list in cell order
//! means = 0.0          # scalar or list in cell order (stratum-major)
//! sds = 1.0            # scalar or list in cell order
//! family = "dunnett"   # dunnett, williams, tukey or grand-mean
//! alternative = "greater"
//! alpha = 0.05
//! pretest_alpha = 0.05
//! replications = 10000
//! seed = 1
//! covariance = "model" # model, hc0, hc1 or hc3
//! precision = 1e-3     # integration precision for p-values
//! ```
//!
//! Cell order is stratum-major: all levels of stratum 1, then stratum 2.

use std::path::Path;

use jointmct_core::contrasts::Family;
use jointmct_core::models::{CovarianceKind, HcFlavor};
use jointmct_core::simulate::Scenario;
use jointmct_core::Alternative;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList<T> {
    Scalar(T),
    List(Vec<T>),
}

impl<T: Clone> ScalarOrList<T> {
    fn expand(&self, cells: usize, what: &str) -> Result<Vec<T>> {
        match self {
            ScalarOrList::Scalar(v) => Ok(vec![v.clone(); cells]),
            ScalarOrList::List(v) if v.len() == cells => Ok(v.clone()),
            ScalarOrList::List(v) => Err(Error::Config(format!(
                "`{what}` has {} entries but the design has {cells} cells",
                v.len()
            ))),
        }
    }
}

fn default_family() -> String {
    "dunnett".into()
}

fn default_alternative() -> String {
    "greater".into()
}

fn default_alpha() -> f64 {
    0.05
}

fn default_covariance() -> String {
    "model".into()
}

fn default_precision() -> f64 {
    1e-3
}

fn default_means() -> ScalarOrList<f64> {
    ScalarOrList::Scalar(0.0)
}

fn default_sds() -> ScalarOrList<f64> {
    ScalarOrList::Scalar(1.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k: usize,
    pub j: usize,
    pub n: ScalarOrList<usize>,
    #[serde(default = "default_means")]
    pub means: ScalarOrList<f64>,
    #[serde(default = "default_sds")]
    pub sds: ScalarOrList<f64>,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_alternative")]
    pub alternative: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alpha")]
    pub pretest_alpha: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_covariance")]
    pub covariance: String,
    #[serde(default = "default_precision")]
    pub precision: f64,
}

pub fn parse_covariance(s: &str) -> std::result::Result<CovarianceKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "model" => Ok(CovarianceKind::Model),
        "hc0" => Ok(CovarianceKind::Sandwich(HcFlavor::Hc0)),
        "hc1" => Ok(CovarianceKind::Sandwich(HcFlavor::Hc1)),
        "hc3" => Ok(CovarianceKind::Sandwich(HcFlavor::Hc3)),
        other => Err(format!("unknown covariance `{other}` (expected model, hc0, hc1 or hc3)")),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<ScenarioConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let cells = (self.k + 1) * self.j;
        let alternative: Alternative = self.alternative.parse().map_err(|e: jointmct_core::Error| Error::Config(e.to_string()))?;
        let s = Scenario {
            n_a: self.k + 1,
            n_b: self.j,
            n: self.n.expand(cells, "n")?,
            means: self.means.expand(cells, "means")?,
            sds: self.sds.expand(cells, "sds")?,
            family: Family::parse(&self.family, None).map_err(|e| Error::Config(e.to_string()))?,
            alternative,
            alpha: self.alpha,
            pretest_alpha: self.pretest_alpha,
            replications: self.replications,
            seed: self.seed,
            covariance: parse_covariance(&self.covariance).map_err(Error::Config)?,
            mvt_precision: self.precision,
        };
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }
}
