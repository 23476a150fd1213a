//! Bundled reference datasets described by `fixtures/MANIFEST.toml`.
//!
//! The manifest is compiled in; the CSV files are read at run time from
//! `JOINTMCT_FIXTURE_DIR` or, when unset, from the crate's `fixtures/`
//! directory. A listed fixture without its CSV is reported as unavailable.

use std::path::{Path, PathBuf};

use jointmct_core::dataset::{BinomialDataset, LongDataset};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::{load_binomial_csv, load_long_csv, BinomialColumns, LongColumns};

pub const FIXTURE_DIR_ENV: &str = "JOINTMCT_FIXTURE_DIR";

const MANIFEST: &str = include_str!("../fixtures/MANIFEST.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Long,
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Golden {
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub name: String,
    pub kind: FixtureKind,
    pub file: String,
    #[serde(default)]
    pub response: Option<String>,
    pub primary: String,
    #[serde(default)]
    pub secondary: Option<String>,
    #[serde(default)]
    pub successes: Option<String>,
    #[serde(default)]
    pub trials: Option<String>,
    #[serde(default)]
    pub primary_order: Option<Vec<String>>,
    #[serde(default)]
    pub secondary_order: Option<Vec<String>>,
    /// Expected number of data rows.
    #[serde(default)]
    pub rows: Option<usize>,
    /// Expected cell sizes in cell order.
    #[serde(default)]
    pub cell_n: Option<Vec<usize>>,
    pub provenance: String,
    /// Why the CSV is not shipped, when it cannot be.
    #[serde(default)]
    pub unavailable_reason: Option<String>,
    #[serde(default)]
    pub golden: Vec<Golden>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fixture: Vec<FixtureEntry>,
}

impl Manifest {
    pub fn bundled() -> Manifest {
        toml::from_str(MANIFEST).expect("bundled fixture manifest is valid")
    }

    pub fn get(&self, name: &str) -> Result<&FixtureEntry> {
        self.fixture
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFixture(name.to_string()))
    }
}

#[derive(Debug, Clone)]
pub enum FixtureData {
    Long(LongDataset),
    Binomial(BinomialDataset),
}

pub fn fixture_dir() -> PathBuf {
    std::env::var_os(FIXTURE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures")))
}

impl FixtureEntry {
    pub fn path(&self) -> PathBuf {
        fixture_dir().join(&self.file)
    }

    pub fn long_columns(&self) -> LongColumns {
        LongColumns {
            response: self.response.clone().unwrap_or_else(|| "response".into()),
            primary: self.primary.clone(),
            secondary: self.secondary.clone(),
            primary_order: self.primary_order.clone(),
            secondary_order: self.secondary_order.clone(),
        }
    }

    pub fn binomial_columns(&self) -> BinomialColumns {
        let d = BinomialColumns::default();
        BinomialColumns {
            primary: self.primary.clone(),
            secondary: self.secondary.clone(),
            successes: self.successes.clone().unwrap_or(d.successes),
            trials: self.trials.clone().unwrap_or(d.trials),
            primary_order: self.primary_order.clone(),
            secondary_order: self.secondary_order.clone(),
        }
    }

    pub fn golden(&self, quantity: &str) -> Option<&Golden> {
        self.golden.iter().find(|g| g.quantity == quantity)
    }

    /// Load from the fixture directory; see [`FixtureEntry::load_from`].
    pub fn load(&self) -> Result<FixtureData> {
        self.load_from(&fixture_dir())
    }

    /// Load from `dir` and check the row count and cell sizes recorded in the manifest.
    pub fn load_from(&self, dir: &Path) -> Result<FixtureData> {
        let path = dir.join(&self.file);
        if !path.exists() {
            let reason = match &self.unavailable_reason {
                Some(r) => format!("{r} ({} not found)", path.display()),
                None => format!("{} not found", path.display()),
            };
            return Err(Error::FixtureUnavailable {
                name: self.name.clone(),
                reason,
            });
        }
        let data = match self.kind {
            FixtureKind::Long => FixtureData::Long(load_long_csv(&path, &self.long_columns())?),
            FixtureKind::Binomial => FixtureData::Binomial(load_binomial_csv(&path, &self.binomial_columns())?),
        };
        if let FixtureData::Long(ds) = &data {
            if let Some(rows) = self.rows {
                if ds.len() != rows {
                    return Err(Error::Config(format!(
                        "fixture `{}` has {} rows, manifest expects {rows}",
                        self.name,
                        ds.len()
                    )));
                }
            }
        }
        let cell_n = match &data {
            FixtureData::Long(ds) => ds.layout().cell_n().to_vec(),
            FixtureData::Binomial(ds) => ds.layout().cell_n().to_vec(),
        };
        if let Some(expected) = &self.cell_n {
            if &cell_n != expected {
                return Err(Error::Config(format!(
                    "fixture `{}` has cell sizes {cell_n:?}, manifest expects {expected:?}",
                    self.name
                )));
            }
        }
        Ok(data)
    }
}

pub fn load_fixture(name: &str) -> Result<FixtureData> {
    Manifest::bundled().get(name)?.load()
}
