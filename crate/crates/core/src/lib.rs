//! Joint single-step multiple contrast tests for two-factor designs.
//!
//! The primary factor is compared per level of the secondary factor and
//! pooled over those levels, all inside one max-t family whose reference
//! distribution is the multivariate t (or normal). The crate is `no_std`
//! with `alloc`; file formats, the CLI and parallel drivers live in the
//! `jointmct` companion crate.
//!
//! Module map:
//!
//! - [`dataset`]: long-format and binomial-count data with a fixed cell ordering
//! - [`models`]: cell-means fits, sandwich covariance, binomial logit cells
//! - [`ols`]: small dense least squares used by the additive model and F test
//! - [`contrasts`]: Dunnett, Williams, Tukey and grand-mean families, joint expansion
//! - [`mvt`]: randomized lattice integration of multivariate t/normal rectangles
//! - [`inference`]: the joint test, separate and global analyses, interaction F test
//! - [`nonpar`]: rank-based relative-effect version of the joint test
//! - [`simulate`]: FWER and power of the joint test versus interaction pre-testing

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod contrasts;
pub mod dataset;
mod error;
pub mod inference;
pub mod models;
pub mod mvt;
pub mod nonpar;
pub mod ols;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};

/// Direction of the alternative hypothesis for every contrast in a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

impl Alternative {
    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::Greater => "greater",
            Alternative::Less => "less",
            Alternative::TwoSided => "two-sided",
        }
    }
}

impl core::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            "two-sided" | "two.sided" | "twosided" => Ok(Alternative::TwoSided),
            other => Err(Error::Parse(alloc::format!(
                "unknown alternative `{other}` (expected greater, less or two-sided)"
            ))),
        }
    }
}

/// Degrees of freedom of the reference distribution; `Infinite` selects the normal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Df {
    Finite(f64),
    Infinite,
}

impl Df {
    pub fn finite(self) -> Option<f64> {
        match self {
            Df::Finite(v) => Some(v),
            Df::Infinite => None,
        }
    }

    pub(crate) fn validate(self) -> Result<()> {
        match self {
            Df::Finite(v) if !(v > 0.0) || !v.is_finite() => Err(Error::InvalidProblem(
                alloc::format!("degrees of freedom must be positive and finite, got {v}"),
            )),
            _ => Ok(()),
        }
    }
}

impl core::fmt::Display for Df {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Df::Finite(v) => write!(f, "{v}"),
            Df::Infinite => f.write_str("inf"),
        }
    }
}
