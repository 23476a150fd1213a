//! Cell-means models: one parameter per (primary, secondary) cell, no intercept.
//!
//! The gaussian fit is closed form (cell means, pooled within-cell variance).
//! Its sandwich covariance is diagonal as well; [`sandwich_covariance`] uses
//! the closed form and [`crate::ols::OlsFit::sandwich`] gives the generic
//! residual-matrix route for the same quantity.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{BinomialDataset, Layout, LongDataset};
use crate::ols::{self, OlsFit};
use crate::{Df, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelFamily {
    GaussianIdentity,
    BinomialLogit,
}

/// Heteroscedasticity-consistent covariance flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HcFlavor {
    /// Plug-in residual variance.
    #[default]
    Hc0,
    /// HC0 scaled by `N / (N - p)`.
    Hc1,
    /// Leave-one-out scaling `e² / (1 - h)²`.
    Hc3,
}

/// Which covariance of the coefficients feeds the contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CovarianceKind {
    #[default]
    Model,
    Sandwich(HcFlavor),
}

impl CovarianceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceKind::Model => "model",
            CovarianceKind::Sandwich(HcFlavor::Hc0) => "hc0",
            CovarianceKind::Sandwich(HcFlavor::Hc1) => "hc1",
            CovarianceKind::Sandwich(HcFlavor::Hc3) => "hc3",
        }
    }
}

impl core::str::FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "model" | "homoscedastic" => CovarianceKind::Model,
            "hc0" | "sandwich" => CovarianceKind::Sandwich(HcFlavor::Hc0),
            "hc1" => CovarianceKind::Sandwich(HcFlavor::Hc1),
            "hc3" => CovarianceKind::Sandwich(HcFlavor::Hc3),
            other => {
                return Err(Error::Parse(alloc::format!(
                    "unknown covariance `{other}` (expected model, hc0, hc1 or hc3)"
                )))
            }
        })
    }
}

/// Fitted cell parameters with their model-based covariance.
#[derive(Debug, Clone)]
pub struct CellMeansFit {
    /// Cell estimates in cell order; empty cells hold zero.
    pub beta: DVector<f64>,
    pub vcov_model: DMatrix<f64>,
    /// Pooled residual variance (gaussian fits only).
    pub sigma2: Option<f64>,
    pub df_resid: Df,
    pub family: ModelFamily,
    pub layout: Layout,
    /// Set when the pooled residual variance is exactly zero.
    pub degenerate_variance: bool,
    /// Whether the add-two adjustment was applied (binomial fits only).
    pub add_two: bool,
}

impl CellMeansFit {
    pub fn n_coefficients(&self) -> usize {
        self.beta.len()
    }
}

pub fn fit_gaussian_cell_means(ds: &LongDataset) -> Result<CellMeansFit> {
    let layout = ds.layout().clone();
    let n_obs = ds.len();
    if n_obs == 0 {
        return Err(Error::EmptyDataset);
    }
    let cells = layout.non_empty_cells();
    if n_obs <= cells {
        return Err(Error::ZeroResidualDf {
            observations: n_obs,
            cells,
        });
    }
    let samples = ds.cell_samples();
    let p = samples.len();
    let mut beta = DVector::<f64>::zeros(p);
    let mut ss = 0.0;
    for (j, ys) in samples.iter().enumerate() {
        if ys.is_empty() {
            continue;
        }
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        beta[j] = m;
        ss += ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
    }
    let df = n_obs - cells;
    let sigma2 = ss / df as f64;
    let mut vcov = DMatrix::<f64>::zeros(p, p);
    for (j, ys) in samples.iter().enumerate() {
        if !ys.is_empty() {
            vcov[(j, j)] = sigma2 / ys.len() as f64;
        }
    }
    Ok(CellMeansFit {
        beta,
        vcov_model: vcov,
        sigma2: Some(sigma2),
        df_resid: Df::Finite(df as f64),
        family: ModelFamily::GaussianIdentity,
        layout,
        degenerate_variance: sigma2 == 0.0,
        add_two: false,
    })
}

#[derive(Debug, Clone)]
pub struct SandwichCovariance {
    pub flavor: HcFlavor,
    pub vcov_robust: DMatrix<f64>,
}

/// Closed-form heteroscedasticity-consistent covariance of the cell means.
///
/// With one indicator column per cell the bread is `diag(1/n_ij)` and the meat
/// is `diag(Σ ω e²)`, so every flavor reduces to a per-cell expression of the
/// within-cell sum of squares `SS_ij`:
/// HC0 `SS/n²`, HC1 `SS/n² · N/(N-p)`, HC3 `SS/(n-1)²`.
pub fn sandwich_covariance(
    ds: &LongDataset,
    fit: &CellMeansFit,
    flavor: HcFlavor,
) -> Result<SandwichCovariance> {
    if fit.family != ModelFamily::GaussianIdentity {
        return Err(Error::InvalidProblem(
            "sandwich covariance needs a gaussian cell-means fit".into(),
        ));
    }
    let samples = ds.cell_samples();
    if samples.len() != fit.beta.len() {
        return Err(Error::DimensionMismatch(
            "fit and dataset have different cell counts".into(),
        ));
    }
    let layout = ds.layout();
    let n_obs = ds.len() as f64;
    let rank = layout.non_empty_cells() as f64;
    let p = samples.len();
    let mut v = DMatrix::<f64>::zeros(p, p);
    for (j, ys) in samples.iter().enumerate() {
        let n = ys.len();
        if n == 0 {
            continue;
        }
        let m = fit.beta[j];
        let ss: f64 = ys.iter().map(|y| (y - m) * (y - m)).sum();
        let nf = n as f64;
        v[(j, j)] = match flavor {
            HcFlavor::Hc0 => ss / (nf * nf),
            HcFlavor::Hc1 => ss / (nf * nf) * n_obs / (n_obs - rank),
            HcFlavor::Hc3 => {
                if n == 1 {
                    let (a, b) = (j % layout.n_a(), j / layout.n_a());
                    return Err(Error::Hc3SingleObservation {
                        a_level: layout.a_levels[a].clone(),
                        b_level: layout.b_levels[b].clone(),
                    });
                }
                ss / ((nf - 1.0) * (nf - 1.0))
            }
        };
    }
    Ok(SandwichCovariance {
        flavor,
        vcov_robust: v,
    })
}

/// Coefficient covariance for the requested kind.
pub fn coefficient_covariance(
    ds: &LongDataset,
    fit: &CellMeansFit,
    kind: CovarianceKind,
) -> Result<DMatrix<f64>> {
    match kind {
        CovarianceKind::Model => Ok(fit.vcov_model.clone()),
        CovarianceKind::Sandwich(flavor) => Ok(sandwich_covariance(ds, fit, flavor)?.vcov_robust),
    }
}

/// Indicator design of the cell-means model over the non-empty cells' columns.
///
/// Columns of empty cells are all zero.
pub fn cell_means_design(ds: &LongDataset) -> (DMatrix<f64>, DVector<f64>) {
    let layout = ds.layout();
    let rows = ds.rows();
    let mut x = DMatrix::<f64>::zeros(rows.len(), layout.n_cells());
    let mut y = DVector::<f64>::zeros(rows.len());
    for (i, r) in rows.iter().enumerate() {
        x[(i, layout.cell(r.a, r.b))] = 1.0;
        y[i] = r.response;
    }
    (x, y)
}

/// When to apply the add-two adjustment to binomial cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AddTwo {
    /// Only when some cell has zero successes or zero failures.
    #[default]
    Auto,
    On,
    Off,
}

/// Logit cell-means fit of binomial counts with the add-two adjustment.
///
/// The reference distribution is normal (`df_resid = Df::Infinite`).
pub fn fit_binomial_logit(ds: &BinomialDataset, add_two: AddTwo) -> Result<CellMeansFit> {
    let layout = ds.layout().clone();
    let cells = ds.cells();
    let degenerate = cells
        .iter()
        .any(|c| c.trials > 0 && (c.successes == 0 || c.successes == c.trials));
    let adjust = match add_two {
        AddTwo::On => true,
        AddTwo::Off => false,
        AddTwo::Auto => degenerate,
    };
    let adj = if adjust { 1.0 } else { 0.0 };
    let p = cells.len();
    let mut beta = DVector::<f64>::zeros(p);
    let mut vcov = DMatrix::<f64>::zeros(p, p);
    for (j, c) in cells.iter().enumerate() {
        if c.trials == 0 {
            continue;
        }
        if !adjust && (c.successes == 0 || c.successes == c.trials) {
            let (a, b) = (j % layout.n_a(), j / layout.n_a());
            return Err(Error::DegenerateProportion {
                a_level: layout.a_levels[a].clone(),
                b_level: layout.b_levels[b].clone(),
                successes: c.successes,
                trials: c.trials,
            });
        }
        let s = c.successes as f64 + adj;
        let f = (c.trials - c.successes) as f64 + adj;
        beta[j] = libm::log(s / f);
        vcov[(j, j)] = 1.0 / s + 1.0 / f;
    }
    Ok(CellMeansFit {
        beta,
        vcov_model: vcov,
        sigma2: None,
        df_resid: Df::Infinite,
        family: ModelFamily::BinomialLogit,
        layout,
        degenerate_variance: false,
        add_two: adjust,
    })
}

/// Two-way additive model `y ~ A + B` without interaction.
///
/// Coefficients are one level effect per primary level followed by
/// secondary-level shifts for strata 2..J, so primary-level contrasts apply
/// directly to the first `|A|` coefficients.
#[derive(Debug, Clone)]
pub struct AdditiveFit {
    pub ols: OlsFit,
    pub design: DMatrix<f64>,
    pub layout: Layout,
}

impl AdditiveFit {
    pub fn df_resid(&self) -> usize {
        self.ols.df_resid()
    }

    pub fn covariance(&self, kind: CovarianceKind) -> Result<DMatrix<f64>> {
        match kind {
            CovarianceKind::Model => Ok(self.ols.model_vcov()),
            CovarianceKind::Sandwich(f) => self.ols.sandwich(&self.design, f),
        }
    }
}

pub fn additive_design(ds: &LongDataset) -> (DMatrix<f64>, DVector<f64>) {
    let layout = ds.layout();
    let na = layout.n_a();
    let nb = layout.n_b();
    let rows = ds.rows();
    let mut x = DMatrix::<f64>::zeros(rows.len(), na + nb.saturating_sub(1));
    let mut y = DVector::<f64>::zeros(rows.len());
    for (i, r) in rows.iter().enumerate() {
        x[(i, r.a)] = 1.0;
        if r.b > 0 {
            x[(i, na + r.b - 1)] = 1.0;
        }
        y[i] = r.response;
    }
    (x, y)
}

pub fn fit_additive(ds: &LongDataset) -> Result<AdditiveFit> {
    let (x, y) = additive_design(ds);
    let fit = ols::fit(&x, &y)?;
    if fit.df_resid() == 0 {
        return Err(Error::ZeroResidualDf {
            observations: fit.n_obs,
            cells: fit.rank,
        });
    }
    Ok(AdditiveFit {
        ols: fit,
        design: x,
        layout: ds.layout().clone(),
    })
}

/// Residuals of the gaussian cell-means fit, in observation order.
pub fn cell_means_residuals(ds: &LongDataset, fit: &CellMeansFit) -> Vec<f64> {
    let layout = ds.layout();
    ds.rows()
        .iter()
        .map(|r| r.response - fit.beta[layout.cell(r.a, r.b)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinomialDataset;
    use alloc::vec;

    fn two_cells(a: &[f64], b: &[f64]) -> LongDataset {
        let mut rows = Vec::new();
        for &y in a {
            rows.push((y, "a", None));
        }
        for &y in b {
            rows.push((y, "b", None));
        }
        LongDataset::from_rows(rows, None, None).unwrap()
    }

    #[test]
    fn gaussian_hand_computed() {
        let ds = two_cells(&[1.0, 2.0, 3.0], &[4.0, 6.0]);
        let fit = fit_gaussian_cell_means(&ds).unwrap();
        assert_eq!(fit.beta.as_slice(), &[2.0, 5.0]);
        let s2 = fit.sigma2.unwrap();
        assert!((s2 - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(fit.df_resid, Df::Finite(3.0));
        assert!((fit.vcov_model[(0, 0)] - s2 / 3.0).abs() < 1e-15);
        assert!((fit.vcov_model[(1, 1)] - s2 / 2.0).abs() < 1e-15);
        assert!(!fit.degenerate_variance);
    }

    #[test]
    fn gaussian_zero_variance_is_flagged() {
        let ds = two_cells(&[7.0, 7.0], &[]);
        let fit = fit_gaussian_cell_means(&ds).unwrap();
        assert_eq!(fit.sigma2, Some(0.0));
        assert!(fit.degenerate_variance);
    }

    #[test]
    fn gaussian_needs_residual_df() {
        let ds = two_cells(&[1.0], &[2.0]);
        assert!(matches!(
            fit_gaussian_cell_means(&ds),
            Err(Error::ZeroResidualDf { .. })
        ));
    }

    #[test]
    fn sandwich_brute_force_example() {
        let ds = two_cells(&[0.0, 2.0], &[10.0, 10.0, 10.0, 14.0]);
        let fit = fit_gaussian_cell_means(&ds).unwrap();
        let closed = sandwich_covariance(&ds, &fit, HcFlavor::Hc0).unwrap();
        // brute force: Σ e² / n² per cell
        assert!((closed.vcov_robust[(0, 0)] - 2.0 / 4.0).abs() < 1e-15);
        assert!((closed.vcov_robust[(1, 1)] - 12.0 / 16.0).abs() < 1e-15);
        let (x, y) = cell_means_design(&ds);
        let generic = ols::fit(&x, &y).unwrap();
        for flavor in [HcFlavor::Hc0, HcFlavor::Hc1, HcFlavor::Hc3] {
            let a = sandwich_covariance(&ds, &fit, flavor).unwrap().vcov_robust;
            let b = generic.sandwich(&x, flavor).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[(i, j)] - b[(i, j)]).abs() <= 1e-12 * (1.0 + b[(i, j)].abs()));
                }
            }
        }
    }

    #[test]
    fn sandwich_equals_model_scaled_when_homoscedastic() {
        // equal sizes and equal within-cell SS
        let ds = two_cells(&[1.0, 2.0, 3.0], &[11.0, 12.0, 13.0]);
        let fit = fit_gaussian_cell_means(&ds).unwrap();
        let hc0 = sandwich_covariance(&ds, &fit, HcFlavor::Hc0).unwrap().vcov_robust;
        // HC0 = (N - p)/N · model for balanced homoscedastic cells
        let scale = 4.0 / 6.0;
        for j in 0..2 {
            assert!((hc0[(j, j)] - scale * fit.vcov_model[(j, j)]).abs() < 1e-14);
        }
        let hc1 = sandwich_covariance(&ds, &fit, HcFlavor::Hc1).unwrap().vcov_robust;
        for j in 0..2 {
            assert!((hc1[(j, j)] - fit.vcov_model[(j, j)]).abs() < 1e-14);
        }
    }

    #[test]
    fn hc3_rejects_singleton_cells() {
        let ds = two_cells(&[1.0, 2.0, 4.0], &[3.0]);
        let fit = fit_gaussian_cell_means(&ds).unwrap();
        assert!(matches!(
            sandwich_covariance(&ds, &fit, HcFlavor::Hc3),
            Err(Error::Hc3SingleObservation { .. })
        ));
        assert!(sandwich_covariance(&ds, &fit, HcFlavor::Hc0).is_ok());
    }

    #[test]
    fn binomial_symmetric_and_zero_cells() {
        let ds = BinomialDataset::from_records(vec![("x", None, 5, 10), ("y", None, 0, 8)], None, None)
            .unwrap();
        let fit = fit_binomial_logit(&ds, AddTwo::On).unwrap();
        assert!(fit.beta[0].abs() < 1e-15);
        assert!((fit.vcov_model[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((fit.beta[1] - libm::log(1.0 / 9.0)).abs() < 1e-15);
        assert!(fit.beta[1].is_finite());
        assert_eq!(fit.df_resid, Df::Infinite);
        assert!(matches!(
            fit_binomial_logit(&ds, AddTwo::Off),
            Err(Error::DegenerateProportion { .. })
        ));
        let auto = fit_binomial_logit(&ds, AddTwo::Auto).unwrap();
        assert!(auto.add_two);
    }

    #[test]
    fn additive_model_balanced_effects() {
        // y = a_effect + b_shift exactly
        let mut rows = Vec::new();
        for (b, shift) in [("m", 0.0), ("f", 10.0)] {
            for (a, eff) in [("0", 1.0), ("1", 3.0), ("2", 6.0)] {
                rows.push((eff + shift, a, Some(b)));
                rows.push((eff + shift + 0.5, a, Some(b)));
            }
        }
        let ds = LongDataset::from_rows(rows, None, None).unwrap();
        let fit = fit_additive(&ds).unwrap();
        let c = &fit.ols.coefficients;
        assert!((c[1] - c[0] - 2.0).abs() < 1e-12);
        assert!((c[2] - c[0] - 5.0).abs() < 1e-12);
        assert!((c[3] - 10.0).abs() < 1e-12);
        assert_eq!(fit.df_resid(), 12 - 4);
    }
}
