//! Single-step joint tests: estimates, standard errors, max-t adjusted
//! p-values and compatible simultaneous confidence intervals.
//!
//! The orchestrators cover the analyses a two-factor design usually needs:
//! the joint per-stratum plus pooled family, a separate analysis of one
//! stratum, the pooled-only analysis in the additive model, a global
//! analysis with the strata collapsed, and the interaction F test.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::contrasts::{
    build_family, embed_prototype, expand_joint, ContrastMatrix, Family, JointBlocks, RowTag,
};
use crate::dataset::{BinomialDataset, LongDataset};
use crate::models::{
    coefficient_covariance, fit_additive, fit_binomial_logit, fit_gaussian_cell_means, AddTwo,
    CellMeansFit, CovarianceKind,
};
use crate::mvt::{
    adjusted_p, covariance_to_correlation, equicoordinate_quantile, univariate_p, MvtOptions,
    ProbEstimate, Tail,
};
use crate::special::f_sf;
use crate::{Alternative, Df, Error, Result};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_220_715;

/// Smallest reported p-value.
pub const P_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSettings {
    pub alpha: f64,
    pub alternative: Alternative,
    pub seed: u64,
    pub mvt: MvtOptions,
    /// Compute the equicoordinate quantile and simultaneous intervals.
    pub intervals: bool,
}

impl TestSettings {
    pub fn new(alpha: f64, alternative: Alternative) -> Self {
        TestSettings {
            alpha,
            alternative,
            seed: DEFAULT_SEED,
            mvt: MvtOptions::default(),
            intervals: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidProblem(alloc::format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Scale on which estimates are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EffectScale {
    /// Differences of cell means.
    Mean,
    /// Differences of cell log-odds.
    LogOdds,
    /// Relative effects; tested against 1/2 on the probit scale.
    RelativeEffect,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResultRow {
    pub label: String,
    pub tag: RowTag,
    pub estimate: f64,
    pub se: f64,
    pub tstat: f64,
    /// Unadjusted p-value of the row alone.
    pub p_raw: f64,
    /// Single-step adjusted p-value.
    pub p_adj: f64,
    /// Integration error bound of `p_adj`.
    pub p_adj_error: f64,
    pub sci_lower: f64,
    pub sci_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub rows: Vec<ResultRow>,
    pub corr_used: DMatrix<f64>,
    pub df_used: Df,
    pub alpha: f64,
    pub alternative: Alternative,
    pub covariance_kind: CovarianceKind,
    pub scale: EffectScale,
    /// Equicoordinate quantile behind the intervals (NaN when not computed).
    pub critical_value: f64,
    /// Value of the estimate under the null hypothesis.
    pub null_value: f64,
    pub seed: u64,
}

impl JointResult {
    pub fn row(&self, label: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Rows whose adjusted p-value is at most alpha.
    pub fn rejected(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.p_adj <= self.alpha)
    }
}

/// Unadjusted and adjusted p-values plus the critical value for a max-t family.
pub(crate) struct MaxT {
    pub p_raw: Vec<f64>,
    pub p_adj: Vec<ProbEstimate>,
    pub critical: f64,
}

pub(crate) fn max_t(tstats: &[f64], corr: &DMatrix<f64>, df: Df, settings: &TestSettings) -> Result<MaxT> {
    let p_raw: Vec<f64> = tstats
        .iter()
        .map(|&t| univariate_p(t, df, settings.alternative))
        .collect();
    let mut p_adj = adjusted_p(tstats, corr, df, settings.alternative, &settings.mvt, settings.seed)?;
    // the exact value lies between the unadjusted and the Bonferroni p-value
    let q = tstats.len() as f64;
    for (p, &raw) in p_adj.iter_mut().zip(&p_raw) {
        p.value = p.value.clamp(raw, (q * raw).min(1.0));
    }
    let critical = if settings.intervals {
        equicoordinate_quantile(
            corr,
            df,
            settings.alpha,
            Tail::from(settings.alternative),
            &settings.mvt,
            settings.seed.wrapping_add(0x51),
        )?
        .value
    } else {
        f64::NAN
    };
    Ok(MaxT {
        p_raw,
        p_adj,
        critical,
    })
}

pub(crate) fn floor_p(p: f64) -> f64 {
    p.max(P_FLOOR)
}

/// Joint test of `cm · beta` with covariance `cm · vcov · cmᵀ`.
///
/// The reference distribution has `fit.df_resid` degrees of freedom for
/// either covariance choice; binomial fits carry an infinite df.
pub fn run_joint_test(
    fit: &CellMeansFit,
    vcov: &DMatrix<f64>,
    cm: &ContrastMatrix,
    settings: &TestSettings,
    kind: CovarianceKind,
) -> Result<JointResult> {
    if cm.n_columns() != fit.beta.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "contrast matrix has {} columns for {} coefficients",
            cm.n_columns(),
            fit.beta.len()
        )));
    }
    cm.check_cells(&fit.layout)?;
    let scale = match fit.family {
        crate::models::ModelFamily::GaussianIdentity => EffectScale::Mean,
        crate::models::ModelFamily::BinomialLogit => EffectScale::LogOdds,
    };
    linear_joint_test(&fit.beta, vcov, cm, fit.df_resid, settings, kind, scale)
}

/// Joint max-t inference for linear functions of any coefficient vector.
pub fn linear_joint_test(
    beta: &DVector<f64>,
    vcov: &DMatrix<f64>,
    cm: &ContrastMatrix,
    df: Df,
    settings: &TestSettings,
    kind: CovarianceKind,
    scale: EffectScale,
) -> Result<JointResult> {
    settings.validate()?;
    let p = beta.len();
    if cm.n_columns() != p || vcov.shape() != (p, p) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} contrast columns, {} coefficients, {}x{} covariance",
            cm.n_columns(),
            p,
            vcov.nrows(),
            vcov.ncols()
        )));
    }
    let k = &cm.coefficients;
    let est = k * beta;
    let cov = k * vcov * k.transpose();
    let q = cm.n_rows();
    let mut se = Vec::with_capacity(q);
    for i in 0..q {
        let v = cov[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::ZeroStandardError(cm.labels[i].clone()));
        }
        se.push(libm::sqrt(v));
    }
    let corr = covariance_to_correlation(&cov)
        .ok_or_else(|| Error::ZeroStandardError(cm.labels[0].clone()))?;
    let tstats: Vec<f64> = (0..q).map(|i| est[i] / se[i]).collect();
    let mt = max_t(&tstats, &corr, df, settings)?;
    let alt = settings.alternative;
    let rows = (0..q)
        .map(|i| {
            let (lo, hi) = interval(est[i], se[i], mt.critical, alt);
            ResultRow {
                label: cm.labels[i].clone(),
                tag: cm.tags[i].clone(),
                estimate: est[i],
                se: se[i],
                tstat: tstats[i],
                p_raw: floor_p(mt.p_raw[i]),
                p_adj: floor_p(mt.p_adj[i].value),
                p_adj_error: mt.p_adj[i].mc_error,
                sci_lower: lo,
                sci_upper: hi,
            }
        })
        .collect();
    Ok(JointResult {
        rows,
        corr_used: corr,
        df_used: df,
        alpha: settings.alpha,
        alternative: alt,
        covariance_kind: kind,
        scale,
        critical_value: mt.critical,
        null_value: 0.0,
        seed: settings.seed,
    })
}

fn interval(est: f64, se: f64, c: f64, alt: Alternative) -> (f64, f64) {
    if c.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    match alt {
        Alternative::Greater => (est - c * se, f64::INFINITY),
        Alternative::Less => (f64::NEG_INFINITY, est + c * se),
        Alternative::TwoSided => (est - c * se, est + c * se),
    }
}

/// Joint family of a continuous response: fit, expand the prototype, test.
///
/// The prototype uses the primary levels' total sample sizes across strata.
pub fn analyze_gaussian(
    ds: &LongDataset,
    family: &Family,
    blocks: JointBlocks,
    kind: CovarianceKind,
    settings: &TestSettings,
) -> Result<JointResult> {
    let fit = fit_gaussian_cell_means(ds)?;
    let vcov = coefficient_covariance(ds, &fit, kind)?;
    let layout = ds.layout();
    let proto = build_family(family, &layout.a_levels, &layout.a_totals(), layout.a_order_explicit)?;
    let cm = expand_joint(&proto, layout, blocks)?;
    run_joint_test(&fit, &vcov, &cm, settings, kind)
}

/// Analysis of one stratum on its own, with its own residual variance and df.
pub fn run_separate_test(
    ds: &LongDataset,
    stratum: &str,
    family: &Family,
    kind: CovarianceKind,
    settings: &TestSettings,
) -> Result<JointResult> {
    let sub = ds.restrict_to_stratum(stratum)?;
    analyze_gaussian(
        &sub,
        family,
        JointBlocks {
            per_stratum: true,
            pooled: false,
        },
        kind,
        settings,
    )
}

/// Pooled-only analysis in the additive model `y ~ A + B`.
pub fn run_additive_test(
    ds: &LongDataset,
    family: &Family,
    kind: CovarianceKind,
    settings: &TestSettings,
) -> Result<JointResult> {
    let fit = fit_additive(ds)?;
    let layout = ds.layout();
    let proto = build_family(family, &layout.a_levels, &layout.a_totals(), layout.a_order_explicit)?;
    let cm = embed_prototype(&proto, fit.ols.coefficients.len(), RowTag::Pooled);
    let vcov = fit.covariance(kind)?;
    linear_joint_test(
        &fit.ols.coefficients,
        &vcov,
        &cm,
        Df::Finite(fit.df_resid() as f64),
        settings,
        kind,
        EffectScale::Mean,
    )
}

fn retag(mut r: JointResult, tag: RowTag, prefix: &str) -> JointResult {
    for row in &mut r.rows {
        row.tag = tag.clone();
        row.label = alloc::format!("{prefix}{}", strip_stratum(&row.label));
    }
    r
}

fn strip_stratum(label: &str) -> &str {
    label.split_once(':').map_or(label, |(_, rest)| rest)
}

/// One-way analysis of the dataset with the strata collapsed.
///
/// Reported outside the joint family; rows are tagged `Global`.
pub fn run_global_test(
    ds: &LongDataset,
    family: &Family,
    kind: CovarianceKind,
    settings: &TestSettings,
) -> Result<JointResult> {
    let collapsed = ds.collapse_strata();
    let r = analyze_gaussian(
        &collapsed,
        family,
        JointBlocks {
            per_stratum: true,
            pooled: false,
        },
        kind,
        settings,
    )?;
    Ok(retag(r, RowTag::Global, "g: "))
}

/// Joint family of binomial counts on the logit scale.
pub fn analyze_binomial(
    ds: &BinomialDataset,
    family: &Family,
    blocks: JointBlocks,
    add_two: AddTwo,
    settings: &TestSettings,
) -> Result<JointResult> {
    let fit = fit_binomial_logit(ds, add_two)?;
    let layout = ds.layout();
    let proto = build_family(family, &layout.a_levels, &layout.a_totals(), layout.a_order_explicit)?;
    let cm = expand_joint(&proto, layout, blocks)?;
    run_joint_test(&fit, &fit.vcov_model, &cm, settings, CovarianceKind::Model)
}

/// Logit analysis of the counts summed over strata; rows tagged `Global`.
pub fn run_binomial_global_test(
    ds: &BinomialDataset,
    family: &Family,
    add_two: AddTwo,
    settings: &TestSettings,
) -> Result<JointResult> {
    let collapsed = ds.collapse_strata();
    let r = analyze_binomial(
        &collapsed,
        family,
        JointBlocks {
            per_stratum: true,
            pooled: false,
        },
        add_two,
        settings,
    )?;
    Ok(retag(r, RowTag::Global, "g: "))
}

/// Classical F test of the interaction term.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FTest {
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
}

/// Compare the additive model with the full cell-means model.
pub fn interaction_f_test(ds: &LongDataset) -> Result<FTest> {
    let layout = ds.layout();
    if layout.n_a() < 2 || layout.n_b() < 2 {
        return Err(Error::TooFewLevels);
    }
    let full = fit_gaussian_cell_means(ds).map_err(|e| match e {
        Error::ZeroResidualDf { .. } => Error::Saturated,
        other => other,
    })?;
    let df2 = match full.df_resid {
        Df::Finite(v) => v as usize,
        Df::Infinite => unreachable!("gaussian fits have finite df"),
    };
    let rss_full = full.sigma2.unwrap_or(0.0) * df2 as f64;
    let add = fit_additive(ds)?;
    let rank_full = layout.non_empty_cells();
    if add.ols.rank >= rank_full {
        return Err(Error::InvalidProblem(
            "the interaction term has no degrees of freedom in this design".into(),
        ));
    }
    let df1 = rank_full - add.ols.rank;
    let num = (add.ols.rss - rss_full).max(0.0) / df1 as f64;
    let den = rss_full / df2 as f64;
    let f = num / den;
    let p = if den > 0.0 {
        f_sf(f, df1 as f64, df2 as f64)
    } else if num > 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(FTest { f, df1, df2, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quick() -> TestSettings {
        TestSettings::new(0.05, Alternative::Greater).with_seed(7)
    }

    #[test]
    fn single_row_equals_t_test() {
        // two groups, pooled-variance t test
        let rows = vec![
            (1.0, "c", None),
            (2.0, "c", None),
            (4.0, "c", None),
            (3.0, "t", None),
            (5.0, "t", None),
            (6.0, "t", None),
            (7.0, "t", None),
        ];
        let ds = LongDataset::from_rows(rows, None, None).unwrap();
        let r = analyze_gaussian(
            &ds,
            &Family::Dunnett { control: None },
            JointBlocks { per_stratum: true, pooled: false },
            CovarianceKind::Model,
            &quick(),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        let mean_c = 7.0 / 3.0;
        let mean_t = 21.0 / 4.0;
        let ss = (1.0f64 - mean_c).powi(2) + (2.0f64 - mean_c).powi(2) + (4.0f64 - mean_c).powi(2)
            + (3.0f64 - mean_t).powi(2) + (5.0f64 - mean_t).powi(2) + (6.0f64 - mean_t).powi(2) + (7.0f64 - mean_t).powi(2);
        let s2 = ss / 5.0;
        let se = libm::sqrt(s2 * (1.0 / 3.0 + 1.0 / 4.0));
        assert!((row.estimate - (mean_t - mean_c)).abs() < 1e-12);
        assert!((row.se - se).abs() < 1e-12);
        let p = crate::special::t_sf(row.tstat, Df::Finite(5.0));
        assert!((row.p_adj - p).abs() < 1e-12);
        assert!((row.p_raw - p).abs() < 1e-12);
        let c = crate::special::t_quantile(0.95, Df::Finite(5.0));
        assert!((row.sci_lower - (row.estimate - c * se)).abs() < 1e-3);
        assert!(row.sci_upper.is_infinite());
    }

    #[test]
    fn zero_se_is_an_error() {
        let rows = vec![(1.0, "c", None), (1.0, "c", None), (2.0, "t", None), (2.0, "t", None)];
        let ds = LongDataset::from_rows(rows, None, None).unwrap();
        let e = analyze_gaussian(
            &ds,
            &Family::Dunnett { control: None },
            JointBlocks::default(),
            CovarianceKind::Model,
            &quick(),
        );
        assert!(matches!(e, Err(Error::ZeroStandardError(_))));
    }

    #[test]
    fn f_test_detects_crossing() {
        let mut rows = Vec::new();
        for (b, sign) in [("u", 1.0), ("v", -1.0)] {
            for (a, eff) in [("0", 0.0), ("1", 5.0)] {
                for e in [-0.5, 0.0, 0.5] {
                    rows.push((sign * eff + e, a, Some(b)));
                }
            }
        }
        let ds = LongDataset::from_rows(rows, None, None).unwrap();
        let f = interaction_f_test(&ds).unwrap();
        assert_eq!((f.df1, f.df2), (1, 8));
        assert!(f.p < 1e-6);
    }

    #[test]
    fn f_test_needs_two_levels() {
        let rows = vec![(1.0, "0", None), (2.0, "1", None), (3.0, "1", None)];
        let ds = LongDataset::from_rows(rows, None, None).unwrap();
        assert!(matches!(interaction_f_test(&ds), Err(Error::TooFewLevels)));
    }
}
