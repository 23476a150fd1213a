//! Rank-based version of the joint test using relative effects.
//!
//! For cells `i` and `j` the relative effect is
//! `p_ij = P(X_i < X_j) + ½ P(X_i = X_j)`, estimated by counting. A contrast
//! row splits into a negative part `c⁻` and a positive part `c⁺`, each summing
//! to one; the row's effect is `p = Σ_i Σ_j c⁻_i c⁺_j p_ij`, the chance that a
//! draw from the weighted positive-side mixture exceeds one from the
//! negative-side mixture. Dunnett, Williams, Tukey and pooled rows all have
//! this form.
//!
//! The covariance of the row effects comes from the placement influence
//! function: an observation `x` of cell `s` contributes
//! `Σ_i c⁻_i c⁺_s F̂_i(x) + Σ_j c⁻_s c⁺_j (1 - F̂_j(x))`, where `F̂` is the
//! normalized (mid-) distribution function. Summing the within-cell sample
//! covariances divided by `n_s` gives the covariance estimate; for a single
//! two-group row this is the Brunner-Munzel variance. Rows are tested on the
//! probit scale against `Φ⁻¹(½) = 0` with a multivariate normal reference.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::contrasts::ContrastMatrix;
use crate::dataset::LongDataset;
use crate::inference::{floor_p, max_t, EffectScale, JointResult, ResultRow, TestSettings};
use crate::models::CovarianceKind;
use crate::mvt::covariance_to_correlation;
use crate::special::{norm_cdf, norm_pdf, norm_quantile};
use crate::{Alternative, Df, Error, Result};

const PART_TOL: f64 = 1e-9;

/// Normalized distribution function `#(< t)/n + ½ #(= t)/n` of a sorted sample.
fn mid_cdf(sorted: &[f64], t: f64) -> f64 {
    let less = sorted.partition_point(|&v| v < t);
    let leq = sorted.partition_point(|&v| v <= t);
    (less as f64 + 0.5 * (leq - less) as f64) / sorted.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Relative effect `P(X < Y) + ½ P(X = Y)` with its Brunner-Munzel variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEffect {
    pub estimate: f64,
    pub variance: f64,
}

/// Continuity correction for estimates of exactly 0 or 1.
fn continuity(p: f64, pairs: f64) -> f64 {
    let c = 1.0 / (2.0 * pairs);
    if p <= 0.0 {
        c
    } else if p >= 1.0 {
        1.0 - c
    } else {
        p
    }
}

pub fn relative_effect(x: &[f64], y: &[f64]) -> Result<RelativeEffect> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::SampleTooSmall(x.len().min(y.len())));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    // twice the number of (x < y) pairs plus the ties, counted exactly
    let mut twice: u64 = 0;
    for &v in y {
        let less = xs.partition_point(|&u| u < v);
        let leq = xs.partition_point(|&u| u <= v);
        twice += 2 * less as u64 + (leq - less) as u64;
    }
    let pairs = (x.len() * y.len()) as f64;
    let p = twice as f64 / (2.0 * pairs);
    let fx_at_y: Vec<f64> = y.iter().map(|&v| mid_cdf(&xs, v)).collect();
    let fy_at_x: Vec<f64> = x.iter().map(|&v| mid_cdf(&ys, v)).collect();
    let variance = sample_var(&fx_at_y) / y.len() as f64 + sample_var(&fy_at_x) / x.len() as f64;
    Ok(RelativeEffect {
        estimate: continuity(p, pairs),
        variance,
    })
}

/// Relative effects of every row of a cell-level contrast matrix.
#[derive(Debug, Clone)]
pub struct RelativeEffectFit {
    /// Row effects in (0, 1) after continuity handling.
    pub effects: Vec<f64>,
    /// `Φ⁻¹(effect)` per row.
    pub transformed: Vec<f64>,
    /// Covariance of the effects.
    pub vcov: DMatrix<f64>,
    /// Delta-method covariance on the probit scale.
    pub vcov_probit: DMatrix<f64>,
    pub n_per_cell: Vec<usize>,
}

/// Negative and positive weights of a row, each summing to one.
fn split_row(cm: &ContrastMatrix, i: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let row = cm.row(i);
    let neg: Vec<f64> = row.iter().map(|&c| if c < 0.0 { -c } else { 0.0 }).collect();
    let pos: Vec<f64> = row.iter().map(|&c| if c > 0.0 { c } else { 0.0 }).collect();
    let (sn, sp) = (neg.iter().sum::<f64>(), pos.iter().sum::<f64>());
    if (sn - 1.0).abs() > PART_TOL || (sp - 1.0).abs() > PART_TOL {
        return Err(Error::UnsupportedContrast(cm.labels[i].clone()));
    }
    Ok((neg, pos))
}

pub fn fit_relative_effects(ds: &LongDataset, cm: &ContrastMatrix) -> Result<RelativeEffectFit> {
    let layout = ds.layout();
    if cm.n_columns() != layout.n_cells() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "contrast matrix has {} columns for {} cells",
            cm.n_columns(),
            layout.n_cells()
        )));
    }
    cm.check_cells(layout)?;
    let q = cm.n_rows();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..q).map(|i| split_row(cm, i)).collect::<Result<_>>()?;
    let samples = ds.cell_samples();
    let p = samples.len();
    let mut used = vec![false; p];
    for (neg, pos) in &parts {
        for s in 0..p {
            used[s] |= neg[s] > 0.0 || pos[s] > 0.0;
        }
    }
    for s in (0..p).filter(|&s| used[s]) {
        if samples[s].len() < 2 {
            return Err(Error::SampleTooSmall(samples[s].len()));
        }
    }
    let sorted: Vec<Vec<f64>> = samples
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();

    // psi[l][s][k]: influence value of row l at observation k of cell s
    let mut psi: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); p]; q];
    let mut effects = Vec::with_capacity(q);
    for (l, (neg, pos)) in parts.iter().enumerate() {
        let mut pl = 0.0;
        for s in (0..p).filter(|&s| used[s]) {
            let vals: Vec<f64> = samples[s]
                .iter()
                .map(|&x| {
                    let mut v = 0.0;
                    if pos[s] > 0.0 {
                        for i in (0..p).filter(|&i| neg[i] > 0.0) {
                            v += neg[i] * pos[s] * mid_cdf(&sorted[i], x);
                        }
                    }
                    if neg[s] > 0.0 {
                        for j in (0..p).filter(|&j| pos[j] > 0.0) {
                            v += neg[s] * pos[j] * (1.0 - mid_cdf(&sorted[j], x));
                        }
                    }
                    v
                })
                .collect();
            if pos[s] > 0.0 {
                // the positive-side contributions average to Σ_i c⁻_i c⁺_s p_is
                pl += samples[s]
                    .iter()
                    .map(|&x| {
                        (0..p)
                            .filter(|&i| neg[i] > 0.0)
                            .map(|i| neg[i] * pos[s] * mid_cdf(&sorted[i], x))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    / samples[s].len() as f64;
            }
            psi[l][s] = vals;
        }
        let n_neg: usize = (0..p).filter(|&s| neg[s] > 0.0).map(|s| samples[s].len()).sum();
        let n_pos: usize = (0..p).filter(|&s| pos[s] > 0.0).map(|s| samples[s].len()).sum();
        effects.push(continuity(pl, (n_neg * n_pos) as f64));
    }

    let mut vcov = DMatrix::<f64>::zeros(q, q);
    for s in (0..p).filter(|&s| used[s]) {
        let n = samples[s].len() as f64;
        let means: Vec<f64> = (0..q).map(|l| psi[l][s].iter().sum::<f64>() / n).collect();
        for a in 0..q {
            for b in 0..=a {
                let c: f64 = psi[a][s]
                    .iter()
                    .zip(&psi[b][s])
                    .map(|(x, y)| (x - means[a]) * (y - means[b]))
                    .sum::<f64>()
                    / (n - 1.0)
                    / n;
                vcov[(a, b)] += c;
                if a != b {
                    vcov[(b, a)] += c;
                }
            }
        }
    }
    let transformed: Vec<f64> = effects.iter().map(|&e| norm_quantile(e)).collect();
    let jac: Vec<f64> = transformed.iter().map(|&z| 1.0 / norm_pdf(z)).collect();
    let vcov_probit = DMatrix::from_fn(q, q, |a, b| vcov[(a, b)] * jac[a] * jac[b]);
    Ok(RelativeEffectFit {
        effects,
        transformed,
        vcov,
        vcov_probit,
        n_per_cell: ds.layout().cell_n().to_vec(),
    })
}

/// Joint test of relative effects against ½ on the probit scale.
///
/// Estimates and standard errors are reported on the relative-effect scale;
/// the statistics and the interval construction use the probit scale and the
/// intervals are mapped back through `Φ`.
pub fn run_joint_nonpar(ds: &LongDataset, cm: &ContrastMatrix, settings: &TestSettings) -> Result<JointResult> {
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(Error::InvalidProblem(alloc::format!(
            "alpha must lie in (0, 1), got {}",
            settings.alpha
        )));
    }
    let fit = fit_relative_effects(ds, cm)?;
    let q = cm.n_rows();
    let mut se_probit = Vec::with_capacity(q);
    for i in 0..q {
        let v = fit.vcov_probit[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::ZeroStandardError(cm.labels[i].clone()));
        }
        se_probit.push(libm::sqrt(v));
    }
    let corr = covariance_to_correlation(&fit.vcov_probit)
        .ok_or_else(|| Error::ZeroStandardError(cm.labels[0].clone()))?;
    let tstats: Vec<f64> = (0..q).map(|i| fit.transformed[i] / se_probit[i]).collect();
    let mt = max_t(&tstats, &corr, Df::Infinite, settings)?;
    let alt = settings.alternative;
    let rows = (0..q)
        .map(|i| {
            let z = fit.transformed[i];
            let c = mt.critical;
            let (lo, hi) = if c.is_nan() {
                (f64::NAN, f64::NAN)
            } else {
                let lo = norm_cdf(z - c * se_probit[i]);
                let hi = norm_cdf(z + c * se_probit[i]);
                match alt {
                    Alternative::Greater => (lo, 1.0),
                    Alternative::Less => (0.0, hi),
                    Alternative::TwoSided => (lo, hi),
                }
            };
            ResultRow {
                label: cm.labels[i].clone(),
                tag: cm.tags[i].clone(),
                estimate: fit.effects[i],
                se: libm::sqrt(fit.vcov[(i, i)]),
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
        df_used: Df::Infinite,
        alpha: settings.alpha,
        alternative: alt,
        covariance_kind: CovarianceKind::Model,
        scale: EffectScale::RelativeEffect,
        critical_value: mt.critical,
        null_value: 0.5,
        seed: settings.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_tied_samples() {
        let e = relative_effect(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.estimate, 0.5);
        let e = relative_effect(&[5.0, 5.0], &[5.0, 5.0]).unwrap();
        assert_eq!(e.estimate, 0.5);
        assert_eq!(e.variance, 0.0);
    }

    #[test]
    fn complete_separation_is_corrected() {
        let e = relative_effect(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(e.estimate, 1.0 - 1.0 / 8.0);
        let e = relative_effect(&[3.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(e.estimate, 1.0 / 8.0);
    }

    #[test]
    fn too_small() {
        assert!(matches!(relative_effect(&[1.0], &[2.0, 3.0]), Err(Error::SampleTooSmall(1))));
    }
}
