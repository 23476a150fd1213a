//! Dense least squares through the SVD.
//!
//! Used for the additive two-way model, the interaction F test and as the
//! generic route for heteroscedasticity-consistent covariance. Rank-deficient
//! designs are handled through the pseudo-inverse.

use nalgebra::{DMatrix, DVector};

use crate::models::HcFlavor;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    /// Pseudo-inverse of `XᵀX`.
    pub xtx_pinv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub leverages: DVector<f64>,
    pub rss: f64,
    pub rank: usize,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn df_resid(&self) -> usize {
        self.n_obs - self.rank
    }

    pub fn sigma2(&self) -> f64 {
        self.rss / self.df_resid() as f64
    }

    /// `σ² (XᵀX)⁺`.
    pub fn model_vcov(&self) -> DMatrix<f64> {
        &self.xtx_pinv * self.sigma2()
    }

    /// Residual-based sandwich `(XᵀX)⁺ Xᵀ diag(ω_i e_i²) X (XᵀX)⁺`.
    pub fn sandwich(&self, x: &DMatrix<f64>, flavor: HcFlavor) -> Result<DMatrix<f64>> {
        let n = self.n_obs;
        let p = x.ncols();
        let mut meat = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let e = self.residuals[i];
            let w = match flavor {
                HcFlavor::Hc0 => e * e,
                HcFlavor::Hc1 => e * e * n as f64 / (n - self.rank) as f64,
                HcFlavor::Hc3 => {
                    let h = self.leverages[i];
                    if h >= 1.0 - 1e-12 {
                        return Err(Error::InvalidProblem(alloc::format!(
                            "observation {i} has leverage one; HC3 is undefined"
                        )));
                    }
                    e * e / ((1.0 - h) * (1.0 - h))
                }
            };
            let row = x.row(i);
            meat += row.transpose() * row * w;
        }
        Ok(&self.xtx_pinv * meat * &self.xtx_pinv)
    }
}

pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n == 0 || p == 0 {
        return Err(Error::EmptyDataset);
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * n.max(p) as f64;
    let k = svd.singular_values.len();
    let mut rank = 0;
    let mut coef = DVector::<f64>::zeros(p);
    let mut xtx_pinv = DMatrix::<f64>::zeros(p, p);
    for j in 0..k {
        let s = svd.singular_values[j];
        if s <= tol {
            continue;
        }
        rank += 1;
        let uy = u.column(j).dot(y);
        let vj = v_t.row(j).transpose();
        coef += &vj * (uy / s);
        xtx_pinv += &vj * vj.transpose() / (s * s);
    }
    let fitted = x * &coef;
    let residuals = y - fitted;
    let rss = residuals.dot(&residuals);
    let mut leverages = DVector::<f64>::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        leverages[i] = (row * &xtx_pinv * row.transpose())[(0, 0)];
    }
    Ok(OlsFit {
        coefficients: coef,
        xtx_pinv,
        residuals,
        leverages,
        rss,
        rank,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_regression() {
        // y = 1 + 2x exactly plus one perturbation
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let f = fit(&x, &y).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(f.rss < 1e-20);
        assert_eq!(f.rank, 2);
        assert_eq!(f.df_resid(), 2);
    }

    #[test]
    fn rank_deficient_design() {
        // third column duplicates the first
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 1.5, 2.5]);
        let f = fit(&x, &y).unwrap();
        assert_eq!(f.rank, 2);
        assert!((f.rss - 0.25).abs() < 1e-12);
    }
}
