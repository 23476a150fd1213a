//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library: plain Monte Carlo for rectangle
//! probabilities, rank formulas for the two-sample relative effect, and
//! brute-force linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Square root `A` with `A Aᵀ = corr`, from the eigendecomposition.
fn psd_sqrt(corr: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = corr.clone().symmetric_eigen();
    let q = corr.nrows();
    let mut a = eig.eigenvectors.clone();
    for j in 0..q {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..q {
            a[(i, j)] *= s;
        }
    }
    a
}

/// Plain Monte Carlo estimate of `P(lower < T < upper)` and its 3.5-sigma error.
pub fn naive_box(
    corr: &DMatrix<f64>,
    df: Option<f64>,
    lower: &[f64],
    upper: &[f64],
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    let q = corr.nrows();
    let a = psd_sqrt(corr);
    let mut rng = StdRng::seed_from_u64(seed);
    let chi = df.map(|v| ChiSquared::new(v).unwrap());
    let mut z = DVector::<f64>::zeros(q);
    let mut hits = 0usize;
    for _ in 0..draws {
        for i in 0..q {
            z[i] = StandardNormal.sample(&mut rng);
        }
        let x = &a * &z;
        let s = match (&chi, df) {
            (Some(c), Some(v)) => (c.sample(&mut rng) / v).sqrt(),
            _ => 1.0,
        };
        if (0..q).all(|i| {
            let t = x[i] / s;
            t > lower[i] && t < upper[i]
        }) {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    (p, 3.5 * (p * (1.0 - p) / draws as f64).sqrt())
}

/// Empirical `1 - alpha` quantile of `max |Z_i|` for a normal vector.
pub fn naive_two_sided_quantile(corr: &DMatrix<f64>, alpha: f64, draws: usize, seed: u64) -> f64 {
    let q = corr.nrows();
    let a = psd_sqrt(corr);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut z = DVector::<f64>::zeros(q);
    let mut m: Vec<f64> = (0..draws)
        .map(|_| {
            for i in 0..q {
                z[i] = StandardNormal.sample(&mut rng);
            }
            let x = &a * &z;
            x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
        })
        .collect();
    m.sort_by(f64::total_cmp);
    m[((1.0 - alpha) * draws as f64) as usize]
}

/// Random correlation matrix of rank `rank` (singular when `rank < q`).
pub fn random_corr(rng: &mut StdRng, q: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::<f64>::from_fn(q, rank, |_, _| StandardNormal.sample(rng));
    let c = &b * b.transpose();
    let d: Vec<f64> = (0..q).map(|i| c[(i, i)].sqrt()).collect();
    DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { c[(i, j)] / (d[i] * d[j]) })
}

/// Random bounds with a mix of finite and infinite limits.
pub fn random_bounds(rng: &mut StdRng, q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(q);
    let mut hi = Vec::with_capacity(q);
    for _ in 0..q {
        let l = if rng.random::<f64>() < 0.4 {
            f64::NEG_INFINITY
        } else {
            -2.0 + 2.5 * rng.random::<f64>()
        };
        let u = if rng.random::<f64>() < 0.3 {
            f64::INFINITY
        } else if l.is_finite() {
            l + 0.5 + 2.5 * rng.random::<f64>()
        } else {
            -0.5 + 3.0 * rng.random::<f64>()
        };
        lo.push(l);
        hi.push(u);
    }
    (lo, hi)
}

/// Midranks of `v` (ties share the average rank).
fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Brunner-Munzel estimate of `P(X < Y) + ½ P(X = Y)` and its variance,
/// computed from overall and within-sample midranks.
pub fn brunner_munzel(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let all: Vec<f64> = x.iter().chain(y.iter()).cloned().collect();
    let r = midranks(&all);
    let (r1, r2) = r.split_at(x.len());
    let w1 = midranks(x);
    let w2 = midranks(y);
    let m1 = r1.iter().sum::<f64>() / n1;
    let m2 = r2.iter().sum::<f64>() / n2;
    let p = (m2 - (n2 + 1.0) / 2.0) / n1;
    let var_of = |ro: &[f64], wi: &[f64], m: f64, ni: f64| {
        ro.iter()
            .zip(wi)
            .map(|(a, b)| {
                let d = a - b - m + (ni + 1.0) / 2.0;
                d * d
            })
            .sum::<f64>()
            / (ni - 1.0)
    };
    let s1 = var_of(r1, &w1, m1, n1);
    let s2 = var_of(r2, &w2, m2, n2);
    let var = s1 / (n1 * n2 * n2) + s2 / (n2 * n1 * n1);
    (p, var)
}

/// Standard normal quantile from `statrs`.
pub fn probit(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

pub fn dnorm(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
