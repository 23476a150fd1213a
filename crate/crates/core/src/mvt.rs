//! Multivariate normal and t rectangle probabilities.
//!
//! The integral is taken by separation of variables after a Cholesky
//! factorization with variable prioritization (narrowest expected interval
//! first). The t case draws the chi scale factor from the first coordinate.
//! Integration uses randomly shifted Richtmyer lattice points with a tent
//! periodization; the spread of the shift means gives the error estimate,
//! reported as 3.5 standard errors.
//!
//! Singular correlation matrices are supported: a row whose residual
//! variance vanishes after a pivot is attached to that pivot's variable and
//! only tightens its integration limits.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::special::{chi2_quantile, norm_cdf, norm_pdf, norm_quantile, norm_sf, t_cdf, t_quantile, t_sf};
use crate::{Alternative, Df, Error, Result};

/// Residual variance below which a row counts as linearly dependent.
const DEPENDENT_VARIANCE: f64 = 1e-10;
/// Smallest eigenvalue tolerated before a correlation matrix is rejected.
const PSD_TOLERANCE: f64 = -1e-8;
const ERROR_SIGMAS: f64 = 3.5;

/// Rectangle probability problem `P(lower < T < upper)` for a standardized
/// multivariate t (or normal when `df` is infinite).
#[derive(Debug, Clone)]
pub struct MvtProblem {
    corr: DMatrix<f64>,
    df: Df,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl MvtProblem {
    pub fn new(corr: DMatrix<f64>, df: Df, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let q = corr.nrows();
        if q == 0 {
            return Err(Error::InvalidProblem("empty correlation matrix".into()));
        }
        if lower.len() != q || upper.len() != q {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{q}-dimensional problem with {} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..q {
            if lower[i].is_nan() || upper[i].is_nan() || !(lower[i] < upper[i]) {
                return Err(Error::InvalidProblem(alloc::format!(
                    "bounds of coordinate {i} are not increasing: ({}, {})",
                    lower[i],
                    upper[i]
                )));
            }
        }
        df.validate()?;
        check_correlation(&corr)?;
        Ok(MvtProblem {
            corr,
            df,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.corr.nrows()
    }

    pub fn df(&self) -> Df {
        self.df
    }
}

/// Validate a correlation matrix: square, symmetric, unit diagonal, PSD within tolerance.
pub fn check_correlation(corr: &DMatrix<f64>) -> Result<()> {
    let (q, p) = corr.shape();
    if q != p {
        return Err(Error::DimensionMismatch(alloc::format!(
            "correlation matrix is {q}x{p}"
        )));
    }
    for i in 0..q {
        if !corr[(i, i)].is_finite() || (corr[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidProblem(alloc::format!(
                "diagonal entry {i} of the correlation matrix is {}",
                corr[(i, i)]
            )));
        }
        for j in 0..i {
            let (a, b) = (corr[(i, j)], corr[(j, i)]);
            if !a.is_finite() || (a - b).abs() > 1e-10 || a.abs() > 1.0 + 1e-10 {
                return Err(Error::InvalidProblem(alloc::format!(
                    "correlation entry ({i}, {j}) is invalid or asymmetric"
                )));
            }
        }
    }
    if q > 1 {
        let eig = corr.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite(min));
        }
    }
    Ok(())
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbEstimate {
    pub value: f64,
    /// 3.5-sigma error bound.
    pub mc_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// `false` when the sample cap was hit before the requested precision.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvtOptions {
    /// Target absolute error bound.
    pub precision: f64,
    pub max_samples: usize,
    /// Number of random lattice shifts per round.
    pub randomizations: usize,
}

impl Default for MvtOptions {
    fn default() -> Self {
        MvtOptions {
            precision: 1e-4,
            max_samples: 10_000_000,
            randomizations: 12,
        }
    }
}

impl MvtOptions {
    pub fn with_precision(precision: f64) -> Self {
        MvtOptions {
            precision,
            ..Self::default()
        }
    }
}

/// Factorization of a problem prepared for repeated evaluation.
#[derive(Debug, Clone)]
struct Prepared {
    /// Permuted position -> original coordinate.
    perm: Vec<usize>,
    /// Row-major `q x n_groups` coefficients on the integration variables.
    coef: Vec<f64>,
    n_groups: usize,
    /// First permuted row of each group, plus `q` as a sentinel.
    group_start: Vec<usize>,
    df: Df,
}

/// Mean of a standard normal truncated to `(lo, hi)`.
fn truncated_mean(lo: f64, hi: f64) -> f64 {
    let p = interval_prob(lo, hi);
    if p > 1e-300 {
        let dl = if lo.is_finite() { norm_pdf(lo) } else { 0.0 };
        let dh = if hi.is_finite() { norm_pdf(hi) } else { 0.0 };
        (dl - dh) / p
    } else if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        hi
    } else {
        0.0
    }
}

/// `P(lo < Z < hi)` computed on the tail with less cancellation.
fn interval_prob(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        (norm_sf(lo) - norm_sf(hi)).max(0.0)
    } else {
        (norm_cdf(hi) - norm_cdf(lo)).max(0.0)
    }
}

impl Prepared {
    fn new(corr: &DMatrix<f64>, lower: &[f64], upper: &[f64], df: Df) -> Prepared {
        let q = corr.nrows();
        let mut c: Vec<f64> = (0..q * q).map(|k| corr[(k / q, k % q)]).collect();
        let mut perm: Vec<usize> = (0..q).collect();
        let mut a = lower.to_vec();
        let mut b = upper.to_vec();
        let mut l = vec![0.0; q * q];
        let mut y: Vec<f64> = Vec::with_capacity(q);
        let mut group_start = Vec::new();

        let swap = |c: &mut Vec<f64>, l: &mut Vec<f64>, perm: &mut Vec<usize>, a: &mut Vec<f64>, b: &mut Vec<f64>, i: usize, j: usize| {
            if i == j {
                return;
            }
            perm.swap(i, j);
            a.swap(i, j);
            b.swap(i, j);
            for k in 0..q {
                l.swap(i * q + k, j * q + k);
            }
            for k in 0..q {
                c.swap(i * q + k, j * q + k);
            }
            for k in 0..q {
                c.swap(k * q + i, k * q + j);
            }
        };

        let mut i = 0;
        let mut g = 0;
        while i < q {
            let mut best: Option<(usize, f64)> = None;
            for j in i..q {
                let mut s = 0.0;
                let mut d = c[j * q + j];
                for m in 0..g {
                    s += l[j * q + m] * y[m];
                    d -= l[j * q + m] * l[j * q + m];
                }
                if d <= DEPENDENT_VARIANCE {
                    continue;
                }
                let sd = libm::sqrt(d);
                let prob = interval_prob((a[j] - s) / sd, (b[j] - s) / sd);
                if best.map_or(true, |(_, bp)| prob < bp) {
                    best = Some((j, prob));
                }
            }
            let Some((j, _)) = best else {
                // remaining rows are fully determined; attach them to the last group
                break;
            };
            swap(&mut c, &mut l, &mut perm, &mut a, &mut b, i, j);
            let mut d = c[i * q + i];
            let mut s = 0.0;
            for m in 0..g {
                d -= l[i * q + m] * l[i * q + m];
                s += l[i * q + m] * y[m];
            }
            let sd = libm::sqrt(d);
            l[i * q + g] = sd;
            for k in i + 1..q {
                let mut v = c[k * q + i];
                for m in 0..g {
                    v -= l[k * q + m] * l[i * q + m];
                }
                l[k * q + g] = v / sd;
            }
            y.push(truncated_mean((a[i] - s) / sd, (b[i] - s) / sd));
            group_start.push(i);
            i += 1;
            let mut k = i;
            while k < q {
                let mut dk = c[k * q + k];
                for m in 0..=g {
                    dk -= l[k * q + m] * l[k * q + m];
                }
                if dk <= DEPENDENT_VARIANCE {
                    swap(&mut c, &mut l, &mut perm, &mut a, &mut b, i, k);
                    i += 1;
                }
                k += 1;
            }
            g += 1;
        }
        group_start.push(q);
        let n_groups = g;
        let mut coef = vec![0.0; q * n_groups];
        for r in 0..q {
            for m in 0..n_groups {
                coef[r * n_groups + m] = l[r * q + m];
            }
        }
        Prepared {
            perm,
            coef,
            n_groups,
            group_start,
            df,
        }
    }

    fn ndim(&self) -> usize {
        self.n_groups - 1 + usize::from(matches!(self.df, Df::Finite(_)))
    }

    fn permute(&self, v: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&o| v[o]).collect()
    }

    /// Integrand at uniform point `w` for permuted bounds.
    fn integrand(&self, w: &[f64], a: &[f64], b: &[f64], y: &mut [f64]) -> f64 {
        let mut wi = 0;
        let scale = match self.df {
            Df::Infinite => 1.0,
            Df::Finite(nu) => {
                let u = w[0].clamp(1e-300, 1.0 - 1e-16);
                wi = 1;
                libm::sqrt(chi2_quantile(u, nu) / nu)
            }
        };
        let ng = self.n_groups;
        let mut prod = 1.0;
        for g in 0..ng {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for r in self.group_start[g]..self.group_start[g + 1] {
                let row = &self.coef[r * ng..(r + 1) * ng];
                let mut s = 0.0;
                for m in 0..g {
                    s += row[m] * y[m];
                }
                let ar = a[r] * scale;
                let br = b[r] * scale;
                let c = row[g];
                if c.abs() > 1e-12 {
                    let (mut l, mut h) = ((ar - s) / c, (br - s) / c);
                    if c < 0.0 {
                        core::mem::swap(&mut l, &mut h);
                    }
                    lo = lo.max(l);
                    hi = hi.min(h);
                } else if s < ar || s > br {
                    return 0.0;
                }
            }
            if !(hi > lo) {
                return 0.0;
            }
            let e = interval_prob(lo, hi);
            prod *= e;
            if prod == 0.0 {
                return 0.0;
            }
            if g + 1 < ng {
                let u = w[wi];
                wi += 1;
                let yg = if lo > 0.0 {
                    let t = (norm_sf(lo) - u * e).clamp(f64::MIN_POSITIVE, 1.0);
                    -norm_quantile(t)
                } else {
                    let t = (norm_cdf(lo) + u * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                    norm_quantile(t)
                };
                y[g] = yg.clamp(-40.0, 40.0);
            }
        }
        prod
    }

    /// Mean over `n` lattice points for each of the given shifts.
    fn shift_means(&self, a: &[f64], b: &[f64], n: usize, shifts: &[Vec<f64>], gen: &[f64]) -> Vec<f64> {
        let nd = self.ndim();
        let mut w = vec![0.0; nd];
        let mut y = vec![0.0; self.n_groups];
        shifts
            .iter()
            .map(|shift| {
                let mut sum = 0.0;
                for k in 1..=n {
                    let kf = k as f64;
                    for j in 0..nd {
                        let x = kf * gen[j] + shift[j];
                        let x = x - libm::floor(x);
                        w[j] = libm::fabs(2.0 * x - 1.0);
                    }
                    sum += self.integrand(&w, a, b, &mut y);
                }
                sum / n as f64
            })
            .collect()
    }
}

fn mean_and_var_of_mean(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m * (m - 1.0));
    (mean, var)
}

/// Richtmyer generators `frac(sqrt(p))` for the first `d` primes.
fn lattice_generators(d: usize) -> Vec<f64> {
    let mut primes = Vec::with_capacity(d);
    let mut cand = 2u64;
    while primes.len() < d {
        if primes.iter().take_while(|&&p| p * p <= cand).all(|&p| cand % p != 0) {
            primes.push(cand);
        }
        cand += 1;
    }
    primes
        .into_iter()
        .map(|p| {
            let s = libm::sqrt(p as f64);
            s - libm::floor(s)
        })
        .collect()
}

fn draw_shifts(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Adaptive estimate for prepared problem and permuted bounds.
fn integrate(p: &Prepared, a: &[f64], b: &[f64], opts: &MvtOptions, seed: u64) -> (ProbEstimate, usize) {
    let nd = p.ndim();
    if nd == 0 {
        let mut y = vec![0.0; p.n_groups];
        let v = p.integrand(&[], a, b, &mut y);
        return (
            ProbEstimate {
                value: v.clamp(0.0, 1.0),
                mc_error: 0.0,
                n_samples: 1,
                seed,
                converged: true,
            },
            1,
        );
    }
    let gen = lattice_generators(nd);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = opts.randomizations.max(2);
    let mut n = 256usize;
    let mut est = 0.0;
    let mut var = f64::INFINITY;
    let mut total = 0usize;
    loop {
        let shifts = draw_shifts(&mut rng, m, nd);
        let means = p.shift_means(a, b, n, &shifts, &gen);
        let (mean, v) = mean_and_var_of_mean(&means);
        if var.is_infinite() {
            est = mean;
            var = v;
        } else if var + v > 0.0 {
            est += (mean - est) * var / (var + v);
            var = var * v / (var + v);
        }
        total += n * m;
        let err = ERROR_SIGMAS * libm::sqrt(var);
        if err <= opts.precision {
            return (
                ProbEstimate {
                    value: est.clamp(0.0, 1.0),
                    mc_error: err,
                    n_samples: total,
                    seed,
                    converged: true,
                },
                n,
            );
        }
        if total >= opts.max_samples {
            return (
                ProbEstimate {
                    value: est.clamp(0.0, 1.0),
                    mc_error: err,
                    n_samples: total,
                    seed,
                    converged: false,
                },
                n,
            );
        }
        let remaining = (opts.max_samples - total) / m;
        n = (n * 2).min(remaining.max(1));
    }
}

/// `P(lower < T < upper)` by randomized lattice integration.
///
/// One-dimensional problems use the exact univariate CDF.
pub fn mvt_cdf(problem: &MvtProblem, opts: &MvtOptions, seed: u64) -> Result<ProbEstimate> {
    if problem.dim() == 1 {
        let v = t_cdf(problem.upper[0], problem.df) - t_cdf(problem.lower[0], problem.df);
        return Ok(ProbEstimate {
            value: v.clamp(0.0, 1.0),
            mc_error: 0.0,
            n_samples: 0,
            seed,
            converged: true,
        });
    }
    let p = Prepared::new(&problem.corr, &problem.lower, &problem.upper, problem.df);
    let a = p.permute(&problem.lower);
    let b = p.permute(&problem.upper);
    Ok(integrate(&p, &a, &b, opts, seed).0)
}

/// Sidedness of an equicoordinate quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Root of `P(max T ≤ c) = 1 - α`.
    OneSided,
    /// Root of `P(max |T| ≤ c) = 1 - α`.
    TwoSided,
}

impl From<Alternative> for Tail {
    fn from(a: Alternative) -> Self {
        match a {
            Alternative::TwoSided => Tail::TwoSided,
            _ => Tail::OneSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub value: f64,
    /// Coverage probability re-estimated at `value`.
    pub coverage: ProbEstimate,
}

fn equi_bounds(c: f64, q: usize, tail: Tail) -> (Vec<f64>, Vec<f64>) {
    match tail {
        Tail::OneSided => (vec![f64::NEG_INFINITY; q], vec![c; q]),
        Tail::TwoSided => (vec![-c; q], vec![c; q]),
    }
}

/// Brent's method on a bracketing interval.
fn brent(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

/// Common cutoff `c` with joint coverage `1 - alpha`.
///
/// The search brackets the root between the univariate and the Bonferroni
/// quantiles and runs Brent's method on an integrator with frozen lattice
/// shifts, so the objective is a smooth function of `c`. The frozen sample
/// size is taken from an adaptive run at the bracket midpoint; the final
/// coverage is re-estimated adaptively and must lie within `2·precision`
/// of `1 - alpha`.
pub fn equicoordinate_quantile(
    corr: &DMatrix<f64>,
    df: Df,
    alpha: f64,
    tail: Tail,
    opts: &MvtOptions,
    seed: u64,
) -> Result<Quantile> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProblem(alloc::format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    df.validate()?;
    check_correlation(corr)?;
    let q = corr.nrows();
    let (uni, bonf) = match tail {
        Tail::OneSided => (t_quantile(1.0 - alpha, df), t_quantile(1.0 - alpha / q as f64, df)),
        Tail::TwoSided => (
            t_quantile(1.0 - alpha / 2.0, df),
            t_quantile(1.0 - alpha / (2.0 * q as f64), df),
        ),
    };
    let target = 1.0 - alpha;
    if q == 1 {
        let (lo, hi) = equi_bounds(uni, 1, tail);
        let v = t_cdf(hi[0], df) - t_cdf(lo[0], df);
        return Ok(Quantile {
            value: uni,
            coverage: ProbEstimate {
                value: v,
                mc_error: 0.0,
                n_samples: 0,
                seed,
                converged: true,
            },
        });
    }
    let mid = 0.5 * (uni + bonf);
    let (l0, u0) = equi_bounds(mid, q, tail);
    let prep = Prepared::new(corr, &l0, &u0, df);
    let nd = prep.ndim();
    let (_, n_last) = integrate(&prep, &prep.permute(&l0), &prep.permute(&u0), opts, seed);
    let gen = lattice_generators(nd);
    let m = opts.randomizations.max(2);
    let mut n = n_last.max(256);
    for _attempt in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let shifts = draw_shifts(&mut rng, m, nd);
        let mut f = |c: f64| -> f64 {
            let (l, u) = equi_bounds(c, q, tail);
            let (a, b) = (prep.permute(&l), prep.permute(&u));
            if nd == 0 {
                let mut y = vec![0.0; prep.n_groups];
                return prep.integrand(&[], &a, &b, &mut y) - target;
            }
            let means = prep.shift_means(&a, &b, n, &shifts, &gen);
            means.iter().sum::<f64>() / means.len() as f64 - target
        };
        let mut lo = uni;
        let mut hi = bonf;
        let mut flo = f(lo);
        let mut fhi = f(hi);
        let mut expand = 0;
        while flo > 0.0 && expand < 50 {
            lo -= 0.25;
            flo = f(lo);
            expand += 1;
        }
        while fhi < 0.0 && expand < 100 {
            hi += 0.25;
            fhi = f(hi);
            expand += 1;
        }
        if flo > 0.0 || fhi < 0.0 {
            return Err(Error::NonConvergence("could not bracket the quantile".into()));
        }
        let root = brent(&mut f, lo, hi, flo, fhi, 1e-10);
        let (l, u) = equi_bounds(root, q, tail);
        let coverage = integrate(&prep, &prep.permute(&l), &prep.permute(&u), opts, seed.wrapping_add(1)).0;
        if (coverage.value - target).abs() <= 2.0 * opts.precision {
            return Ok(Quantile {
                value: root,
                coverage,
            });
        }
        n *= 4;
    }
    Err(Error::NonConvergence(alloc::format!(
        "coverage at the root stayed outside 2 x {} of {target}",
        opts.precision
    )))
}

/// Unadjusted p-value of a single statistic.
pub fn univariate_p(t: f64, df: Df, alternative: Alternative) -> f64 {
    match alternative {
        Alternative::Greater => t_sf(t, df),
        Alternative::Less => t_cdf(t, df),
        Alternative::TwoSided => (2.0 * t_sf(t.abs(), df)).min(1.0),
    }
}

/// Single-step adjusted p-values `1 - P(all T_j within the bound set by t_i)`.
pub fn adjusted_p(
    tstats: &[f64],
    corr: &DMatrix<f64>,
    df: Df,
    alternative: Alternative,
    opts: &MvtOptions,
    seed: u64,
) -> Result<Vec<ProbEstimate>> {
    let q = corr.nrows();
    if tstats.len() != q {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} statistics for a {q}x{q} correlation matrix",
            tstats.len()
        )));
    }
    if tstats.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidProblem("NaN test statistic".into()));
    }
    df.validate()?;
    check_correlation(corr)?;
    tstats
        .iter()
        .map(|&t| Ok(single_adjusted_p(t, corr, df, alternative, opts, seed)))
        .collect()
}

/// Adjusted p-value of one statistic against a validated correlation matrix.
///
/// Callers must have checked `corr` (see [`check_correlation`]) and `df`.
pub fn single_adjusted_p(
    t: f64,
    corr: &DMatrix<f64>,
    df: Df,
    alternative: Alternative,
    opts: &MvtOptions,
    seed: u64,
) -> ProbEstimate {
    let q = corr.nrows();
    let (lower, upper) = match alternative {
        Alternative::Greater => (vec![f64::NEG_INFINITY; q], vec![t; q]),
        Alternative::Less => (vec![t; q], vec![f64::INFINITY; q]),
        Alternative::TwoSided => (vec![-t.abs(); q], vec![t.abs(); q]),
    };
    if !(lower[0] < upper[0]) {
        // empty box: t = 0 two-sided or an infinite statistic on the wrong side
        return ProbEstimate {
            value: 1.0,
            mc_error: 0.0,
            n_samples: 0,
            seed,
            converged: true,
        };
    }
    let est = if q == 1 {
        ProbEstimate {
            value: 1.0 - univariate_p(t, df, alternative),
            mc_error: 0.0,
            n_samples: 0,
            seed,
            converged: true,
        }
    } else {
        let prep = Prepared::new(corr, &lower, &upper, df);
        integrate(&prep, &prep.permute(&lower), &prep.permute(&upper), opts, seed).0
    };
    ProbEstimate {
        value: (1.0 - est.value).clamp(0.0, 1.0),
        ..est
    }
}

/// Convert a covariance matrix to a correlation matrix; zero variances are an error.
pub fn covariance_to_correlation(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let q = cov.nrows();
    let sd: Vec<f64> = (0..q).map(|i| libm::sqrt(cov[(i, i)])).collect();
    if sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    Some(DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exch(q: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn independence_product() {
        let p = MvtProblem::new(
            DMatrix::identity(2, 2),
            Df::Infinite,
            vec![f64::NEG_INFINITY; 2],
            vec![1.959964; 2],
        )
        .unwrap();
        let e = mvt_cdf(&p, &MvtOptions::default(), 1).unwrap();
        assert!((e.value - 0.950625).abs() <= 1e-4, "{e:?}");
        assert!(e.converged);
        assert!(e.mc_error <= 1e-4);
    }

    #[test]
    fn univariate_t_delegation() {
        let p = MvtProblem::new(
            DMatrix::identity(1, 1),
            Df::Finite(10.0),
            vec![f64::NEG_INFINITY],
            vec![1.8125],
        )
        .unwrap();
        let e = mvt_cdf(&p, &MvtOptions::default(), 1).unwrap();
        let exact = t_cdf(1.8125, Df::Finite(10.0));
        assert!((e.value - exact).abs() <= 1e-12 * exact);
        assert!((e.value - 0.95).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_problems() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        assert!(MvtProblem::new(bad, Df::Infinite, vec![0.0; 2], vec![1.0; 2]).is_err());
        let not_psd = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(matches!(
            MvtProblem::new(not_psd, Df::Infinite, vec![0.0; 3], vec![1.0; 3]),
            Err(Error::NotPositiveSemidefinite(_))
        ));
        assert!(MvtProblem::new(DMatrix::zeros(0, 0), Df::Infinite, vec![], vec![]).is_err());
        assert!(MvtProblem::new(DMatrix::identity(1, 1), Df::Infinite, vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn perfectly_correlated_is_univariate() {
        let c = exch(4, 1.0);
        let p = MvtProblem::new(c.clone(), Df::Infinite, vec![f64::NEG_INFINITY; 4], vec![1.2; 4]).unwrap();
        let e = mvt_cdf(&p, &MvtOptions::default(), 3).unwrap();
        assert!((e.value - norm_cdf(1.2)).abs() < 1e-12);
        // mixed bounds take the tightest coordinate
        let p = MvtProblem::new(c, Df::Finite(7.0), vec![-0.5, -1.0, -2.0, -0.2], vec![1.2, 0.9, 3.0, 2.0]).unwrap();
        let e = mvt_cdf(&p, &MvtOptions::default(), 3).unwrap();
        let exact = t_cdf(0.9, Df::Finite(7.0)) - t_cdf(-0.2, Df::Finite(7.0));
        assert!((e.value - exact).abs() <= 1e-4, "{} vs {exact}", e.value);
    }

    #[test]
    fn quantile_univariate_and_degenerate() {
        let o = MvtOptions::default();
        let q1 = equicoordinate_quantile(&DMatrix::identity(1, 1), Df::Infinite, 0.05, Tail::OneSided, &o, 1).unwrap();
        assert!((q1.value - 1.6449).abs() < 1e-3);
        let q5 = equicoordinate_quantile(&exch(5, 1.0), Df::Infinite, 0.05, Tail::OneSided, &o, 1).unwrap();
        assert!((q5.value - 1.6449).abs() < 2e-3, "{}", q5.value);
    }

    #[test]
    fn seed_determinism() {
        let c = exch(3, 0.3);
        let p = MvtProblem::new(c, Df::Finite(12.0), vec![-1.0, f64::NEG_INFINITY, -2.0], vec![2.0, 1.5, 0.5]).unwrap();
        let a = mvt_cdf(&p, &MvtOptions::default(), 99).unwrap();
        let b = mvt_cdf(&p, &MvtOptions::default(), 99).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.mc_error.to_bits(), b.mc_error.to_bits());
    }

    #[test]
    fn duplicated_coordinate_leaves_adjusted_p() {
        let c2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let c3 = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.4, 0.4, 1.0, 1.0, 0.4, 1.0, 1.0]);
        let o = MvtOptions::default();
        let p2 = adjusted_p(&[2.1, 1.0], &c2, Df::Finite(30.0), Alternative::Greater, &o, 5).unwrap();
        let p3 = adjusted_p(&[2.1, 1.0, 1.0], &c3, Df::Finite(30.0), Alternative::Greater, &o, 5).unwrap();
        for i in 0..2 {
            let tol = 2.0 * (p2[i].mc_error + p3[i].mc_error).max(1e-12);
            assert!((p2[i].value - p3[i].value).abs() <= tol, "{i}: {:?} {:?}", p2[i], p3[i]);
        }
    }

    #[test]
    fn interleaved_duplicates_join_their_pivot() {
        // rows (z1, z2, z1, z2, z1): every copy must land in its pivot's group
        let base = [0usize, 1, 0, 1, 0];
        let r = 0.3;
        let c5 = DMatrix::from_fn(5, 5, |i, j| if base[i] == base[j] { 1.0 } else { r });
        let p = Prepared::new(&c5, &[f64::NEG_INFINITY; 5], &[1.0; 5], Df::Infinite);
        assert_eq!(p.n_groups, 2);
        let est = mvt_cdf(
            &MvtProblem::new(c5, Df::Infinite, vec![f64::NEG_INFINITY; 5], vec![1.0; 5]).unwrap(),
            &MvtOptions::default(),
            2,
        )
        .unwrap();
        let two = mvt_cdf(
            &MvtProblem::new(exch(2, r), Df::Infinite, vec![f64::NEG_INFINITY; 2], vec![1.0; 2]).unwrap(),
            &MvtOptions::default(),
            2,
        )
        .unwrap();
        assert!((est.value - two.value).abs() <= 2.0 * (est.mc_error + two.mc_error) + 1e-12);
    }

    #[test]
    fn single_statistic_p_value() {
        let p = adjusted_p(&[1.6449], &DMatrix::identity(1, 1), Df::Infinite, Alternative::Greater, &MvtOptions::default(), 0)
            .unwrap();
        assert!((p[0].value - 0.05).abs() < 1e-4);
    }
}
