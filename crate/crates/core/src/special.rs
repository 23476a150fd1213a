//! Univariate distribution functions: normal, Student t, F and chi-square.
//!
//! Everything here runs on `libm` so the crate stays `no_std`. The incomplete
//! beta and gamma routines are the usual continued-fraction/series pairs with
//! Halley-polished inverses.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::Df;

const FPMIN: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

pub fn norm_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF (Wichura's AS241, ~1e-16 relative accuracy).
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if libm::fabs(q) <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545_5 + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414_1e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_887_9)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Stirling remainder `lnΓ(z) - [(z - ½) ln z - z + ½ ln 2π]` for `z ≥ 10`.
fn stirling_delta(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

/// `ln B(a, b)` without the cancellation of three large `lgamma` values.
fn ln_beta(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi < 10.0 {
        return libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b);
    }
    let s = lo + hi;
    if lo < 10.0 {
        // lnΓ(hi) - lnΓ(hi + lo) by Stirling differences
        let diff = -(hi - 0.5) * libm::log1p(lo / hi) - lo * libm::log(s) + lo + stirling_delta(hi)
            - stirling_delta(s);
        return libm::lgamma(lo) + diff;
    }
    0.5 * libm::log(2.0 * PI) + (lo - 0.5) * libm::log(lo / s) + (hi - 0.5) * libm::log(hi / s)
        - 0.5 * libm::log(s)
        + stirling_delta(lo)
        + stirling_delta(hi)
        - stirling_delta(s)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) <= CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` given both `x` and `y = 1 - x`.
///
/// Passing `y` separately keeps precision when `x` is within rounding of 1.
fn beta_inc_pair(a: f64, b: f64, x: f64, y: f64) -> f64 {
    beta_inc_logs(a, b, x, y, libm::log(x), libm::log(y))
}

/// As [`beta_inc_pair`] with `ln x` and `ln y` supplied by the caller, which
/// matters when `a` or `b` is large and `x` or `y` is close to one.
fn beta_inc_logs(a: f64, b: f64, x: f64, y: f64, ln_x: f64, ln_y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        libm::exp(ln_front) * beta_cf(a, b, x) / a
    } else {
        1.0 - libm::exp(ln_front) * beta_cf(b, a, y) / b
    }
}

pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    beta_inc_pair(a, b, x, 1.0 - x)
}

/// Inverse of the regularized incomplete beta in `x`.
pub fn beta_inc_inv(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let a1 = a - 1.0;
    let b1 = b - 1.0;
    let mut x = if a >= 1.0 && b >= 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = libm::sqrt(-2.0 * libm::log(pp));
        let mut x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            x = -x;
        }
        let al = (x * x - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = (x * libm::sqrt(al + h) / h)
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * libm::exp(2.0 * w))
    } else {
        let lna = libm::log(a / (a + b));
        let lnb = libm::log(b / (a + b));
        let t = libm::exp(a * lna) / a;
        let u = libm::exp(b * lnb) / b;
        let w = t + u;
        if p < t / w {
            libm::pow(a * w * p, 1.0 / a)
        } else {
            1.0 - libm::pow(b * w * (1.0 - p), 1.0 / b)
        }
    };
    let afac = -ln_beta(a, b);
    for j in 0..64 {
        if x == 0.0 || x == 1.0 {
            return x;
        }
        let err = beta_inc(a, b, x) - p;
        let mut t = libm::exp(a1 * libm::log(x) + b1 * libm::log(1.0 - x) + afac);
        let u = err / t;
        t = u / (1.0 - 0.5 * f64::min(1.0, u * (a1 / x - b1 / (1.0 - x))));
        x -= t;
        if x <= 0.0 {
            x = 0.5 * (x + t);
        }
        if x >= 1.0 {
            x = 0.5 * (x + t + 1.0);
        }
        if libm::fabs(t) < 1e-15 * x && j > 0 {
            break;
        }
    }
    x
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let gln = libm::lgamma(a);
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if libm::fabs(del) < libm::fabs(sum) * CF_EPS {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - gln)
}

fn gamma_cf(a: f64, x: f64) -> f64 {
    let gln = libm::lgamma(a);
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) <= CF_EPS {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - gln) * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

/// Inverse of `P(a, x)` in `x`.
pub fn gamma_p_inv(a: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let gln = libm::lgamma(a);
    let a1 = a - 1.0;
    let (lna1, afac) = if a > 1.0 {
        let lna1 = libm::log(a1);
        (lna1, libm::exp(a1 * (lna1 - 1.0) - gln))
    } else {
        (0.0, 0.0)
    };
    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = libm::sqrt(-2.0 * libm::log(pp));
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        let wh = 1.0 - 1.0 / (9.0 * a) - z / (3.0 * libm::sqrt(a));
        f64::max(1e-3, a * wh * wh * wh)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            libm::pow(p / t, 1.0 / a)
        } else {
            1.0 - libm::log(1.0 - (p - t) / (1.0 - t))
        }
    };
    for _ in 0..32 {
        if x <= 0.0 {
            return 0.0;
        }
        // work on the smaller tail to keep the residual accurate
        let err = if p < 0.5 {
            gamma_p(a, x) - p
        } else {
            (1.0 - p) - gamma_q(a, x)
        };
        let dens = if a > 1.0 {
            afac * libm::exp(-(x - a1) + a1 * (libm::log(x) - lna1))
        } else {
            libm::exp(-x + a1 * libm::log(x) - gln)
        };
        if dens == 0.0 {
            break;
        }
        let u = err / dens;
        let t = u / (1.0 - 0.5 * f64::min(1.0, u * ((a - 1.0) / x - 1.0)));
        x -= t;
        if x <= 0.0 {
            x = 0.5 * (x + t);
        }
        if libm::fabs(t) < 1e-12 * x {
            break;
        }
    }
    x
}

/// Student t CDF; `Df::Infinite` gives the standard normal.
pub fn t_cdf(t: f64, df: Df) -> f64 {
    match df {
        Df::Infinite => norm_cdf(t),
        Df::Finite(nu) => {
            if t.is_nan() {
                return f64::NAN;
            }
            if t.is_infinite() {
                return if t > 0.0 { 1.0 } else { 0.0 };
            }
            let t2 = t * t;
            let x = nu / (nu + t2);
            let y = t2 / (nu + t2);
            let ln_x = -libm::log1p(t2 / nu);
            let ln_y = -libm::log1p(nu / t2);
            let tail = 0.5 * beta_inc_logs(0.5 * nu, 0.5, x, y, ln_x, ln_y);
            if t > 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
    }
}

/// Upper tail `P(T > t)`.
pub fn t_sf(t: f64, df: Df) -> f64 {
    t_cdf(-t, df)
}

pub fn t_pdf(t: f64, df: Df) -> f64 {
    match df {
        Df::Infinite => norm_pdf(t),
        Df::Finite(nu) => {
            let ln = libm::lgamma(0.5 * (nu + 1.0))
                - libm::lgamma(0.5 * nu)
                - 0.5 * libm::log(nu * PI)
                - 0.5 * (nu + 1.0) * libm::log1p(t * t / nu);
            libm::exp(ln)
        }
    }
}

/// Student t quantile.
pub fn t_quantile(p: f64, df: Df) -> f64 {
    let nu = match df {
        Df::Infinite => return norm_quantile(p),
        Df::Finite(nu) => nu,
    };
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let tail = if p > 0.5 { 1.0 - p } else { p };
    let x = beta_inc_inv(0.5 * nu, 0.5, 2.0 * tail);
    let mut t = if x > 0.0 {
        libm::sqrt(nu * (1.0 - x) / x)
    } else {
        f64::INFINITY
    };
    if !t.is_finite() {
        t = norm_quantile(1.0 - tail);
    }
    // Newton polish on the upper tail
    for _ in 0..8 {
        let f = t_sf(t, df) - tail;
        let d = t_pdf(t, df);
        if d <= 0.0 {
            break;
        }
        let step = f / d;
        t += step;
        if libm::fabs(step) <= 1e-15 * libm::fabs(t) {
            break;
        }
    }
    if p > 0.5 {
        t
    } else {
        -t
    }
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let x = d2 / (d2 + d1 * f);
    let y = d1 * f / (d2 + d1 * f);
    let ln_x = -libm::log1p(d1 * f / d2);
    let ln_y = -libm::log1p(d2 / (d1 * f));
    beta_inc_logs(0.5 * d2, 0.5 * d1, x, y, ln_x, ln_y)
}

/// Chi-square quantile.
pub fn chi2_quantile(p: f64, df: f64) -> f64 {
    2.0 * gamma_p_inv(0.5 * df, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn normal_matches_reference() {
        // 17-digit values from a 30-digit multiprecision evaluation
        let refs = [
            (-8.0, 6.220_960_574_271_784e-16),
            (-5.0, 2.866_515_718_791_939e-7),
            (-3.3, 4.834_241_423_837_772e-4),
            (-1.0, 0.158_655_253_931_457_05),
            (0.0, 0.5),
            (0.7, 0.758_036_347_776_926_99),
            (1.959964, 0.975_000_000_903_557_6),
            (4.5, 0.999_996_602_326_875_27),
        ];
        for (x, p) in refs {
            assert!(rel(norm_cdf(x), p) < 1e-13, "x={x}");
        }
        let n = Normal::new(0.0, 1.0).unwrap();
        assert!(rel(norm_cdf(-2.0), n.cdf(-2.0)) < 1e-8);
        for &p in &[1e-12, 1e-5, 0.025, 0.3, 0.5, 0.8, 0.975, 1.0 - 1e-9] {
            let q = norm_quantile(p);
            assert!((norm_cdf(q) - p).abs() <= 1e-14 * p.max(1e-3), "p={p}");
        }
        assert!((norm_quantile(0.95) - 1.6448536269514722).abs() < 1e-14);
    }

    #[test]
    fn t_cdf_matches_statrs() {
        for &nu in &[1.0, 2.5, 5.0, 10.0, 20.0, 359.0, 1e5] {
            let d = StudentsT::new(0.0, 1.0, nu).unwrap();
            for &t in &[-12.0, -2.0, -0.3, 0.0, 0.5, 1.8125, 3.0, 7.0] {
                let ours = t_cdf(t, Df::Finite(nu));
                assert!(rel(ours, d.cdf(t)) < 1e-10, "nu={nu} t={t}: {ours} vs {}", d.cdf(t));
            }
        }
    }

    #[test]
    fn t_cdf_huge_df() {
        // references from an independent high-precision implementation
        assert!(rel(t_cdf(1.0, Df::Finite(1e6)), 0.841_344_625_083_211) < 1e-12);
        assert!(rel(t_sf(2.0, Df::Finite(1e6)), 0.022_750_266_925_659_6) < 1e-10);
    }

    #[test]
    fn t_cdf_df10_reference_point() {
        // 0.95 quantile of t(10) is 1.812461...
        let p = t_cdf(1.812_461_122_811_676, Df::Finite(10.0));
        assert!(rel(p, 0.95) < 1e-12);
    }

    #[test]
    fn t_quantile_roundtrip() {
        for &nu in &[1.0, 3.0, 10.0, 72.0, 1e6] {
            for &p in &[1e-6, 0.01, 0.05, 0.5, 0.9, 0.975, 0.999] {
                let q = t_quantile(p, Df::Finite(nu));
                assert!((t_cdf(q, Df::Finite(nu)) - p).abs() < 1e-12 * (1.0 + 1.0 / p), "nu={nu} p={p}");
            }
        }
        assert!((t_quantile(0.95, Df::Finite(10.0)) - 1.812_461_122_811_676).abs() < 1e-10);
    }

    #[test]
    fn f_and_chi2_match_statrs() {
        let f = FisherSnedecor::new(4.0, 359.0).unwrap();
        for &x in &[0.1, 0.52, 1.0, 2.4, 6.0] {
            assert!(rel(f_sf(x, 4.0, 359.0), 1.0 - f.cdf(x)) < 1e-9);
        }
        for &nu in &[1.0, 5.0, 20.0, 359.0] {
            let c = ChiSquared::new(nu).unwrap();
            for &p in &[1e-8, 0.01, 0.5, 0.99, 1.0 - 1e-10] {
                let x = chi2_quantile(p, nu);
                assert!((c.cdf(x) - p).abs() < 1e-10, "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn beta_inverse_roundtrip() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (0.3, 7.0), (50.0, 0.5)] {
            for &p in &[0.001, 0.2, 0.5, 0.9] {
                let x = beta_inc_inv(a, b, p);
                assert!((beta_inc(a, b, x) - p).abs() < 1e-12, "a={a} b={b} p={p}");
            }
        }
    }
}
