//! Student-t CDF and quantile via the regularized incomplete beta function.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, with `y = 1 - x` passed
/// separately so callers can supply it without cancellation.
pub fn inc_beta(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// CDF of the Student-t law with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t == 0.0 {
        return 0.5;
    }
    let t2 = t * t;
    let denom = df + t2;
    // P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2)
    let two_tail = inc_beta(df / denom, t2 / denom, 0.5 * df, 0.5);
    let tail = 0.5 * two_tail;
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverts `cdf` by bracketing and bisection until `|cdf(t) - p| ≤ 1e-10`
/// and the bracket has collapsed to machine precision.
pub(crate) fn invert_cdf(p: f64, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("{p} not in (0, 1)")));
    }
    let mut lo = -1.0;
    let mut hi = 1.0;
    while cdf(lo) > p {
        lo *= 2.0;
        if !lo.is_finite() {
            return Err(Error::param(
                "p",
                format!("{p} is below the representable range"),
            ));
        }
    }
    while cdf(hi) < p {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::param(
                "p",
                format!("{p} is above the representable range"),
            ));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let c = cdf(mid);
        if c == p || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if c < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Quantile of the Student-t law.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::param("df", format!("{df} is not positive")));
    }
    invert_cdf(p, |t| t_cdf(t, df))
}
