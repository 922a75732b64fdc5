//! Special functions used throughout the crate.
//!
//! # Gamma parameterisation
//!
//! Every Gamma law in this crate is written **rate first**: `Γ(rate, shape)`
//! has density
//!
//! ```text
//! f(x) = rate^shape x^(shape-1) e^(-rate x) / Γ(shape),   mean = shape / rate
//! ```
//!
//! This is the opposite of the shape–scale convention used by most
//! statistics libraries, so watch the argument order.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Stirling series coefficients B_{2k} / (2k (2k-1)), k = 1..7.
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

const INC_GAMMA_EPS: f64 = 1e-16;
const INC_GAMMA_MAX_ITERS: usize = 10_000;
const TINY: f64 = 1e-300;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ζ(k) - 1` for `k = 2..`, by direct summation plus an Euler–Maclaurin tail.
fn zeta_minus_one() -> &'static [f64; 48] {
    static TABLE: std::sync::OnceLock<[f64; 48]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        const N: f64 = 40.0;
        let mut out = [0.0; 48];
        for (i, slot) in out.iter_mut().enumerate() {
            let k = (i + 2) as f64;
            let head: f64 = (2..40).rev().map(|n| (n as f64).powf(-k)).sum();
            let tail = N.powf(1.0 - k) / (k - 1.0) + 0.5 * N.powf(-k) + k / 12.0 * N.powf(-k - 1.0)
                - k * (k + 1.0) * (k + 2.0) / 720.0 * N.powf(-k - 3.0)
                + k * (k + 1.0) * (k + 2.0) * (k + 3.0) * (k + 4.0) / 30240.0 * N.powf(-k - 5.0);
            *slot = head + tail;
        }
        out
    })
}

/// `ln Γ(1 + z)` for `|z| <= 1/2`, accurate relative to the result near its zeros.
fn lgamma1p(z: f64) -> f64 {
    let zeta = zeta_minus_one();
    let mut sum = 0.0;
    let mut pow = z * z;
    for (i, c) in zeta.iter().enumerate() {
        let k = (i + 2) as f64;
        let term = c * pow / k;
        sum += if i % 2 == 0 { term } else { -term };
        if term.abs() < 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        pow *= z;
    }
    -z.ln_1p() + z * (1.0 - EULER_GAMMA) + sum
}

/// `ln Γ(a)` for `a > 0`, returning NaN outside the domain.
///
/// Near 1 and 2 a ζ-series keeps relative accuracy close to the zeros;
/// other arguments below 10 are shifted up with the recurrence `Γ(a+1) = aΓ(a)`
/// and the Stirling series is summed from there.
pub(crate) fn lgamma(a: f64) -> f64 {
    if !(a > 0.0) || !a.is_finite() {
        return f64::NAN;
    }
    if (a - 1.0).abs() <= 0.5 {
        return lgamma1p(a - 1.0);
    }
    if (a - 2.0).abs() <= 0.5 {
        let z = a - 2.0;
        return z.ln_1p() + lgamma1p(z);
    }
    let mut x = a;
    let mut prod = 1.0;
    while x < 10.0 {
        prod *= x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series - prod.ln()
}

/// `ln Γ(a)`.
pub fn log_gamma(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("log_gamma requires a > 0, got {a}")));
    }
    Ok(lgamma(a))
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// The Beta function `Γ(a)Γ(b)/Γ(a+b)`, evaluated in log space.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "beta_fn requires positive arguments, got ({a}, {b})"
        )));
    }
    Ok(lbeta(a, b).exp())
}

/// Regularised lower incomplete gamma `P(shape, x) = γ(shape, x) / Γ(shape)`.
///
/// Series expansion for `x < shape + 1`, Lentz continued fraction for the
/// upper function otherwise.
pub fn reg_inc_gamma_lower(shape: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || shape.is_infinite() {
        return Err(Error::domain(format!(
            "reg_inc_gamma_lower requires shape > 0, got {shape}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "reg_inc_gamma_lower requires x >= 0, got {x}"
        )));
    }
    Ok(inc_gamma_p(shape, x))
}

pub(crate) fn inc_gamma_p(shape: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < shape + 1.0 {
        inc_gamma_series(shape, x)
    } else {
        1.0 - inc_gamma_cf(shape, x)
    }
}

/// Upper regularised incomplete gamma `Q(shape, x) = 1 - P(shape, x)`,
/// computed without cancellation in the far right tail.
pub(crate) fn inc_gamma_q(shape: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < shape + 1.0 {
        1.0 - inc_gamma_series(shape, x)
    } else {
        inc_gamma_cf(shape, x)
    }
}

fn log_prefactor(shape: f64, x: f64) -> f64 {
    shape * x.ln() - x - lgamma(shape)
}

fn inc_gamma_series(shape: f64, x: f64) -> f64 {
    let mut ap = shape;
    let mut term = 1.0 / shape;
    let mut sum = term;
    for _ in 0..INC_GAMMA_MAX_ITERS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INC_GAMMA_EPS {
            break;
        }
    }
    (sum.ln() + log_prefactor(shape, x)).exp().min(1.0)
}

fn inc_gamma_cf(shape: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - shape;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INC_GAMMA_MAX_ITERS {
        let an = -(i as f64) * (i as f64 - shape);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < INC_GAMMA_EPS {
            break;
        }
    }
    (h.ln() + log_prefactor(shape, x)).exp().min(1.0)
}

/// Log-density of `Γ(rate, shape)` at `x > 0`.
pub(crate) fn gamma_ln_pdf(rate: f64, shape: f64, x: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - lgamma(shape)
}

/// Density of `Γ(rate, shape)` (rate first, mean `shape / rate`).
pub fn gamma_pdf(rate: f64, shape: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => rate,
            _ => 0.0,
        };
    }
    gamma_ln_pdf(rate, shape, x).exp()
}

/// CDF of `Γ(rate, shape)`.
pub fn gamma_cdf(rate: f64, shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        inc_gamma_p(shape, rate * x)
    }
}

/// Beta-prime (Pearson type VI) density
/// `z^(b1-1) (1+z)^-(b1+b2) / B(b1, b2)`.
pub fn pearson6_pdf(z: f64, b1: f64, b2: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("pearson6_pdf requires z > 0, got {z}")));
    }
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(Error::domain(format!(
            "pearson6_pdf requires positive parameters, got ({b1}, {b2})"
        )));
    }
    Ok(((b1 - 1.0) * z.ln() - (b1 + b2) * z.ln_1p() - lbeta(b1, b2)).exp())
}

/// Beta-prime CDF, by adaptive quadrature of [`pearson6_pdf`] over `(0, z]`.
pub fn pearson6_cdf(z: f64, b1: f64, b2: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    pearson6_pdf(z, b1, b2)?;
    let lb = lbeta(b1, b2);
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            ((b1 - 1.0) * t.ln() - (b1 + b2) * t.ln_1p() - lb).exp()
        }
    };
    let v = crate::quadrature::integrate(f, 0.0, z, 1e-13, 1e-11)?;
    Ok(v.clamp(0.0, 1.0))
}

/// `ln Σ exp(v_i)` without overflow.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}
