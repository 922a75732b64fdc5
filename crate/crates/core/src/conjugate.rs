//! Pure-Gamma conjugate filter.
//!
//! Starting from `X_0 ~ Γ(λ, q)` every posterior is `Γ(λ_n, q)` with
//! `λ_n = λ_{n-1}/b + y_n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::{gamma_ln_pdf, inc_gamma_p};

/// `Γ(rate, shape)` posterior of the hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaPosterior {
    pub rate: f64,
    pub shape: f64,
}

/// One-step-ahead laws implied by a [`GammaPosterior`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Predictive {
    /// Rate of the prior for the next state, `λ_n / b`.
    pub next_rate: f64,
    /// Shape of the prior for the next state, `alpha`.
    pub next_shape: f64,
    /// `b Y_{n+1} / λ_n` is beta-prime with parameters `(pearson_b1, pearson_b2) = (beta, alpha)`.
    pub pearson_b1: f64,
    pub pearson_b2: f64,
    /// `E(Y_{n+1} | Y_{1:n})`, absent when `alpha <= 1`.
    pub mean: Option<f64>,
}

impl Predictive {
    pub fn mean_defined(&self) -> bool {
        self.mean.is_some()
    }

    /// Scale that maps the beta-prime variable onto `Y_{n+1}`.
    pub fn observation_scale(&self) -> f64 {
        self.next_rate
    }
}

impl GammaPosterior {
    pub fn new(rate: f64, shape: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite() && shape > 0.0 && shape.is_finite()) {
            return Err(Error::domain(format!(
                "Gamma posterior needs positive rate and shape, got ({rate}, {shape})"
            )));
        }
        Ok(Self { rate, shape })
    }

    /// `λ ↦ λ/b + y`.
    pub fn update(&self, b: f64, y: f64) -> Result<Self> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::domain(format!("observation must be positive and finite, got {y}")));
        }
        if !(b > 0.0) {
            return Err(Error::domain(format!("drift b must be positive, got {b}")));
        }
        Ok(Self {
            rate: self.rate / b + y,
            shape: self.shape,
        })
    }

    pub fn update_all(&self, b: f64, ys: &[f64]) -> Result<Self> {
        ys.iter().try_fold(*self, |post, &y| post.update(b, y))
    }

    pub fn predictive(&self, alpha: f64, beta: f64, b: f64) -> Predictive {
        let next_rate = self.rate / b;
        Predictive {
            next_rate,
            next_shape: alpha,
            pearson_b1: beta,
            pearson_b2: alpha,
            mean: (alpha > 1.0).then(|| next_rate * beta / (alpha - 1.0)),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_ln_pdf(self.rate, self.shape, x).exp()
        }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// Total variation (`½∫|f - g|`) between `Γ(l1, q)` and `Γ(l2, q)`.
///
/// The densities cross once, at `x* = q ln(l1/l2) / (l1 - l2)`, so the
/// distance is a difference of two incomplete-gamma values.
pub fn tv_gamma_same_shape(l1: f64, l2: f64, q: f64) -> f64 {
    if l1 == l2 {
        return 0.0;
    }
    let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
    tv_gamma_rate_gap(lo, hi - lo, q)
}

/// Same as [`tv_gamma_same_shape`] for rates `rate` and `rate + gap`, with
/// the gap supplied exactly. Stays accurate when `gap / rate` is far below
/// machine epsilon.
pub fn tv_gamma_rate_gap(rate: f64, gap: f64, q: f64) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    let (rate, gap) = if gap < 0.0 { (rate + gap, -gap) } else { (rate, gap) };
    let eps = gap / rate;
    // in units of t = rate·x the mass lies between t_a = rate·x* and
    // t_a + width under the unit-rate Γ(q) density
    let log_ratio = eps.ln_1p();
    let t_a = q * log_ratio / eps;
    let width = q * log_ratio;
    let tv = if width < 0.05 * t_a.max(1.0) {
        let (nodes, weights) = gauss_legendre(16);
        let half = 0.5 * width;
        let mid = t_a + half;
        half * nodes
            .iter()
            .zip(&weights)
            .map(|(n, w)| w * gamma_ln_pdf(1.0, q, mid + half * n).exp())
            .sum::<f64>()
    } else {
        inc_gamma_p(q, t_a + width) - inc_gamma_p(q, t_a)
    };
    tv.clamp(0.0, 1.0)
}

/// `√(2q) ‖h_0‖_Lip / (2H) · (b^n λ_n)^{-1}`, the pure-Gamma forgetting bound.
pub fn pure_gamma_bound(lambda_n: f64, b: f64, n: usize, q: f64, h0_lip: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::domain(format!("H must be positive, got {h}")));
    }
    if h0_lip == 0.0 {
        return Ok(0.0);
    }
    let scaled = lambda_n * b.powi(n as i32);
    Ok((2.0 * q).sqrt() * h0_lip / (2.0 * h) / scaled)
}
