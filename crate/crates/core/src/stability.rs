//! Forgetting of the initial condition.
//!
//! Total-variation distances between two mixed-Gamma filters driven by the
//! same observations, the explicit pathwise bound and its constants, Monte
//! Carlo checks of the tail estimates on `b^j Y_j`, and geometric rate fits.
//!
//! Unless a name says otherwise, TV means `½∫|f - g|`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixed::{MixedGammaPosterior, MixingMeasure};
use crate::model::{sample_initial, simulate, ModelParams};
use crate::quadrature::integrate;
use crate::special::{gamma_ln_pdf, inc_gamma_q, lbeta, lgamma};
use crate::stats::RunningMoments;

/// Default fraction of the critical rate used for `δ`.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.95;

/// `E(W^r) = Beta(α + r, β) / Beta(α, β)` for `W ~ Beta(α, β)`.
pub fn ew_beta_moment(params: &ModelParams, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("moment order must be positive, got {r}")));
    }
    Ok(ln_ew_moment(params, r).exp())
}

fn ln_ew_moment(params: &ModelParams, r: f64) -> f64 {
    lbeta(params.alpha() + r, params.beta()) - lbeta(params.alpha(), params.beta())
}

/// `E(W^β)^(-1/β)`, the supremal forgetting rate.
pub fn critical_delta(params: &ModelParams) -> f64 {
    (-ln_ew_moment(params, params.beta()) / params.beta()).exp()
}

/// Constants of the pathwise bound and of the `L^p` rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    #[serde(rename = "B")]
    pub b_const: f64,
    #[serde(rename = "B_bar")]
    pub b_bar: f64,
    /// `√(2q(q+1)) / (2H)`.
    #[serde(rename = "Q")]
    pub q_const: f64,
    /// `√(q(q+1)) / √(2H)`, reported alongside for comparison.
    #[serde(rename = "Q_typeset")]
    pub q_typeset: f64,
    /// `√(2q) / (2H)`, the pure-Gamma prefactor.
    #[serde(rename = "Q_pure_gamma")]
    pub q_pure_gamma: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub h0_lip: f64,
    pub u0: f64,
    pub o0: f64,
    pub critical_delta: f64,
    pub delta: f64,
    /// `E(W^β)`.
    pub ew_beta: f64,
    /// Upper end of the admissible `p` interval; infinite when `B̄ = 0`.
    pub p_max: f64,
    pub p: Option<f64>,
    pub rho: Option<f64>,
}

/// Builds [`BoundConstants`] for support `[u0, o0]`, infimum `h` and Lipschitz
/// constant `h0_lip` of the initial density ratio. `delta` is set to
/// [`DEFAULT_DELTA_FRACTION`] of the critical rate.
pub fn thm4_constants(params: &ModelParams, u0: f64, o0: f64, h: f64, h0_lip: f64) -> Result<BoundConstants> {
    if !(u0 > 0.0 && u0.is_finite() && o0.is_finite()) {
        return Err(Error::domain(format!("support must be positive and finite, got [{u0}, {o0}]")));
    }
    if u0 > o0 {
        return Err(Error::domain(format!("support lower end {u0} exceeds upper end {o0}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("H must be positive and finite, got {h}")));
    }
    if !(h0_lip >= 0.0) {
        return Err(Error::domain(format!("Lipschitz constant must be nonnegative, got {h0_lip}")));
    }
    let beta = params.beta();
    let q = params.q();
    let (b_const, b_bar) = support_spread(params, u0, o0)?;
    let ew_beta = ln_ew_moment(params, beta).exp();
    let critical = critical_delta(params);
    let p_max = admissible_p_max(params, u0, o0)?;
    Ok(BoundConstants {
        b_const,
        b_bar,
        q_const: (2.0 * q * (q + 1.0)).sqrt() / (2.0 * h),
        q_typeset: (q * (q + 1.0)).sqrt() / (2.0 * h).sqrt(),
        q_pure_gamma: (2.0 * q).sqrt() / (2.0 * h),
        h,
        h0_lip,
        u0,
        o0,
        critical_delta: critical,
        delta: DEFAULT_DELTA_FRACTION * critical,
        ew_beta,
        p_max,
        p: None,
        rho: None,
    })
}

impl BoundConstants {
    /// Sets `δ = fraction · critical_delta`.
    pub fn with_delta_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::domain(format!("delta fraction must lie in (0, 1), got {fraction}")));
        }
        self.delta = fraction * self.critical_delta;
        Ok(self)
    }

    /// Sets `p` and `ρ` from [`lp_rate`].
    pub fn with_p(mut self, params: &ModelParams, p: f64) -> Result<Self> {
        self.rho = Some(lp_rate(params, self.u0, self.o0, p)?);
        self.p = Some(p);
        Ok(self)
    }
}

fn support_spread(params: &ModelParams, u0: f64, o0: f64) -> Result<(f64, f64)> {
    if !(u0 > 0.0 && u0.is_finite() && o0.is_finite() && u0 <= o0) {
        return Err(Error::domain(format!("support [{u0}, {o0}] must satisfy 0 < u0 <= o0 < ∞")));
    }
    let beta = params.beta();
    let ratio = o0 / u0;
    let inner = beta * (beta + 1.0) - 2.0 * beta * beta / ratio + beta * (beta + 1.0) * ratio * ratio;
    let b_const = 0.5 * inner.sqrt();
    Ok((b_const, b_const * (o0 - u0)))
}

/// `-(u0/B̄) ln E(W^β)`, the upper end of the admissible `p` interval;
/// infinite when `u0 = o0`.
pub fn admissible_p_max(params: &ModelParams, u0: f64, o0: f64) -> Result<f64> {
    let (_, b_bar) = support_spread(params, u0, o0)?;
    Ok(if b_bar == 0.0 {
        f64::INFINITY
    } else {
        -(u0 / b_bar) * ln_ew_moment(params, params.beta())
    })
}

/// `ρ = (E(W^β) e^(pB̄/u0))^(p/(p+β))`, the `L^p` forgetting rate; `p` must
/// lie in `(0, p_max)`.
pub fn lp_rate(params: &ModelParams, u0: f64, o0: f64, p: f64) -> Result<f64> {
    let p_max = admissible_p_max(params, u0, o0)?;
    if !(p > 0.0 && p < p_max) {
        return Err(Error::domain(format!("p = {p} is outside the admissible interval (0, {p_max})")));
    }
    let (_, b_bar) = support_spread(params, u0, o0)?;
    let beta = params.beta();
    Ok(((ln_ew_moment(params, beta) + p * b_bar / u0) * p / (p + beta)).exp())
}

/// The pathwise bound for `n = 0..=ys.len()`:
/// `Q ‖h_0‖_Lip / (b^n u_n) · Π_{k<n} (1 + B̄ / (b^k u_k))`
/// with `b^k u_k = u0 + Σ_{j≤k} b^j y_j`.
pub fn thm4_bound(consts: &BoundConstants, b: f64, ys: &[f64]) -> Vec<f64> {
    if consts.h0_lip == 0.0 {
        return vec![0.0; ys.len() + 1];
    }
    let scale = consts.q_const * consts.h0_lip;
    let ln_b = b.ln();
    let mut scaled_u = consts.u0;
    let mut product = 1.0;
    let mut out = Vec::with_capacity(ys.len() + 1);
    out.push(scale / scaled_u);
    for (j, &y) in ys.iter().enumerate() {
        product *= 1.0 + consts.b_bar / scaled_u;
        scaled_u += ((j + 1) as f64 * ln_b + y.ln()).exp();
        out.push(scale * product / scaled_u);
    }
    out
}

const TV_SCAN_POINTS: usize = 512;
const TV_TAIL: f64 = 1e-17;

/// `½∫|π_a - π_b|` between two mixed-Gamma posteriors with the same shape.
///
/// Writing every atom relative to the slowest one, `λ_i = λ_r (1 + ε_i)`, the
/// signed density difference in `t = λ_r x` is
/// `Γ(1, q)(t) · Σ Δw_i expm1(q ln(1+ε_i) - ε_i t)`, which keeps full
/// relative accuracy as the `ε_i` shrink. When both posteriors share the
/// same affine rate frame the `ε_i` come from exact anchor gaps.
pub fn tv_mixed_pair(a: &MixedGammaPosterior, b: &MixedGammaPosterior) -> Result<f64> {
    if a.q != b.q {
        return Err(Error::domain(format!("shape mismatch: {} vs {}", a.q, b.q)));
    }
    let q = a.q;
    let same_frame = a.mix.frame() == b.mix.frame();
    let keys = |m: &MixingMeasure| -> Vec<(f64, f64)> {
        (0..m.len())
            .map(|i| (if same_frame { m.anchors()[i] } else { m.rate(i) }, m.weight(i)))
            .collect()
    };
    let (ka, kb) = (keys(&a.mix), keys(&b.mix));
    let mut diff: Vec<(f64, f64)> = Vec::with_capacity(ka.len() + kb.len());
    let (mut i, mut j) = (0, 0);
    while i < ka.len() || j < kb.len() {
        let take_a = j >= kb.len() || (i < ka.len() && ka[i].0 <= kb[j].0);
        let take_b = i >= ka.len() || (j < kb.len() && kb[j].0 <= ka[i].0);
        let key = if take_a { ka[i].0 } else { kb[j].0 };
        let mut dw = 0.0;
        if take_a {
            dw += ka[i].1;
            i += 1;
        }
        if take_b {
            dw -= kb[j].1;
            j += 1;
        }
        if dw != 0.0 {
            diff.push((key, dw));
        }
    }
    if diff.len() < 2 {
        return Ok(0.0);
    }
    let ref_key = diff[0].0;
    let (scale, shift) = a.mix.frame();
    let ref_rate = if same_frame { scale * ref_key + shift } else { ref_key };
    let terms: Vec<(f64, f64, f64)> = diff
        .iter()
        .map(|&(k, dw)| {
            let gap = if same_frame { scale * (k - ref_key) } else { k - ref_key };
            let eps = gap / ref_rate;
            (dw, q * eps.ln_1p(), eps)
        })
        .collect();
    let signed = |t: f64| -> f64 { terms.iter().map(|&(dw, c, eps)| dw * (c - eps * t).exp_m1()).sum() };
    let integrand = |t: f64| -> f64 {
        if t <= 0.0 {
            return if q == 1.0 { signed(0.0).abs() } else { 0.0 };
        }
        gamma_ln_pdf(1.0, q, t).exp() * signed(t).abs()
    };

    let mut upper = q + 1.0;
    while inc_gamma_q(q + 1.0, upper) > TV_TAIL {
        upper *= 1.5;
    }
    let step = upper / TV_SCAN_POINTS as f64;
    let mut breaks = vec![0.0];
    let mut crude = 0.0;
    let mut prev = (0.0, signed(0.0), integrand(0.0));
    for k in 1..=TV_SCAN_POINTS {
        let t = step * k as f64;
        let s = signed(t);
        let f = integrand(t);
        crude += 0.5 * step * (prev.2 + f);
        if s * prev.1 < 0.0 {
            let (mut lo, mut hi) = (prev.0, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if signed(mid) * prev.1 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
        prev = (t, s, f);
    }
    breaks.push(upper);
    if !(crude > 0.0) {
        return Ok(0.0);
    }
    let abs_tol = 1e-10 * crude;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let tol = abs_tol * (w[1] - w[0]) / upper;
        total += integrate(integrand, w[0], w[1], tol, 1e-10)?;
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// TV for `n = 0..=ys.len()` between the filters started from `mix_true` and
/// `mix_assumed`.
pub fn tv_series(
    params: &ModelParams,
    mix_true: &MixingMeasure,
    mix_assumed: &MixingMeasure,
    ys: &[f64],
) -> Result<Vec<f64>> {
    let mut a = MixedGammaPosterior::new(params.q(), mix_true.clone())?;
    let mut b = MixedGammaPosterior::new(params.q(), mix_assumed.clone())?;
    let mut out = Vec::with_capacity(ys.len() + 1);
    out.push(tv_mixed_pair(&a, &b)?);
    for &y in ys {
        a = a.update(params, y)?;
        b = b.update(params, y)?;
        out.push(tv_mixed_pair(&a, &b)?);
    }
    Ok(out)
}

/// Least-squares slope of `ln series[n]` against `n` over `n >= burn_in`.
pub fn fit_rate(series: &[f64], burn_in: usize) -> Result<f64> {
    if series.len() < burn_in + 8 {
        return Err(Error::domain(format!(
            "rate fit needs at least 8 points after burn-in {burn_in}, got {}",
            series.len().saturating_sub(burn_in)
        )));
    }
    let window = &series[burn_in..];
    if let Some(k) = window.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::numerical(format!(
            "TV underflow at n = {}; increase precision or shorten horizon",
            burn_in + k
        )));
    }
    let m = window.len() as f64;
    let mean_n = burn_in as f64 + (m - 1.0) / 2.0;
    let logs: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let mean_l = logs.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let dx = (burn_in + k) as f64 - mean_n;
        sxy += dx * (l - mean_l);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

/// Per-trajectory stability summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub tv: Vec<f64>,
    pub bound: Vec<f64>,
    /// `None` when the series is identically zero or underflows before
    /// eight points are available.
    pub fitted_rate: Option<f64>,
    /// Exclusive end of the fit window when underflow forced a truncation.
    pub fit_truncated_at: Option<usize>,
    pub predicted_log_rate: f64,
    /// Steps with `tv > bound`.
    pub violations: usize,
    /// Steps with `2 tv > bound`, the unnormalised convention.
    pub violations_full: usize,
}

impl StabilityReport {
    pub fn new(tv: Vec<f64>, bound: Vec<f64>, burn_in: usize, delta: f64) -> Result<Self> {
        if tv.len() != bound.len() {
            return Err(Error::domain(format!(
                "tv has {} entries but bound has {}",
                tv.len(),
                bound.len()
            )));
        }
        let violations = tv.iter().zip(&bound).filter(|(t, b)| *t > *b).count();
        let violations_full = tv.iter().zip(&bound).filter(|(t, b)| 2.0 * **t > **b).count();
        let (fitted_rate, fit_truncated_at) = match fit_rate(&tv, burn_in) {
            Ok(rate) => (Some(rate), None),
            Err(_) => {
                let end = burn_in
                    + tv[burn_in.min(tv.len())..]
                        .iter()
                        .position(|v| !(*v > 0.0 && v.is_finite()))
                        .unwrap_or(0);
                match fit_rate(&tv[..end], burn_in) {
                    Ok(rate) => (Some(rate), Some(end)),
                    Err(_) => (None, None),
                }
            }
        };
        Ok(Self {
            tv,
            bound,
            fitted_rate,
            fit_truncated_at,
            predicted_log_rate: -delta.ln(),
            violations,
            violations_full,
        })
    }
}

/// One line of a Monte-Carlo tail check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheckRow {
    pub index: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    /// Extra allowance for truncating an unbounded random index.
    pub truncation: f64,
}

impl TailCheckRow {
    /// `empirical <= bound + k·std_error + truncation`.
    pub fn holds(&self, k: f64) -> bool {
        self.empirical <= self.bound + k * self.std_error + self.truncation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub delta: f64,
    pub n_mc: usize,
    /// `E(X_0^β)`.
    pub x0_beta_moment: f64,
    /// `δ^β E(W^β)`, for the survival check.
    pub q_bar: Option<f64>,
    pub horizon: usize,
    pub rows: Vec<TailCheckRow>,
}

fn proportion_row(index: usize, hits: usize, n: usize, bound: f64, truncation: f64) -> TailCheckRow {
    let p = hits as f64 / n as f64;
    TailCheckRow {
        index,
        empirical: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        bound,
        truncation,
    }
}

/// Log of the bound multiplier `E(X_0^β) / Γ(β+1)`.
fn ln_tail_prefactor(params: &ModelParams, mix0: &MixingMeasure) -> Result<(f64, f64)> {
    let moment = MixedGammaPosterior::new(params.q(), mix0.clone())?.moment(params.beta())?;
    Ok((moment, moment.ln() - lgamma(params.beta() + 1.0)))
}

/// Empirical `P(b^j Y_j ≤ δ^j)` for `j = 1..=j_max` against
/// `δ^(jβ) E(W^β)^j E(X_0^β) / Γ(β+1)`.
pub fn lemma2_tail_check<R: Rng + ?Sized>(
    params: &ModelParams,
    mix0: &MixingMeasure,
    delta: f64,
    j_max: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<TailCheck> {
    if !(delta >= 0.0 && delta < critical_delta(params)) {
        return Err(Error::domain(format!(
            "delta must lie in [0, {}), got {delta}",
            critical_delta(params)
        )));
    }
    if j_max == 0 || n_mc == 0 {
        return Err(Error::domain("j_max and n_mc must be positive"));
    }
    let (moment, ln_pre) = ln_tail_prefactor(params, mix0)?;
    let ln_delta = delta.ln();
    let ln_b = params.b().ln();
    let mut hits = vec![0usize; j_max];
    for _ in 0..n_mc {
        let x0 = sample_initial(rng, mix0, params.q())?;
        let path = simulate(rng, params, x0, j_max)?;
        for (j, y) in path.y.iter().enumerate() {
            let k = (j + 1) as f64;
            if k * ln_b + y.ln() <= k * ln_delta {
                hits[j] += 1;
            }
        }
    }
    let ln_ew = ln_ew_moment(params, params.beta());
    let rows = hits
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let k = (j + 1) as f64;
            let bound = (k * params.beta() * ln_delta + k * ln_ew + ln_pre).exp();
            proportion_row(j + 1, h, n_mc, bound, 0.0)
        })
        .collect();
    Ok(TailCheck {
        delta,
        n_mc,
        x0_beta_moment: moment,
        q_bar: None,
        horizon: j_max,
        rows,
    })
}

/// Empirical survival `P(J_δ > n)` for `n = 0..=n_max` against
/// `E(X_0^β) q̄^n / (Γ(β+1)(1 - q̄))`, `q̄ = δ^β E(W^β)`.
///
/// `J_δ` is read off as one past the last index `j ≤ 4 n_max` with
/// `b^j Y_j ≤ δ^j`. Violations beyond that horizon have total probability at
/// most the bound at `4 n_max + 1`, which is reported as the truncation
/// allowance.
pub fn lemma10_tail_check<R: Rng + ?Sized>(
    params: &ModelParams,
    mix0: &MixingMeasure,
    delta: f64,
    n_max: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<TailCheck> {
    if !(delta > 1.0) {
        return Err(Error::domain(format!("delta must exceed 1, got {delta}")));
    }
    let ln_q_bar = params.beta() * delta.ln() + ln_ew_moment(params, params.beta());
    if !(ln_q_bar < 0.0) {
        return Err(Error::domain(format!(
            "q̄ = δ^β E(W^β) = {} must be below 1 (delta below {})",
            ln_q_bar.exp(),
            critical_delta(params)
        )));
    }
    if n_max == 0 || n_mc == 0 {
        return Err(Error::domain("n_max and n_mc must be positive"));
    }
    let q_bar = ln_q_bar.exp();
    let horizon = 4 * n_max;
    let (moment, ln_pre) = ln_tail_prefactor(params, mix0)?;
    let ln_delta = delta.ln();
    let ln_b = params.b().ln();
    let mut survivors = vec![0usize; n_max + 1];
    for _ in 0..n_mc {
        let x0 = sample_initial(rng, mix0, params.q())?;
        let path = simulate(rng, params, x0, horizon)?;
        let last = path
            .y
            .iter()
            .enumerate()
            .filter(|(j, y)| {
                let k = (j + 1) as f64;
                k * ln_b + y.ln() <= k * ln_delta
            })
            .map(|(j, _)| j + 1)
            .last()
            .unwrap_or(0);
        for s in survivors.iter_mut().take(last.min(n_max) + 1) {
            *s += 1;
        }
    }
    let bound_at = |n: usize| (ln_pre + n as f64 * ln_q_bar).exp() / (1.0 - q_bar);
    let truncation = bound_at(horizon + 1);
    let rows = survivors
        .iter()
        .enumerate()
        .map(|(n, &s)| proportion_row(n, s, n_mc, bound_at(n), truncation))
        .collect();
    Ok(TailCheck {
        delta,
        n_mc,
        x0_beta_moment: moment,
        q_bar: Some(q_bar),
        horizon,
        rows,
    })
}

/// One line of the negative-moment check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub predicted: f64,
}

/// Monte-Carlo `E((b^n Y_n)^(-p))` for `n = 1..=n_max` against
/// `Γ(β-p) E(X_0^p) E(W^p)^n / Γ(β)`; requires `0 < p < β`.
pub fn scaled_observation_moments<R: Rng + ?Sized>(
    params: &ModelParams,
    mix0: &MixingMeasure,
    p: f64,
    n_max: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<MomentRow>> {
    if !(p > 0.0 && p < params.beta()) {
        return Err(Error::domain(format!("p must lie in (0, β = {}), got {p}", params.beta())));
    }
    let x0_moment = MixedGammaPosterior::new(params.q(), mix0.clone())?.moment(p)?;
    let ln_b = params.b().ln();
    let mut acc = vec![RunningMoments::default(); n_max];
    for _ in 0..n_mc {
        let x0 = sample_initial(rng, mix0, params.q())?;
        let path = simulate(rng, params, x0, n_max)?;
        for (j, y) in path.y.iter().enumerate() {
            let k = (j + 1) as f64;
            acc[j].push((-p * (k * ln_b + y.ln())).exp());
        }
    }
    let ln_g = lgamma(params.beta() - p) - lgamma(params.beta());
    let ln_ew = ln_ew_moment(params, p);
    Ok(acc
        .iter()
        .enumerate()
        .map(|(j, m)| MomentRow {
            n: j + 1,
            empirical: m.mean(),
            std_error: m.std_error(),
            predicted: x0_moment * (ln_g + (j + 1) as f64 * ln_ew).exp(),
        })
        .collect())
}
