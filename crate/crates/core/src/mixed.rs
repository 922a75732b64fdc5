//! Mixed-Gamma filter.
//!
//! The posterior of `X_n` has density `∝ x^(q-1) ∫ λ^q e^(-λx) dU_n(λ)` for a
//! probability measure `U_n` on rates. With a finite atomic `U_0` the update
//! maps atoms to atoms, so the filter is exact and quadrature free:
//!
//! ```text
//! λ' = λ/b + y,    w' ∝ w · λ^alpha · λ'^(-q)
//! ```
//!
//! Atom rates are stored as `scale · anchor + shift` where `anchor` is the
//! initial rate, `scale = b^-n` and `shift = Σ b^(k-n) y_k` are shared by all
//! atoms. Gaps between atoms are therefore `scale · (anchor_i - anchor_j)`
//! exactly, even once `shift` dwarfs them; the stability computations depend
//! on this.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{gamma_ln_pdf, inc_gamma_p, inc_gamma_q, lgamma, log_sum_exp};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Finite atomic measure over Gamma rates, with tracked support `[u_n, o_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixingRepr", into = "MixingRepr")]
pub struct MixingMeasure {
    anchors: Vec<f64>,
    log_weights: Vec<f64>,
    anchor_lo: f64,
    anchor_hi: f64,
    scale: f64,
    shift: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixingRepr {
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    support_lo: Option<f64>,
    #[serde(default)]
    support_hi: Option<f64>,
}

impl TryFrom<MixingRepr> for MixingMeasure {
    type Error = Error;

    fn try_from(r: MixingRepr) -> Result<Self> {
        let lo = r
            .support_lo
            .unwrap_or_else(|| r.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min));
        let hi = r
            .support_hi
            .unwrap_or_else(|| r.atoms.iter().map(|a| a.0).fold(0.0, f64::max));
        MixingMeasure::with_support(r.atoms, lo, hi)
    }
}

impl From<MixingMeasure> for MixingRepr {
    fn from(m: MixingMeasure) -> Self {
        MixingRepr {
            atoms: m.atoms().collect(),
            support_lo: Some(m.support_lo()),
            support_hi: Some(m.support_hi()),
        }
    }
}

impl MixingMeasure {
    /// Atoms `(rate, weight)` with support spanning the smallest and largest
    /// rate.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let lo = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let hi = atoms.iter().map(|a| a.0).fold(0.0, f64::max);
        Self::with_support(atoms, lo, hi)
    }

    /// A one-atom measure `δ_λ`: the pure-Gamma initial condition.
    pub fn dirac(lambda: f64) -> Result<Self> {
        Self::new(vec![(lambda, 1.0)])
    }

    /// Atoms with an explicit support interval `[lo, hi]` containing them.
    ///
    /// Weights must be positive and sum to one within `1e-9`; they are
    /// renormalised exactly. Repeated rates are merged.
    pub fn with_support(mut atoms: Vec<(f64, f64)>, lo: f64, hi: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("mixing measure needs at least one atom"));
        }
        for &(l, w) in &atoms {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::domain(format!("atom rate must be positive and finite, got {l}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::domain(format!("atom weight must be positive, got {w}")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("atom weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (l, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == l => last.1 += w,
                _ => merged.push((l, w)),
            }
        }
        let min = merged[0].0;
        let max = merged[merged.len() - 1].0;
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= min && max <= hi) {
            return Err(Error::domain(format!(
                "support [{lo}, {hi}] must be a compact subset of (0, ∞) containing all atoms [{min}, {max}]"
            )));
        }
        let ln_total = total.ln();
        Ok(Self {
            anchors: merged.iter().map(|a| a.0).collect(),
            log_weights: merged.iter().map(|a| a.1.ln() - ln_total).collect(),
            anchor_lo: lo,
            anchor_hi: hi,
            scale: 1.0,
            shift: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.scale * self.anchors[i] + self.shift
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.rate(i))
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_weights[i].exp()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `(rate, weight)` pairs in increasing rate order.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|i| (self.rate(i), self.weight(i)))
    }

    /// `u_n`.
    pub fn support_lo(&self) -> f64 {
        self.scale * self.anchor_lo + self.shift
    }

    /// `o_n`.
    pub fn support_hi(&self) -> f64 {
        self.scale * self.anchor_hi + self.shift
    }

    /// `o_n / u_n`, computed from the exact support gap.
    pub fn support_ratio(&self) -> f64 {
        1.0 + self.scale * (self.anchor_hi - self.anchor_lo) / self.support_lo()
    }

    pub(crate) fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub(crate) fn frame(&self) -> (f64, f64) {
        (self.scale, self.shift)
    }

    /// Exact rate gap `rate(i) - rate(j)`.
    pub fn rate_gap(&self, i: usize, j: usize) -> f64 {
        self.scale * (self.anchors[i] - self.anchors[j])
    }

    /// Draw a rate with probability equal to its weight.
    pub fn sample_rate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        for i in 0..self.len() {
            u -= self.weight(i);
            if u < 0.0 {
                return self.rate(i);
            }
        }
        self.rate(self.len() - 1)
    }

    /// One filter step given the observation `y`.
    pub fn update(&self, params: &ModelParams, y: f64) -> Result<Self> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::domain(format!("observation must be positive and finite, got {y}")));
        }
        let b = params.b();
        let scale = self.scale / b;
        let shift = self.shift / b + y;
        let unnormalised: Vec<f64> = (0..self.len())
            .map(|i| {
                let old = self.rate(i);
                let new = scale * self.anchors[i] + shift;
                self.log_weights[i] + params.alpha() * old.ln() - params.q() * new.ln()
            })
            .collect();
        let norm = log_sum_exp(&unnormalised);
        if !norm.is_finite() {
            return Err(Error::numerical("mixing weights degenerated during update"));
        }
        Ok(Self {
            anchors: self.anchors.clone(),
            log_weights: unnormalised.iter().map(|w| w - norm).collect(),
            anchor_lo: self.anchor_lo,
            anchor_hi: self.anchor_hi,
            scale,
            shift,
        })
    }

    /// Run [`update`](Self::update) over a sequence of observations.
    pub fn update_all(&self, params: &ModelParams, ys: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        for &y in ys {
            m = m.update(params, y)?;
        }
        Ok(m)
    }
}

/// Mixed-Gamma posterior: mixing measure plus the common shape `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGammaPosterior {
    pub q: f64,
    pub mix: MixingMeasure,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PosteriorHeader {
    q: f64,
    support_lo: f64,
    support_hi: f64,
}

impl MixedGammaPosterior {
    pub fn new(q: f64, mix: MixingMeasure) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("shape q must be positive, got {q}")));
        }
        Ok(Self { q, mix })
    }

    pub fn update(&self, params: &ModelParams, y: f64) -> Result<Self> {
        Ok(Self {
            q: self.q,
            mix: self.mix.update(params, y)?,
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .mix
            .log_weights
            .iter()
            .zip(self.mix.rates())
            .map(|(lw, l)| lw + gamma_ln_pdf(l, self.q, x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Posterior density `Σ w_i Γ(λ_i, q)(x)`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("posterior_pdf requires x > 0, got {x}")));
        }
        Ok(self.ln_pdf(x).exp())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.mix.atoms().map(|(l, w)| w * inc_gamma_p(self.q, l * x)).sum()
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        self.mix.atoms().map(|(l, w)| w * inc_gamma_q(self.q, l * x)).sum()
    }

    /// Inverse CDF by bisection; the upper tail is solved on the survival
    /// function so that `p` close to one stays accurate.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let upper = p > 0.5;
        let target = if upper { 1.0 - p } else { p };
        let below = |x: f64| {
            if upper {
                self.sf(x) > target
            } else {
                self.cdf(x) < target
            }
        };
        let mut hi = self.q / self.mix.rate(0);
        while below(hi) {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `E(X^m) = Σ w_i Γ(q+m) / (Γ(q) λ_i^m)` for `m > -q`.
    pub fn moment(&self, m: f64) -> Result<f64> {
        if !(m > -self.q) {
            return Err(Error::domain(format!("moment order must exceed -q = {}, got {m}", -self.q)));
        }
        let ln_ratio = lgamma(self.q + m) - lgamma(self.q);
        Ok(self
            .mix
            .atoms()
            .map(|(l, w)| w * (ln_ratio - m * l.ln()).exp())
            .sum())
    }

    pub fn mean(&self) -> f64 {
        self.mix.atoms().map(|(l, w)| w * self.q / l).sum()
    }

    pub fn variance(&self) -> f64 {
        let second: f64 = self
            .mix
            .atoms()
            .map(|(l, w)| w * self.q * (self.q + 1.0) / (l * l))
            .sum();
        let mean = self.mean();
        (second - mean * mean).max(0.0)
    }

    /// Mean of the next observation, `Σ w_i (λ_i/b) β/(α-1)`; `None` when
    /// `α ≤ 1` (heavy tail, no mean).
    pub fn predictive_mean(&self, params: &ModelParams) -> Option<f64> {
        if params.alpha() <= 1.0 {
            return None;
        }
        let k = params.beta() / (params.alpha() - 1.0) / params.b();
        Some(self.mix.atoms().map(|(l, w)| w * l * k).sum())
    }

    /// Text form: a `# {json header}` line with `q` and the support, then
    /// CSV `lambda,weight` rows.
    pub fn to_csv_string(&self) -> String {
        let header = PosteriorHeader {
            q: self.q,
            support_lo: self.mix.support_lo(),
            support_hi: self.mix.support_hi(),
        };
        let mut out = format!(
            "# {}\nlambda,weight\n",
            serde_json::to_string(&header).expect("header serialises")
        );
        for (l, w) in self.mix.atoms() {
            let _ = writeln!(out, "{l},{w}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let json = first
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, "expected `# {json header}` line"))?;
        let header: PosteriorHeader =
            serde_json::from_str(json.trim()).map_err(|e| Error::parse(1, e.to_string()))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(rest.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(2, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["lambda", "weight"] {
            return Err(Error::parse(2, "expected header `lambda,weight`"));
        }
        let mut atoms = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 3;
            let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::parse(line, "expected 2 fields"));
            }
            let l = crate::model::parse_positive(&record[0], line, "lambda")?;
            let w = crate::model::parse_positive(&record[1], line, "weight")?;
            atoms.push((l, w));
        }
        let mix = MixingMeasure::with_support(atoms, header.support_lo, header.support_hi)
            .map_err(|e| Error::parse(0, e.to_string()))?;
        MixedGammaPosterior::new(header.q, mix).map_err(|e| Error::parse(1, e.to_string()))
    }
}

/// Numerical infimum and Lipschitz constant of `h_0 = π̃_0 / π_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRatioProfile {
    /// Certified lower bound `H`; zero when the bound is unusable.
    pub h_inf: f64,
    /// Lipschitz constant estimate; infinite when `h_0` is unbounded.
    pub lip: f64,
    pub grid_min: f64,
    pub limit_at_zero: f64,
    pub limit_at_infinity: f64,
}

const H_FLOOR: f64 = 1e-12;

/// `ln(Σ w λ^q e^{-λx})` together with the softmax-weighted mean rate.
fn ratio_terms(mix: &MixingMeasure, q: f64, x: f64) -> (f64, f64) {
    let terms: Vec<f64> = mix
        .log_weights
        .iter()
        .zip(mix.rates())
        .map(|(lw, l)| lw + q * l.ln() - l * x)
        .collect();
    let ln_sum = log_sum_exp(&terms);
    let mean_rate = terms
        .iter()
        .zip(mix.rates())
        .map(|(t, l)| (t - ln_sum).exp() * l)
        .sum();
    (ln_sum, mean_rate)
}

/// Evaluate `h_0 = π̃_0/π_0` on `grid`, returning its infimum and Lipschitz
/// constant extended by the analytic limits at `0⁺` and `∞`.
///
/// The common factor `x^(q-1)/Γ(q)` cancels, so
/// `h_0(x) = Σ w̃ λ̃^q e^{-λ̃x} / Σ w λ^q e^{-λx}` and
/// `h_0'(x) = h_0(x) (E_π[λ] - E_π̃[λ])` with softmax-weighted rate means.
pub fn density_ratio_profile(
    mix_true: &MixingMeasure,
    mix_assumed: &MixingMeasure,
    q: f64,
    grid: &[f64],
) -> Result<DensityRatioProfile> {
    if grid.is_empty() || !(grid[0] > 0.0) {
        return Err(Error::domain("ratio grid must be non-empty and positive"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !grid[grid.len() - 1].is_finite() {
        return Err(Error::domain("ratio grid must be strictly increasing and finite"));
    }
    let eval = |x: f64| {
        let (ln_n, mean_n) = ratio_terms(mix_true, q, x);
        let (ln_d, mean_d) = ratio_terms(mix_assumed, q, x);
        let h = (ln_n - ln_d).exp();
        (h, h * (mean_d - mean_n))
    };
    let (h0, dh0) = eval(0.0);
    let mut grid_min = f64::INFINITY;
    let mut lip = dh0.abs();
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let (h, dh) = eval(x);
        grid_min = grid_min.min(h);
        lip = lip.max(dh.abs());
        if let Some((px, ph)) = prev {
            lip = lip.max(((h - ph) / (x - px)).abs());
        }
        prev = Some((x, h));
    }
    // slowest-decaying components dominate as x → ∞
    let (lt, lw_t) = (mix_true.rate(0), mix_true.log_weights[0]);
    let (la, lw_a) = (mix_assumed.rate(0), mix_assumed.log_weights[0]);
    let limit_at_infinity = if lt > la {
        0.0
    } else if lt < la {
        f64::INFINITY
    } else {
        (lw_t - lw_a).exp()
    };
    if limit_at_infinity.is_infinite() {
        lip = f64::INFINITY;
    }
    let inf = grid_min.min(h0).min(limit_at_infinity);
    Ok(DensityRatioProfile {
        h_inf: if inf < H_FLOOR { 0.0 } else { inf },
        lip,
        grid_min,
        limit_at_zero: h0,
        limit_at_infinity,
    })
}

/// A geometric grid suitable for [`density_ratio_profile`]: from far below
/// the smallest mean scale to far into the tail of the slowest component.
pub fn default_ratio_grid(mix_true: &MixingMeasure, mix_assumed: &MixingMeasure, q: f64) -> Vec<f64> {
    let slow = mix_true.rate(0).min(mix_assumed.rate(0));
    let fast = mix_true
        .rate(mix_true.len() - 1)
        .max(mix_assumed.rate(mix_assumed.len() - 1));
    let lo = 1e-6 / fast;
    let hi = (q + 200.0) / slow;
    let n = 20_000;
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::GammaPosterior;
    use crate::quadrature::integrate_to_infinity;
    use crate::sampling::RngStream;
    use crate::special::gamma_pdf;
    use rand::Rng;

    fn two_atoms() -> MixingMeasure {
        MixingMeasure::new(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(MixingMeasure::new(vec![]).is_err());
        assert!(MixingMeasure::new(vec![(1.0, 0.4)]).is_err());
        assert!(MixingMeasure::new(vec![(-1.0, 1.0)]).is_err());
        assert!(MixingMeasure::new(vec![(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(MixingMeasure::with_support(vec![(1.0, 1.0)], 1.5, 2.0).is_err());
        let m = MixingMeasure::new(vec![(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms().collect::<Vec<_>>(), vec![(1.0, 0.5), (2.0, 0.5)]);
    }

    #[test]
    fn update_matches_hand_computation() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let m = two_atoms().update(&p, 1.0).unwrap();
        let atoms: Vec<_> = m.atoms().collect();
        assert_eq!(atoms[0].0, 2.0);
        assert_eq!(atoms[1].0, 3.0);
        assert!((atoms[0].1 - 9.0 / 17.0).abs() < 1e-15);
        assert!((atoms[1].1 - 8.0 / 17.0).abs() < 1e-15);
        assert!(two_atoms().update(&p, 0.0).is_err());
        assert!(two_atoms().update(&p, f64::NAN).is_err());
    }

    #[test]
    fn single_atom_tracks_conjugate_rate() {
        let p = ModelParams::new(2.0, 1.5, 0.8).unwrap();
        let mut mix = MixingMeasure::dirac(1.7).unwrap();
        let mut conj = GammaPosterior::new(1.7, p.q()).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..30 {
            let y: f64 = rng.random::<f64>() * 3.0 + 0.01;
            mix = mix.update(&p, y).unwrap();
            conj = conj.update(p.b(), y).unwrap();
            assert!(((mix.rate(0) - conj.rate) / conj.rate).abs() < 1e-12);
            assert_eq!(mix.weight(0), 1.0);
        }
    }

    #[test]
    fn support_follows_closed_form() {
        let p = ModelParams::new(1.0, 2.0, 1.25).unwrap();
        let mut m = MixingMeasure::with_support(vec![(1.2, 0.3), (1.9, 0.7)], 1.0, 2.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let ys: Vec<f64> = (0..25).map(|_| rng.random::<f64>() * 2.0 + 0.1).collect();
        let mut last_ratio = m.support_ratio();
        for (n, &y) in ys.iter().enumerate() {
            m = m.update(&p, y).unwrap();
            let n = n + 1;
            let tail: f64 = (1..=n).map(|k| p.b().powi(k as i32 - n as i32) * ys[k - 1]).sum();
            let u = p.b().powi(-(n as i32)) * 1.0 + tail;
            let o = p.b().powi(-(n as i32)) * 2.0 + tail;
            assert!(((m.support_lo() - u) / u).abs() < 1e-12);
            assert!(((m.support_hi() - o) / o).abs() < 1e-12);
            assert!(m.support_lo() <= m.rate(0) && m.rate(1) <= m.support_hi());
            let ratio = m.support_ratio();
            assert!(ratio >= 1.0 && ratio <= last_ratio);
            last_ratio = ratio;
            let total: f64 = (0..m.len()).map(|i| m.weight(i)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(m.len(), 2);
        }
    }

    #[test]
    fn rate_gap_survives_large_shift() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let mut m = two_atoms();
        for _ in 0..5 {
            m = m.update(&p, 1e18).unwrap();
        }
        // the rates themselves are indistinguishable in f64
        assert_eq!(m.rate(0), m.rate(1));
        assert_eq!(m.rate_gap(1, 0), 1.0);
    }

    #[test]
    fn pdf_examples() {
        let single = MixedGammaPosterior::new(2.5, MixingMeasure::dirac(1.3).unwrap()).unwrap();
        for x in [0.1, 1.0, 4.0] {
            let want = gamma_pdf(1.3, 2.5, x);
            assert!(((single.pdf(x).unwrap() - want) / want).abs() < 1e-12);
        }
        let twin = MixedGammaPosterior::new(2.0, MixingMeasure::new(vec![(1.0, 0.5), (1.0, 0.5)]).unwrap()).unwrap();
        assert!((twin.pdf(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(twin.pdf(0.0).is_err());
    }

    #[test]
    fn five_atom_pdf_normalises() {
        let mut rng = RngStream::new(3, 0);
        let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        let atoms = raw.iter().map(|w| (rng.random::<f64>() * 4.0 + 0.2, w / s)).collect();
        let post = MixedGammaPosterior::new(3.3, MixingMeasure::new(atoms).unwrap()).unwrap();
        let total = integrate_to_infinity(|x| if x > 0.0 { post.pdf(x).unwrap() } else { 0.0 }, 0.0, 1e-13, 1e-12).unwrap();
        assert!((total - 1.0).abs() < 1e-8);
        let m1 = integrate_to_infinity(|x| if x > 0.0 { x * post.pdf(x).unwrap() } else { 0.0 }, 0.0, 1e-13, 1e-12).unwrap();
        assert!((m1 - post.mean()).abs() < 1e-8);
    }

    #[test]
    fn moments() {
        let single = MixedGammaPosterior::new(3.0, MixingMeasure::dirac(2.0).unwrap()).unwrap();
        assert!((single.moment(1.0).unwrap() - 1.5).abs() < 1e-14);
        assert!((single.moment(0.0).unwrap() - 1.0).abs() < 1e-14);
        let post = MixedGammaPosterior::new(2.0, two_atoms()).unwrap();
        assert!((post.moment(2.0).unwrap() - 3.75).abs() < 1e-13);
        assert!(post.moment(-2.0).is_err());
    }

    #[test]
    fn quantiles_invert_cdf() {
        let post = MixedGammaPosterior::new(2.0, two_atoms()).unwrap();
        for p in [1e-8, 0.1, 0.5, 0.9, 1.0 - 1e-8] {
            let x = post.quantile(p);
            if p > 0.5 {
                assert!(((post.sf(x) - (1.0 - p)) / (1.0 - p)).abs() < 1e-9);
            } else {
                assert!(((post.cdf(x) - p) / p).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn posterior_file_roundtrip() {
        let p = ModelParams::new(1.0, 2.0, 0.8).unwrap();
        let post = MixedGammaPosterior::new(3.0, two_atoms()).unwrap().update(&p, 0.7).unwrap();
        let text = post.to_csv_string();
        assert!(text.starts_with("# {\"q\":3.0,"));
        let back = MixedGammaPosterior::from_csv_str(&text).unwrap();
        assert_eq!(back.q, 3.0);
        for (a, b) in back.mix.atoms().zip(post.mix.atoms()) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-15);
        }
        assert_eq!(back.mix.support_lo(), post.mix.support_lo());
        assert!(MixedGammaPosterior::from_csv_str("lambda,weight\n1,1\n").is_err());
        assert!(MixedGammaPosterior::from_csv_str("# {\"q\":2}\nlambda,weight\n1,1\n").is_err());
        assert!(MixedGammaPosterior::from_csv_str(
            "# {\"q\":2,\"support_lo\":1,\"support_hi\":1}\nlambda,weight\n1,0.5\n"
        )
        .is_err());
    }

    #[test]
    fn mixing_measure_json() {
        let m: MixingMeasure = serde_json::from_str(r#"{"atoms":[[1,0.5],[2,0.5]]}"#).unwrap();
        assert_eq!(m.support_lo(), 1.0);
        assert_eq!(m.support_hi(), 2.0);
        let m: MixingMeasure =
            serde_json::from_str(r#"{"atoms":[[1.5,1]],"support_lo":1,"support_hi":2}"#).unwrap();
        assert_eq!((m.support_lo(), m.support_hi()), (1.0, 2.0));
        assert!(serde_json::from_str::<MixingMeasure>(r#"{"atoms":[]}"#).is_err());
    }

    #[test]
    fn ratio_profile_identity() {
        let m = two_atoms();
        let grid = default_ratio_grid(&m, &m, 2.0);
        let prof = density_ratio_profile(&m, &m, 2.0, &grid).unwrap();
        assert!((prof.h_inf - 1.0).abs() < 1e-12);
        assert!(prof.lip < 1e-12);
    }

    #[test]
    fn ratio_profile_perturbed_weights() {
        let truth = MixingMeasure::new(vec![(1.0, 0.75), (2.0, 0.25)]).unwrap();
        let assumed = two_atoms();
        let grid = default_ratio_grid(&truth, &assumed, 2.0);
        let prof = density_ratio_profile(&truth, &assumed, 2.0, &grid).unwrap();
        assert!((prof.limit_at_infinity - 1.5).abs() < 1e-12);
        assert!(prof.h_inf > 0.0 && prof.h_inf < 1.5);
        assert!(prof.lip > 0.0 && prof.lip.is_finite());
        // h_0 is a weighted average of w̃_i/w_i = {1.5, 0.5}; its infimum is
        // approached at x → 0 where the λ^q weighting favours the fast atom
        let h0_zero = (0.75 + 0.25 * 4.0) / (0.5 + 0.5 * 4.0);
        assert!((prof.limit_at_zero - h0_zero).abs() < 1e-12);
        assert!((prof.h_inf - h0_zero).abs() < 1e-12);
        // refining the grid never raises H
        let coarse: Vec<f64> = grid.iter().step_by(10).copied().collect();
        let prof_coarse = density_ratio_profile(&truth, &assumed, 2.0, &coarse).unwrap();
        assert!(prof.h_inf <= prof_coarse.h_inf);
        assert!(prof.lip >= prof_coarse.lip);
    }

    #[test]
    fn ratio_profile_inner_atom() {
        // a single true atom inside the assumed hull: positive on any finite
        // grid, but the ratio decays like e^{-x/2} so the certified H is 0
        let truth = MixingMeasure::dirac(1.5).unwrap();
        let assumed = two_atoms();
        let grid: Vec<f64> = (1..=2000).map(|i| i as f64 * 0.01).collect();
        let prof = density_ratio_profile(&truth, &assumed, 2.0, &grid).unwrap();
        assert!(prof.grid_min > 0.0);
        assert_eq!(prof.limit_at_infinity, 0.0);
        assert_eq!(prof.h_inf, 0.0);
    }

    #[test]
    fn ratio_profile_rejects_bad_grid() {
        let m = two_atoms();
        assert!(density_ratio_profile(&m, &m, 2.0, &[]).is_err());
        assert!(density_ratio_profile(&m, &m, 2.0, &[1.0, 1.0]).is_err());
        assert!(density_ratio_profile(&m, &m, 2.0, &[0.0, 1.0]).is_err());
    }
}
