//! Brute-force grid filter.
//!
//! Densities are piecewise linear on a node grid. One Bayes step computes
//!
//! ```text
//! π'(x) ∝ g(x, y) ∫ p(s, x) π(s) ds
//!       ∝ x^(q-1) e^(-xy) ∫_{s > x/b} (bs - x)^(beta-1) (bs)^(1-q) π(s) ds
//! ```
//!
//! by Gauss–Legendre quadrature on the prior cells. The output support is
//! found by mass thresholding on `(0, b·s_max]` and zooming in.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixed::MixedGammaPosterior;
use crate::model::ModelParams;
use crate::quadrature::gauss_legendre;

/// Maximum normalisation error accepted by [`GridDensity`].
pub const MASS_TOL: f64 = 1e-6;

const MIN_NODES: usize = 64;
const CELL_POINTS: usize = 4;
const ZOOM_TAIL: f64 = 1e-12;
const ZOOM_PASSES: usize = 8;

/// Piecewise-linear density on a strictly increasing positive grid, zero
/// outside `[nodes[0], nodes[last]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    nodes: Vec<f64>,
    values: Vec<f64>,
    mass_tol: f64,
}

fn trapezoid(nodes: &[f64], values: &[f64]) -> f64 {
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

fn check_nodes(nodes: &[f64], values: &[f64]) -> std::result::Result<(), String> {
    if nodes.len() != values.len() {
        return Err(format!("{} nodes but {} values", nodes.len(), values.len()));
    }
    if nodes.len() < 2 {
        return Err("a grid needs at least two nodes".into());
    }
    if !(nodes[0] > 0.0) || nodes.iter().any(|x| !x.is_finite()) {
        return Err("nodes must be positive and finite".into());
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err("nodes must be strictly increasing".into());
    }
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err("values must be nonnegative and finite".into());
    }
    Ok(())
}

impl GridDensity {
    /// Builds a grid density, renormalising `values` by the trapezoid rule.
    pub fn new(nodes: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        check_nodes(&nodes, &values).map_err(Error::domain)?;
        let mass = trapezoid(&nodes, &values);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::numerical(format!("grid mass is {mass}, cannot normalise")));
        }
        for v in &mut values {
            *v /= mass;
        }
        let mass_tol = (trapezoid(&nodes, &values) - 1.0).abs();
        Ok(Self { nodes, values, mass_tol })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass_tol(&self) -> f64 {
        self.mass_tol
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.nodes, &self.values)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Linear interpolation, zero outside the support.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let k = self.nodes.partition_point(|&s| s <= x).clamp(1, self.nodes.len() - 1) - 1;
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// Mean of the interpolated density, exact for the linear pieces.
    pub fn mean(&self) -> f64 {
        let first: f64 = self
            .nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| (x[1] - x[0]) * (2.0 * x[0] * f[0] + x[0] * f[1] + x[1] * f[0] + 2.0 * x[1] * f[1]) / 6.0)
            .sum();
        first / self.mass()
    }

    fn l1_inside(&self, pdf: impl Fn(f64) -> f64) -> f64 {
        let (gl_x, gl_w) = gauss_legendre(3);
        let mut total = 0.0;
        for (x, f) in self.nodes.windows(2).zip(self.values.windows(2)) {
            let half = 0.5 * (x[1] - x[0]);
            let mid = 0.5 * (x[0] + x[1]);
            for (t, w) in gl_x.iter().zip(&gl_w) {
                let s = mid + half * t;
                let interp = f[0] + (f[1] - f[0]) * (s - x[0]) / (x[1] - x[0]);
                total += half * w * (interp - pdf(s)).abs();
            }
        }
        total
    }

    /// `∫|grid - f|` for a density `f` with CDF `cdf`: per-cell quadrature on
    /// the support plus the mass `f` puts outside it.
    pub fn l1_to_density(&self, pdf: impl Fn(f64) -> f64, cdf: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = self.support();
        self.l1_inside(pdf) + cdf(lo) + (1.0 - cdf(hi)).max(0.0)
    }

    /// `∫|grid - π|` against a mixed-Gamma posterior.
    pub fn l1_to_mixture(&self, post: &MixedGammaPosterior) -> f64 {
        let (lo, hi) = self.support();
        self.l1_inside(|x| post.ln_pdf(x).exp()) + post.cdf(lo) + post.sf(hi)
    }

    /// CSV with header `node,value`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("node,value\n");
        for (x, f) in self.nodes.iter().zip(&self.values) {
            let _ = writeln!(out, "{x},{f}");
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

    /// Parses the [`to_csv_string`](Self::to_csv_string) format. Values are
    /// kept as written; their trapezoid mass must be within [`MASS_TOL`] of 1.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["node", "value"] {
            return Err(Error::parse(1, "expected header `node,value`"));
        }
        let (mut nodes, mut values) = (Vec::new(), Vec::new());
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::parse(line, "expected 2 fields"));
            }
            let x: f64 = record[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad node `{}`", &record[0])))?;
            let f: f64 = record[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad value `{}`", &record[1])))?;
            if let Some(&prev) = nodes.last() {
                if !(x > prev) {
                    return Err(Error::parse(line, "nodes must be strictly increasing"));
                }
            }
            nodes.push(x);
            values.push(f);
        }
        check_nodes(&nodes, &values).map_err(|e| Error::parse(0, e))?;
        let mass = trapezoid(&nodes, &values);
        let mass_tol = (mass - 1.0).abs();
        if !(mass_tol <= MASS_TOL) {
            return Err(Error::parse(0, format!("grid mass {mass} is not 1 within {MASS_TOL}")));
        }
        Ok(Self { nodes, values, mass_tol })
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    nodes[n - 1] = hi;
    nodes
}

/// Tabulates a mixed-Gamma posterior on `n_nodes` uniform nodes spanning its
/// `[1e-8, 1 - 1e-8]` quantile range.
pub fn grid_from_mixture(post: &MixedGammaPosterior, n_nodes: usize) -> Result<GridDensity> {
    if n_nodes < MIN_NODES {
        return Err(Error::domain(format!("need at least {MIN_NODES} nodes, got {n_nodes}")));
    }
    let lo = post.quantile(1e-8);
    let hi = post.quantile(1.0 - 1e-8);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::numerical(format!("degenerate quantile range [{lo}, {hi}]")));
    }
    let nodes = uniform(lo, hi, n_nodes);
    let values = nodes.iter().map(|&x| post.ln_pdf(x).exp()).collect();
    GridDensity::new(nodes, values)
}

/// Prior quantities for the inner integral over `s`.
struct Propagator<'a> {
    prior: &'a GridDensity,
    b: f64,
    beta: f64,
    q: f64,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
    /// `b s` at every quadrature point, ascending.
    t: Vec<f64>,
    /// `w (h/2) π(s) (b s)^(1-q)` at every quadrature point.
    c: Vec<f64>,
    /// Suffix sums `Σ_{p' >= p} c t^m` when `beta` is a small integer.
    poly: Option<Vec<Vec<f64>>>,
}

impl<'a> Propagator<'a> {
    fn new(prior: &'a GridDensity, params: &ModelParams) -> Self {
        let (gl_x, gl_w) = gauss_legendre(CELL_POINTS);
        let (b, beta, q) = (params.b(), params.beta(), params.q());
        let cells = prior.len() - 1;
        let mut t = Vec::with_capacity(cells * CELL_POINTS);
        let mut c = Vec::with_capacity(cells * CELL_POINTS);
        for (s, f) in prior.nodes.windows(2).zip(prior.values.windows(2)) {
            let half = 0.5 * (s[1] - s[0]);
            let mid = 0.5 * (s[0] + s[1]);
            for (xi, w) in gl_x.iter().zip(&gl_w) {
                let sp = mid + half * xi;
                let pi = f[0] + (f[1] - f[0]) * (sp - s[0]) / (s[1] - s[0]);
                t.push(b * sp);
                c.push(w * half * pi * (b * sp).powf(1.0 - q));
            }
        }
        let degree = beta - 1.0;
        let poly = (degree >= 0.0 && degree <= 8.0 && degree.fract() == 0.0).then(|| {
            let d = degree as usize;
            let mut sums = vec![vec![0.0; t.len() + 1]; d + 1];
            for (m, row) in sums.iter_mut().enumerate() {
                for p in (0..t.len()).rev() {
                    row[p] = row[p + 1] + c[p] * t[p].powi(m as i32);
                }
            }
            sums
        });
        Self { prior, b, beta, q, gl_x, gl_w, t, c, poly }
    }

    fn prior_at(&self, k: usize, s: f64) -> f64 {
        let (n, f) = (&self.prior.nodes, &self.prior.values);
        f[k] + (f[k + 1] - f[k]) * (s - n[k]) / (n[k + 1] - n[k])
    }

    /// Direct quadrature over `[lo, s_{k+1}]` inside cell `k`.
    fn cell_direct(&self, x: f64, k: usize, lo: f64) -> f64 {
        let hi = self.prior.nodes[k + 1];
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.gl_x
            .iter()
            .zip(&self.gl_w)
            .map(|(xi, w)| {
                let s = mid + half * xi;
                let bs = self.b * s;
                w * half * (bs - x).max(0.0).powf(self.beta - 1.0) * bs.powf(1.0 - self.q) * self.prior_at(k, s)
            })
            .sum()
    }

    /// Same integral with `v = (bs - x)^beta`, which removes the endpoint
    /// singularity for `beta < 1`.
    fn cell_substituted(&self, x: f64, k: usize, lo: f64) -> f64 {
        let hi = self.prior.nodes[k + 1];
        let v_lo = (self.b * lo - x).max(0.0).powf(self.beta);
        let v_hi = (self.b * hi - x).max(0.0).powf(self.beta);
        let half = 0.5 * (v_hi - v_lo);
        let mid = 0.5 * (v_hi + v_lo);
        let sum: f64 = self
            .gl_x
            .iter()
            .zip(&self.gl_w)
            .map(|(xi, w)| {
                let v = mid + half * xi;
                let bs = x + v.powf(1.0 / self.beta);
                w * half * bs.powf(1.0 - self.q) * self.prior_at(k, bs / self.b)
            })
            .sum();
        sum / (self.b * self.beta)
    }

    /// `∫_{s > x/b} (bs - x)^(beta-1) (bs)^(1-q) π(s) ds`.
    fn inner(&self, x: f64) -> f64 {
        let nodes = &self.prior.nodes;
        let cut = x / self.b;
        let cells = nodes.len() - 1;
        if cut >= nodes[cells] {
            return 0.0;
        }
        // first cell whose left node is at or above the cut
        let first_full = nodes.partition_point(|&s| s < cut);
        let mut total = 0.0;
        let mut start = first_full;
        if first_full > 0 {
            let k = first_full - 1;
            total += if self.beta < 1.0 {
                self.cell_substituted(x, k, cut)
            } else {
                self.cell_direct(x, k, cut)
            };
        }
        if self.beta < 1.0 && start < cells {
            total += self.cell_substituted(x, start, nodes[start]);
            start += 1;
        }
        if start >= cells {
            return total;
        }
        let p0 = start * CELL_POINTS;
        match &self.poly {
            Some(sums) => {
                let d = sums.len() - 1;
                let mut binom = 1.0;
                let mut acc = 0.0;
                for (m, row) in sums.iter().enumerate() {
                    acc += binom * (-x).powi((d - m) as i32) * row[p0];
                    binom = binom * (d - m) as f64 / (m + 1) as f64;
                }
                total + acc.max(0.0)
            }
            None => {
                total
                    + self.t[p0..]
                        .iter()
                        .zip(&self.c[p0..])
                        .map(|(t, c)| c * (t - x).powf(self.beta - 1.0))
                        .sum::<f64>()
            }
        }
    }
}

fn unnormalised_posterior(prop: &Propagator, q: f64, y: f64, nodes: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = nodes
        .par_iter()
        .map(|&x| {
            let inner = prop.inner(x);
            if inner > 0.0 {
                (q - 1.0) * x.ln() - x * y + inner.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return vec![0.0; nodes.len()];
    }
    logs.iter().map(|l| (l - peak).exp()).collect()
}

/// Indices bracketing all but `ZOOM_TAIL` of the trapezoid mass on each side.
fn mass_window(nodes: &[f64], values: &[f64]) -> Option<(usize, usize)> {
    let mut cum = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        cum[i] = cum[i - 1] + 0.5 * (nodes[i] - nodes[i - 1]) * (values[i] + values[i - 1]);
    }
    let total = cum[nodes.len() - 1];
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let lo = cum.partition_point(|&c| c <= ZOOM_TAIL * total).saturating_sub(1);
    let hi = cum.partition_point(|&c| c < (1.0 - ZOOM_TAIL) * total).min(nodes.len() - 1);
    Some((lo, hi))
}

/// One step of the Bayes recursion for observation `y`, on a grid with as
/// many nodes as the prior.
pub fn bayes_step(prior: &GridDensity, params: &ModelParams, y: f64) -> Result<GridDensity> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("observation must be positive and finite, got {y}")));
    }
    let n = prior.len().max(MIN_NODES);
    let prop = Propagator::new(prior, params);
    let q = params.q();
    let top = params.b() * prior.support().1;
    let mut hi = top.min((q + 50.0 + 12.0 * q.sqrt()) / y);
    let start = |hi: f64| if q >= 1.0 { hi * 1e-12 } else { hi / (2 * n) as f64 };
    let mut lo = start(hi);
    let mut nodes = uniform(lo, hi, n);
    let mut values = unnormalised_posterior(&prop, q, y, &nodes);
    // Widen until the mass clears the right edge or reaches the prior support.
    while hi < top {
        match mass_window(&nodes, &values) {
            Some((_, i_hi)) if i_hi < n - 1 => break,
            _ => {}
        }
        hi = top.min(4.0 * hi);
        lo = start(hi);
        nodes = uniform(lo, hi, n);
        values = unnormalised_posterior(&prop, q, y, &nodes);
    }
    for _ in 0..ZOOM_PASSES {
        let (i_lo, i_hi) = mass_window(&nodes, &values)
            .ok_or_else(|| Error::numerical("posterior mass vanished on the grid"))?;
        let new_lo = nodes[i_lo.saturating_sub(2)];
        let new_hi = nodes[(i_hi + 2).min(n - 1)];
        if new_hi - new_lo >= 0.5 * (hi - lo) {
            break;
        }
        lo = new_lo;
        hi = new_hi;
        nodes = uniform(lo, hi, n);
        values = unnormalised_posterior(&prop, q, y, &nodes);
    }
    let (i_lo, i_hi) =
        mass_window(&nodes, &values).ok_or_else(|| Error::numerical("posterior mass vanished on the grid"))?;
    if i_hi - i_lo < 8 {
        return Err(Error::numerical(format!(
            "posterior mass concentrated in {} cells near x = {}; grid cannot resolve it",
            i_hi - i_lo,
            nodes[i_lo]
        )));
    }
    GridDensity::new(nodes, values)
}

/// Chains [`bayes_step`] over `ys`; the error names the failing step.
pub fn bayes_filter(prior: &GridDensity, params: &ModelParams, ys: &[f64]) -> Result<Vec<GridDensity>> {
    let mut out: Vec<GridDensity> = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let current = out.last().unwrap_or(prior);
        let next = bayes_step(current, params, y).map_err(|e| match e {
            Error::Numerical(msg) => Error::numerical(format!("step {}: {msg}", i + 1)),
            other => other,
        })?;
        out.push(next);
    }
    Ok(out)
}

/// `½∫|a - b|` of the two piecewise-linear densities, exact on the merged
/// node set.
pub fn grid_tv(a: &GridDensity, b: &GridDensity) -> f64 {
    let mut merged: Vec<f64> = a.nodes.iter().chain(&b.nodes).copied().collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();
    let inside = |g: &GridDensity, l: f64, r: f64| {
        let (lo, hi) = g.support();
        let mid = 0.5 * (l + r);
        if mid >= lo && mid <= hi {
            (g.value_at(l), g.value_at(r))
        } else {
            (0.0, 0.0)
        }
    };
    let mut total = 0.0;
    for w in merged.windows(2) {
        let (l, r) = (w[0], w[1]);
        let (al, ar) = inside(a, l, r);
        let (bl, br) = inside(b, l, r);
        let (d0, d1) = (al - bl, ar - br);
        let h = r - l;
        total += if d0 * d1 >= 0.0 {
            0.5 * h * (d0.abs() + d1.abs())
        } else {
            0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    (0.5 * total).clamp(0.0, 1.0)
}
