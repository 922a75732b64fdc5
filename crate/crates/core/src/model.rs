//! Signal/observation model.
//!
//! ```text
//! X_n = b X_{n-1} W_n,   W_n ~ Beta(alpha, beta)
//! Y_n = G_n / X_n,       G_n ~ Γ(1, beta)         (so Y_n | X_n ~ Γ(X_n, beta))
//! ```
//!
//! With `q = alpha + beta`, a `Γ(λ, q)` (or mixed-Gamma) law for `X_0` keeps
//! every filter posterior inside the mixed-Gamma family.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixed::MixingMeasure;
use crate::sampling::{beta_draw, standard_gamma};
use crate::special::{lbeta, lgamma};

/// `(alpha, beta, b)` plus the derived `q = alpha + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    b: f64,
    q: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRepr {
    alpha: f64,
    beta: f64,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = ModelParams::new(r.alpha, r.beta, r.b)?;
        if let Some(q) = r.q {
            if q != p.q {
                return Err(Error::config(
                    "params.q",
                    format!("q must equal alpha + beta = {}, got {q}", p.q),
                ));
            }
        }
        Ok(p)
    }
}

impl From<ModelParams> for ParamsRepr {
    fn from(p: ModelParams) -> Self {
        ParamsRepr {
            alpha: p.alpha,
            beta: p.beta,
            b: p.b,
            q: Some(p.q),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            format!("params.{name}"),
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, b: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        positive("b", b)?;
        Ok(Self {
            alpha,
            beta,
            b,
            q: alpha + beta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Same noise parameters with a different drift.
    pub fn with_drift(&self, b: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, b)
    }
}

/// A simulated path: `x0`, hidden states `X_1..X_n` and observations `Y_1..Y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// CSV with header `step,x,y`; row 0 carries `x0` and an empty `y`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("step,x,y\n");
        let _ = writeln!(out, "0,{},", self.x0);
        for (k, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            let _ = writeln!(out, "{},{},{}", k + 1, x, y);
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
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["step", "x", "y"] {
            return Err(Error::parse(1, "expected header `step,x,y`"));
        }
        let mut x0 = None;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
            if record.len() != 3 {
                return Err(Error::parse(line, "expected 3 fields"));
            }
            let step: usize = record[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad step `{}`", &record[0])))?;
            if step != i {
                return Err(Error::parse(line, format!("expected step {i}, got {step}")));
            }
            let xv = parse_positive(&record[1], line, "x")?;
            if step == 0 {
                if !record[2].is_empty() {
                    return Err(Error::parse(line, "step 0 must have an empty y"));
                }
                x0 = Some(xv);
            } else {
                x.push(xv);
                y.push(parse_positive(&record[2], line, "y")?);
            }
        }
        let x0 = x0.ok_or_else(|| Error::parse(2, "missing step 0 row"))?;
        Ok(Trajectory { x0, x, y })
    }
}

pub(crate) fn parse_positive(field: &str, line: usize, name: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {name} `{field}`")))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("{name} must be positive and finite, got {v}")))
    }
}

/// Draw `X_0` from the mixed-Gamma law: `λ ~ mix`, then `X_0 ~ Γ(λ, q)`.
pub fn sample_initial<R: Rng + ?Sized>(rng: &mut R, mix: &MixingMeasure, q: f64) -> Result<f64> {
    if !(q > 0.0) || q.is_infinite() {
        return Err(Error::domain(format!("sample_initial requires q > 0, got {q}")));
    }
    let lambda = mix.sample_rate(rng);
    Ok(standard_gamma(rng, q) / lambda)
}

/// Simulate `n` steps of the signal/observation pair from a known `x0`.
pub fn simulate<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ModelParams,
    x0: f64,
    n: usize,
) -> Result<Trajectory> {
    if !(x0 > 0.0) || x0.is_infinite() {
        return Err(Error::domain(format!("simulate requires x0 > 0, got {x0}")));
    }
    if n == 0 {
        return Err(Error::domain("simulate requires n >= 1"));
    }
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut state = x0;
    for _ in 0..n {
        state *= params.b * beta_draw(rng, params.alpha, params.beta);
        if !(state > 0.0) {
            return Err(Error::numerical("hidden state underflowed to zero"));
        }
        x.push(state);
        y.push(standard_gamma(rng, params.beta) / state);
    }
    Ok(Trajectory { x0, x, y })
}

/// Signal transition density `p(x, y_next)`, supported on `(0, b x)`.
pub fn transition_density(params: &ModelParams, x: f64, y_next: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("transition_density requires x > 0, got {x}")));
    }
    let bx = params.b * x;
    if !(y_next > 0.0 && y_next < bx) {
        return Ok(0.0);
    }
    let ln = (1.0 - params.q) * bx.ln() - lbeta(params.alpha, params.beta)
        + (params.alpha - 1.0) * y_next.ln()
        + (params.beta - 1.0) * (bx - y_next).ln();
    Ok(ln.exp())
}

/// Observation density `g(x, y) = x^β y^(β-1) e^(-xy) / Γ(β)`.
pub fn observation_density(beta: f64, x: f64, y: f64) -> Result<f64> {
    if !(beta > 0.0 && x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!(
            "observation_density requires positive inputs, got (beta={beta}, x={x}, y={y})"
        )));
    }
    Ok((beta * x.ln() + (beta - 1.0) * y.ln() - x * y - lgamma(beta)).exp())
}
