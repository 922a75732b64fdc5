//! Reproducible random streams and the exact samplers the model needs.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A counter-based random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids are independent without coordination and the
/// same pair always replays the same draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Unit-rate Gamma draw, Marsaglia–Tsang squeeze. Shapes below one are
/// boosted through `Γ(shape+1) · U^(1/shape)`.
pub(crate) fn standard_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return standard_gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draw from `Γ(rate, shape)`: density `rate^shape x^(shape-1) e^(-rate x) / Γ(shape)`.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, rate: f64, shape: f64) -> Result<f64> {
    if !(rate > 0.0 && shape > 0.0) || rate.is_infinite() || shape.is_infinite() {
        return Err(Error::domain(format!(
            "sample_gamma requires positive rate and shape, got ({rate}, {shape})"
        )));
    }
    Ok(standard_gamma(rng, shape) / rate)
}

pub(crate) fn beta_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    loop {
        let ga = standard_gamma(rng, a);
        let gb = standard_gamma(rng, b);
        let w = ga / (ga + gb);
        if w > 0.0 && w < 1.0 {
            return w;
        }
    }
}

/// Draw from `Beta(a, b)` as `G_a / (G_a + G_b)`. The result lies strictly
/// inside `(0, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || a.is_infinite() || b.is_infinite() {
        return Err(Error::domain(format!(
            "sample_beta requires positive parameters, got ({a}, {b})"
        )));
    }
    Ok(beta_draw(rng, a, b))
}
