//! Optimal filtering for the multiplicative-noise hidden Markov model
//!
//! ```text
//! X_n = b X_{n-1} W_n,  W_n ~ Beta(alpha, beta)
//! Y_n = G_n / X_n,      G_n ~ Γ(1, beta)
//! ```
//!
//! The crate provides
//!
//! * [`conjugate`]: the closed-form `Γ(λ_n, q)` filter for Gamma initial laws;
//! * [`mixed`]: the exact mixed-Gamma filter for finite atomic mixing measures;
//! * [`reference`]: a brute-force grid implementation of the Bayes recursion,
//!   used as an oracle for the two closed forms;
//! * [`stability`]: total-variation distances between differently initialised
//!   filters, the explicit forgetting bounds and their constants, tail checks
//!   and geometric rate fits;
//! * [`experiments`]: reproducible Monte-Carlo runs driven by a JSON config.
//!
//! All Gamma laws are written **rate first**, `Γ(rate, shape)` with mean
//! `shape / rate`; see [`special`].

pub mod conjugate;
pub mod error;
pub mod experiments;
pub mod mixed;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod sampling;
pub mod special;
pub mod stability;
pub mod stats;

pub use conjugate::GammaPosterior;
pub use error::{Error, Result};
pub use mixed::{MixedGammaPosterior, MixingMeasure};
pub use model::{ModelParams, Trajectory};
pub use reference::GridDensity;
pub use sampling::RngStream;
pub use stability::{BoundConstants, StabilityReport};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
