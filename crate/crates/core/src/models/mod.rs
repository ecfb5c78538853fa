//! Concrete models: linear Gaussian, stochastic volatility, finite HMMs.

mod finite;
mod lgm;
mod sv;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use finite::{finite_hmm_from_tables, random_finite_hmm, standard_instance, STANDARD_SEED};
pub use lgm::{make_lgm, LgmParams, LinearGaussianModel};
pub use sv::{make_sv, StochasticVolatilityModel, SvParams};

/// Dynamics of a continuous-state model, without observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousKind {
    Lgm { phi: f64, sigma_u: f64, sigma_v: f64 },
    Sv { alpha: f64, sigma: f64, beta: f64 },
}

/// A simulated latent path `x_0..x_n` and observations `y_0..y_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

impl ContinuousKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ContinuousKind::Lgm { phi, sigma_u, sigma_v } => {
                LgmParams { phi, sigma_u, sigma_v, observations: vec![] }.validate()
            }
            ContinuousKind::Sv { alpha, sigma, beta } => {
                SvParams { alpha, sigma, beta, observations: vec![] }.validate()
            }
        }
    }

    /// Forward simulation from the stationary initial law.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SimulatedData> {
        self.validate()?;
        let (a, s) = match *self {
            ContinuousKind::Lgm { phi, sigma_u, .. } => (phi, sigma_u),
            ContinuousKind::Sv { alpha, sigma, .. } => (alpha, sigma),
        };
        let mut x = s / (1.0 - a * a).sqrt() * rng.sample::<f64, _>(StandardNormal);
        let mut states = Vec::with_capacity(n + 1);
        let mut observations = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(x);
            let v: f64 = rng.sample(StandardNormal);
            observations.push(match *self {
                ContinuousKind::Lgm { sigma_v, .. } => x + sigma_v * v,
                ContinuousKind::Sv { beta, .. } => beta * (x / 2.0).exp() * v,
            });
            x = a * x + s * rng.sample::<f64, _>(StandardNormal);
        }
        states.push(x);
        Ok(SimulatedData { states, observations })
    }
}
