use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::FeynmanKac;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
    pub observations: Vec<f64>,
}

impl SvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < 1.0) || !(self.sigma > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SV needs |alpha| < 1 and positive sigma, beta (alpha={}, sigma={}, beta={})",
                self.alpha, self.sigma, self.beta
            )));
        }
        Ok(())
    }
}

/// `X_{p+1} = alpha X_p + sigma U`, `Y_p = beta exp(X_p / 2) V`.
///
/// The potential is the observation density `N(y_p; 0, beta^2 e^x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticVolatilityModel {
    params: SvParams,
    stationary_sd: f64,
}

pub fn make_sv(params: SvParams) -> Result<StochasticVolatilityModel> {
    params.validate()?;
    let stationary_sd = params.sigma / (1.0 - params.alpha * params.alpha).sqrt();
    Ok(StochasticVolatilityModel { params, stationary_sd })
}

impl StochasticVolatilityModel {
    pub fn params(&self) -> &SvParams {
        &self.params
    }

    /// `N(y; 0, beta^2 e^x)`.
    pub fn observation_density(&self, y: f64, x: f64) -> f64 {
        let b2 = self.params.beta * self.params.beta;
        let log = -0.5 * (2.0 * PI * b2).ln() - 0.5 * x - 0.5 * y * y * (-x).exp() / b2;
        log.exp()
    }
}

impl FeynmanKac for StochasticVolatilityModel {
    type State = f64;

    fn horizon(&self) -> usize {
        self.params.observations.len()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.stationary_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn mutate<R: Rng + ?Sized>(&self, _p: usize, x: &f64, rng: &mut R) -> f64 {
        self.params.alpha * x + self.params.sigma * rng.sample::<f64, _>(StandardNormal)
    }

    fn potential(&self, p: usize, x: &f64) -> f64 {
        match self.params.observations.get(p) {
            Some(&y) => self.observation_density(y, *x),
            None => 1.0,
        }
    }

    /// Over `x`, `N(y; 0, v)` peaks at `v = y^2` with value
    /// `1 / (|y| sqrt(2 pi e))`; unbounded when `y = 0`.
    fn sup_bound(&self, p: usize) -> Option<f64> {
        match self.params.observations.get(p) {
            Some(&y) if y != 0.0 => Some(1.0 / (y.abs() * (2.0 * PI * std::f64::consts::E).sqrt())),
            Some(_) => None,
            None => Some(1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(obs: Vec<f64>) -> StochasticVolatilityModel {
        make_sv(SvParams { alpha: 0.98, sigma: 0.5, beta: 1.0, observations: obs }).unwrap()
    }

    #[test]
    fn zero_observation_density_decreases_in_x() {
        let m = model(vec![0.0]);
        let mut prev = f64::INFINITY;
        for i in -20..20 {
            let x = i as f64 * 0.5;
            let g = m.potential(0, &x);
            assert!((g - (2.0 * PI * x.exp()).powf(-0.5)).abs() < 1e-12 * g.max(1.0));
            assert!(g < prev);
            prev = g;
        }
        assert_eq!(m.sup_bound(0), None);
    }

    #[test]
    fn density_integrates_to_one_over_observations() {
        let m = model(vec![]);
        for &x in &[-2.0, 0.0, 1.5] {
            let sd = (x / 2.0f64).exp();
            let h = 1e-3 * sd;
            let k = (40.0 * sd / h) as i64;
            let total: f64 = (-k..=k).map(|i| m.observation_density(i as f64 * h, x)).sum::<f64>() * h;
            assert!((total - 1.0).abs() < 1e-8, "x={x}: {total}");
        }
    }

    #[test]
    fn sup_bound_dominates() {
        let m = model(vec![0.8]);
        let b = m.sup_bound(0).unwrap();
        let best = (-400..400).map(|i| m.potential(0, &(i as f64 * 0.01))).fold(0.0, f64::max);
        assert!(best <= b && best > 0.999 * b);
    }
}
