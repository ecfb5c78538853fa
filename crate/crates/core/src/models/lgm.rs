use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::FeynmanKac;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgmParams {
    pub phi: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub observations: Vec<f64>,
}

impl LgmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) || !(self.sigma_u > 0.0) || !(self.sigma_v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LGM needs |phi| < 1 and positive noise scales (phi={}, sigma_u={}, sigma_v={})",
                self.phi, self.sigma_u, self.sigma_v
            )));
        }
        Ok(())
    }
}

/// `X_{p+1} = phi X_p + sigma_u U`, `Y_p = X_p + sigma_v V`, with
/// `G_p(x)` the Gaussian density of `y_p` around `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    params: LgmParams,
    stationary_sd: f64,
    log_norm: f64,
}

pub fn make_lgm(params: LgmParams) -> Result<LinearGaussianModel> {
    params.validate()?;
    let stationary_sd = params.sigma_u / (1.0 - params.phi * params.phi).sqrt();
    let log_norm = -0.5 * (2.0 * PI).ln() - params.sigma_v.ln();
    Ok(LinearGaussianModel { params, stationary_sd, log_norm })
}

impl LinearGaussianModel {
    pub fn params(&self) -> &LgmParams {
        &self.params
    }
}

impl FeynmanKac for LinearGaussianModel {
    type State = f64;

    fn horizon(&self) -> usize {
        self.params.observations.len()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.stationary_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn mutate<R: Rng + ?Sized>(&self, _p: usize, x: &f64, rng: &mut R) -> f64 {
        self.params.phi * x + self.params.sigma_u * rng.sample::<f64, _>(StandardNormal)
    }

    fn potential(&self, p: usize, x: &f64) -> f64 {
        match self.params.observations.get(p) {
            Some(&y) => {
                let z = (y - x) / self.params.sigma_v;
                (self.log_norm - 0.5 * z * z).exp()
            }
            None => 1.0,
        }
    }

    fn sup_bound(&self, p: usize) -> Option<f64> {
        if p < self.horizon() {
            Some(self.log_norm.exp())
        } else {
            Some(1.0)
        }
    }
}
