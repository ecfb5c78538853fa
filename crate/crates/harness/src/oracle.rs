//! Reference values of `eta_n(f)` and `gamma_n(1)` for each model family.

use islandpf::fk::{exact_flow, kalman_predictive};
use islandpf::particle::step_bootstrap;
use islandpf::rng::{domain, stream};
use islandpf::{FeynmanKac, Population, TestFunction};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{BuiltModel, SvReference};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionOracle {
    pub function: String,
    pub value: f64,
    /// Monte Carlo standard error when the value comes from a reference run.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub functions: Vec<FunctionOracle>,
    pub log_gamma: Option<f64>,
}

impl Oracle {
    pub fn value(&self, function: &str) -> Option<f64> {
        self.function(function).map(|f| f.value)
    }

    pub fn function(&self, function: &str) -> Option<&FunctionOracle> {
        self.functions.iter().find(|f| f.function == function)
    }
}

/// `E f(X)` for `X ~ N(m, v)`, when available in closed form.
fn gaussian_expectation(f: &TestFunction, m: f64, v: f64) -> Option<f64> {
    match f {
        TestFunction::Identity => Some(m),
        TestFunction::Square => Some(m * m + v),
        TestFunction::Indicator { a, b } => {
            let n = Normal::new(m, v.sqrt()).ok()?;
            Some(n.cdf(*b) - n.cdf(*a))
        }
        TestFunction::Table(_) => None,
    }
}

/// Exact oracles for finite and linear Gaussian models, a reference run for
/// the stochastic volatility model when configured, nothing otherwise.
pub fn oracle(model: &BuiltModel, functions: &[TestFunction], sv_reference: Option<SvReference>) -> Result<Oracle> {
    match model {
        BuiltModel::Finite(m) => {
            let flow = exact_flow(m)?;
            let last = flow.last().expect("flow has the initial step");
            let functions = functions
                .iter()
                .filter_map(|f| {
                    let v = f.to_vector(m.dim());
                    (!v.iter().any(|x| x.is_nan())).then(|| FunctionOracle {
                        function: f.name(),
                        value: last.eta.expect(&v),
                        std_error: None,
                    })
                })
                .collect();
            Ok(Oracle { functions, log_gamma: Some(last.log_gamma) })
        }
        BuiltModel::Lgm(m) => {
            let p = m.params();
            let pred = kalman_predictive(p.phi, p.sigma_u, p.sigma_v, &p.observations)?;
            let last = pred.last().expect("predictive laws include the prior");
            let functions = functions
                .iter()
                .filter_map(|f| {
                    gaussian_expectation(f, last.mean, last.variance).map(|value| FunctionOracle {
                        function: f.name(),
                        value,
                        std_error: None,
                    })
                })
                .collect();
            // gamma_n(1) is the likelihood of the observations
            let r = p.sigma_v * p.sigma_v;
            let log_gamma = p
                .observations
                .iter()
                .zip(&pred)
                .map(|(&y, g)| {
                    let s2 = g.variance + r;
                    -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * (y - g.mean).powi(2) / s2
                })
                .sum();
            Ok(Oracle { functions, log_gamma: Some(log_gamma) })
        }
        BuiltModel::Sv(m) => match sv_reference {
            Some(r) => sv_reference_run(m, functions, r),
            None => Ok(Oracle { functions: vec![], log_gamma: None }),
        },
    }
}

/// A single large bootstrap filter. The reported error treats the final
/// particles as independent, which understates the true Monte Carlo error.
fn sv_reference_run<M>(model: &M, functions: &[TestFunction], r: SvReference) -> Result<Oracle>
where
    M: FeynmanKac<State = f64>,
{
    if r.particles < 2 {
        return Err(HarnessError::InvalidConfig("reference run needs at least 2 particles".into()));
    }
    let mut rng = stream(r.seed, &[domain::REFERENCE]);
    let mut pop = Population::initial(model, r.particles, &mut rng)?;
    let mut log_gamma = 0.0;
    for _ in 0..model.horizon() {
        log_gamma = islandpf::particle::gamma_hat_update(log_gamma, &pop, model)?;
        step_bootstrap(&mut pop, model, &mut rng)?;
    }
    let functions = functions
        .iter()
        .map(|f| {
            let m = pop.weighted_mean(|x| f.eval(x))?;
            let m2 = pop.weighted_mean(|x| f.eval(x).powi(2))?;
            let var = (m2 - m * m).max(0.0);
            Ok(FunctionOracle { function: f.name(), value: m, std_error: Some((var / r.particles as f64).sqrt()) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Oracle { functions, log_gamma: Some(log_gamma) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use islandpf::models::{make_lgm, make_sv, standard_instance, LgmParams, SvParams};

    #[test]
    fn lgm_oracle_without_observations_is_the_stationary_law() {
        let m = make_lgm(LgmParams { phi: 0.6, sigma_u: 0.8, sigma_v: 1.0, observations: vec![] }).unwrap();
        let fs = [TestFunction::Identity, TestFunction::Square, TestFunction::Indicator { a: 0.0, b: f64::INFINITY }];
        let o = oracle(&BuiltModel::Lgm(m), &fs, None).unwrap();
        assert_eq!(o.value("identity"), Some(0.0));
        assert!((o.value("square").unwrap() - 0.64 / 0.64).abs() < 1e-12);
        assert!((o.functions[2].value - 0.5).abs() < 1e-12);
        assert_eq!(o.log_gamma, Some(0.0));
    }

    #[test]
    fn lgm_single_observation_likelihood() {
        let m = make_lgm(LgmParams { phi: 0.0, sigma_u: 1.0, sigma_v: 1.0, observations: vec![0.0] }).unwrap();
        let o = oracle(&BuiltModel::Lgm(m), &[TestFunction::Identity], None).unwrap();
        // Y_0 ~ N(0, 2)
        let want = -0.5 * (4.0 * std::f64::consts::PI).ln();
        assert!((o.log_gamma.unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn finite_oracle_uses_the_exact_flow() {
        let m = standard_instance();
        let flow = exact_flow(&m).unwrap();
        let o = oracle(&BuiltModel::Finite(m), &[TestFunction::Identity], None).unwrap();
        let p = flow[10].eta.probs();
        assert!((o.value("identity").unwrap() - (p[1] + 2.0 * p[2])).abs() < 1e-15);
        assert_eq!(o.log_gamma, Some(flow[10].log_gamma));
    }

    #[test]
    fn sv_reference_is_seeded() {
        let m = make_sv(SvParams { alpha: 0.9, sigma: 0.5, beta: 1.0, observations: vec![0.3, -1.0, 0.2] }).unwrap();
        let r = SvReference { particles: 5000, seed: 4 };
        let a = oracle(&BuiltModel::Sv(m.clone()), &[TestFunction::Identity], Some(r)).unwrap();
        let b = oracle(&BuiltModel::Sv(m.clone()), &[TestFunction::Identity], Some(r)).unwrap();
        assert_eq!(a, b);
        assert!(a.functions[0].std_error.unwrap() > 0.0);
        let none = oracle(&BuiltModel::Sv(m), &[TestFunction::Identity], None).unwrap();
        assert!(none.functions.is_empty());
    }
}
