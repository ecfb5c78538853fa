use rand::Rng;

use crate::error::{Error, Result};
use crate::fk::{exact_flow, FiniteModel};
use crate::rng::{domain, stream};

/// Seed of the standard `d = 3`, `n = 10` test instance.
pub const STANDARD_SEED: u64 = 20_130_501;

fn random_probability_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|x| x / s).collect();
    // make the sum exactly representable as 1 within tolerance
    let drift: f64 = 1.0 - v.iter().sum::<f64>();
    v[d - 1] += drift;
    v
}

/// A random finite HMM with `d` states, `horizon` transitions and potentials
/// drawn uniformly from `[0.1, 1)`.
pub fn random_finite_hmm(d: usize, horizon: usize, seed: u64) -> Result<FiniteModel> {
    if d < 2 {
        return Err(Error::InvalidTables(format!("need at least 2 states, got {d}")));
    }
    let mut rng = stream(seed, &[domain::DATA, d as u64, horizon as u64]);
    let eta0 = random_probability_vector(d, &mut rng);
    let transitions = (0..horizon)
        .map(|_| (0..d).map(|_| random_probability_vector(d, &mut rng)).collect())
        .collect();
    let potentials = (0..=horizon)
        .map(|_| (0..d).map(|_| rng.random_range(0.1..1.0)).collect())
        .collect();
    FiniteModel::new(eta0, transitions, potentials)
}

/// A finite HMM from explicit tables, rejected if its exact flow goes extinct.
pub fn finite_hmm_from_tables(
    eta0: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    potentials: Vec<Vec<f64>>,
) -> Result<FiniteModel> {
    if eta0.len() < 2 {
        return Err(Error::InvalidTables(format!("need at least 2 states, got {}", eta0.len())));
    }
    let model = FiniteModel::new(eta0, transitions, potentials)?;
    exact_flow(&model).map_err(|e| Error::InvalidTables(e.to_string()))?;
    Ok(model)
}

/// The standard `d = 3`, `n = 10` instance used by the oracle tests.
pub fn standard_instance() -> FiniteModel {
    random_finite_hmm(3, 10, STANDARD_SEED).expect("standard instance is valid")
}
