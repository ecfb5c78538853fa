//! Exact asymptotic constants and the independent-vs-interacting MSE
//! crossover on finite models.

use islandpf::asymptotics::{constants, crossover_n1, mse_predict, AsymptoticConstants, IslandMode};
use islandpf::fk::exact_flow;
use islandpf::island::run_occupancy;
use islandpf::rng::{derive_seed, domain};
use islandpf::{AcrossScheme, Error, FiniteModel, RunConfig, TestFunction, WithinScheme};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::stats::moments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub function: String,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "B_tilde")]
    pub b_tilde: f64,
    #[serde(rename = "V_tilde")]
    pub v_tilde: f64,
    /// `B^2 / V_tilde`: the crossover `N1` per unit of `N2`.
    #[serde(rename = "crossover_N1_per_N2")]
    pub crossover_n1_per_n2: f64,
}

fn threshold_per_n2(c: &AsymptoticConstants) -> f64 {
    match crossover_n1(c, 1) {
        Ok(t) => t,
        Err(Error::DegenerateVtilde { threshold }) => threshold,
        Err(_) => f64::NAN,
    }
}

pub fn exact_table(model: &FiniteModel, functions: &[TestFunction]) -> Result<Vec<ExactRow>> {
    functions
        .iter()
        .map(|f| {
            let c = constants(model, f)?;
            Ok(ExactRow {
                function: c.function.clone(),
                n: c.horizon,
                b: c.b,
                v: c.v,
                b_tilde: c.b_tilde,
                v_tilde: c.v_tilde,
                crossover_n1_per_n2: threshold_per_n2(&c),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub function: String,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub threshold: f64,
    pub factor: f64,
    #[serde(rename = "N1")]
    pub n1: usize,
    pub predicted_mse_independent: f64,
    pub predicted_mse_interacting: f64,
    pub mse_independent: f64,
    pub mse_interacting: f64,
    /// `(mse_independent - mse_interacting) / se`, positive when interaction wins.
    pub z: f64,
    pub predicted_winner: String,
    pub empirical_winner: String,
}

impl CrossoverRow {
    /// Empirical ordering agrees with the prediction at one-sided level 5%.
    pub fn significant_agreement(&self) -> bool {
        const Z_95: f64 = 1.6448536269514722;
        match self.predicted_winner.as_str() {
            "interacting" => self.z > Z_95,
            _ => self.z < -Z_95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverSettings {
    pub n2: Vec<usize>,
    pub factors: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
}

/// Squared errors of `reps` runs with bootstrap within islands.
fn squared_errors(
    model: &FiniteModel,
    f: &TestFunction,
    truth: f64,
    n1: usize,
    n2: usize,
    across: AcrossScheme,
    seeds: impl Fn(usize) -> u64 + Sync,
    reps: usize,
) -> Result<Vec<f64>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = RunConfig::new(n1, n2, WithinScheme::Bootstrap, across.clone(), seeds(r))
                .with_functions(vec![f.clone()]);
            let est = run_occupancy(model, &cfg)?.estimates[0].1;
            Ok((est - truth).powi(2))
        })
        .collect()
}

/// Per `N2`: the predicted threshold `B^2 N2 / V_tilde` and empirical MSEs of
/// independent and bootstrap-interacting islands at `N1 = factor * threshold`.
pub fn crossover_report(model: &FiniteModel, f: &TestFunction, s: &CrossoverSettings) -> Result<Vec<CrossoverRow>> {
    if s.replications < 2 {
        return Err(HarnessError::InvalidConfig("crossover needs at least 2 replications".into()));
    }
    let c = constants(model, f)?;
    let flow = exact_flow(model)?;
    let fv = f.to_vector(model.dim());
    let truth = flow.last().expect("non-empty flow").eta.expect(&fv);
    let mut rows = Vec::new();
    for (i, &n2) in s.n2.iter().enumerate() {
        let threshold = crossover_n1(&c, n2)?;
        for (j, &factor) in s.factors.iter().enumerate() {
            let n1 = ((factor * threshold).round() as usize).max(1);
            let seeds = |mode: u64| {
                move |r: usize| derive_seed(s.seed, &[domain::REPLICATION, i as u64, j as u64, mode, r as u64])
            };
            let ind = squared_errors(model, f, truth, n1, n2, AcrossScheme::Independent, seeds(0), s.replications)?;
            let int = squared_errors(model, f, truth, n1, n2, AcrossScheme::Bootstrap, seeds(1), s.replications)?;
            let (m_ind, _, se_ind) = moments(&ind);
            let (m_int, _, se_int) = moments(&int);
            let z = (m_ind - m_int) / (se_ind * se_ind + se_int * se_int).sqrt();
            let p_ind = mse_predict(&c, n1, n2, IslandMode::Independent);
            let p_int = mse_predict(&c, n1, n2, IslandMode::Interacting);
            let winner = |a: f64, b: f64| if b < a { "interacting" } else { "independent" }.to_string();
            rows.push(CrossoverRow {
                function: c.function.clone(),
                n2,
                threshold,
                factor,
                n1,
                predicted_mse_independent: p_ind,
                predicted_mse_interacting: p_int,
                mse_independent: m_ind,
                mse_interacting: m_int,
                z,
                predicted_winner: winner(p_ind, p_int),
                empirical_winner: winner(m_ind, m_int),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use islandpf::models::standard_instance;

    #[test]
    fn exact_rows_for_the_standard_instance() {
        let rows = exact_table(&standard_instance(), &[TestFunction::Identity, TestFunction::Square]).unwrap();
        assert_eq!(rows.len(), 2);
        let r = &rows[0];
        assert_eq!(r.n, 10);
        assert!((r.crossover_n1_per_n2 - r.b * r.b / r.v_tilde).abs() < 1e-15);
    }

    #[test]
    fn constant_potentials_never_favour_interaction() {
        let m = FiniteModel::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.8, 0.2], vec![0.3, 0.7]]; 3],
            vec![vec![0.4, 0.4]; 4],
        )
        .unwrap();
        let rows = exact_table(&m, &[TestFunction::Identity]).unwrap();
        // B vanishes up to rounding
        assert!(rows[0].crossover_n1_per_n2 < 1e-20);
        let s = CrossoverSettings { n2: vec![8, 16], factors: vec![1.0], replications: 50, seed: 1 };
        let report = crossover_report(&m, &TestFunction::Identity, &s).unwrap();
        assert!(report.iter().all(|r| r.threshold < 1e-12 && r.n1 == 1 && r.predicted_winner == "independent"));
    }

    #[test]
    fn threshold_doubles_with_n2() {
        let s = CrossoverSettings { n2: vec![10, 20], factors: vec![1.0], replications: 4, seed: 2 };
        let report = crossover_report(&standard_instance(), &TestFunction::Identity, &s).unwrap();
        assert!((report[1].threshold - 2.0 * report[0].threshold).abs() < 1e-12);
    }
}
