//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use islandpf::models::{
    make_lgm, make_sv, random_finite_hmm, standard_instance, ContinuousKind, LgmParams,
    LinearGaussianModel, StochasticVolatilityModel, SvParams,
};
use islandpf::rng::{domain, stream};
use islandpf::{AcrossScheme, EpsilonPolicy, FiniteModel, TestFunction, WithinScheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    /// Explicit `(N1, N2)` cells; appended after the grid cells.
    #[serde(default)]
    pub cells: Vec<(usize, usize)>,
    #[serde(default)]
    pub grid: Option<Grid>,
    pub schemes: Vec<SchemePair>,
    #[serde(default = "default_alpha")]
    pub alpha_particles: f64,
    #[serde(default = "default_alpha")]
    pub alpha_islands: f64,
    #[serde(default)]
    pub epsilon: EpsilonSpec,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_functions")]
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub engine: Engine,
    /// Per-cell replication caps, applied when `N1 * N2` reaches `min_particles`.
    #[serde(default)]
    pub replication_caps: Vec<ReplicationCap>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub sv_reference: Option<SvReference>,
    #[serde(default)]
    pub crossover: Option<CrossoverSpec>,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_functions() -> Vec<TestFunction> {
    vec![TestFunction::Identity]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCap {
    pub min_particles: usize,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Occupancy counts for finite models with unit-weight within schemes,
    /// particle populations otherwise.
    #[default]
    Auto,
    Particles,
    Occupancy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSpec {
    #[default]
    Essup,
    Supnorm,
    Fixed(Vec<f64>),
}

impl EpsilonSpec {
    pub fn policy(&self) -> EpsilonPolicy {
        match self {
            EpsilonSpec::Essup => EpsilonPolicy::EmpiricalEssSup,
            EpsilonSpec::Supnorm => EpsilonPolicy::SupNormInverse,
            EpsilonSpec::Fixed(v) => EpsilonPolicy::FixedSchedule(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinKind {
    Bootstrap,
    Epsilon,
    Ess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcrossKind {
    Independent,
    Bootstrap,
    Epsilon,
    Ess,
}

/// A within/across pairing; `epsilon` overrides the global policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemePair {
    pub within: WithinKind,
    pub across: AcrossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSpec>,
}

impl SchemePair {
    pub fn new(within: WithinKind, across: AcrossKind) -> Self {
        Self { within, across, epsilon: None }
    }

    pub fn with_epsilon(mut self, eps: EpsilonSpec) -> Self {
        self.epsilon = Some(eps);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Lgm { phi: f64, sigma_u: f64, sigma_v: f64, data: DataSpec },
    Sv { alpha: f64, sigma: f64, beta: f64, data: DataSpec },
    Finite { instance: FiniteSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSpec {
    Simulated { seed: u64, length: usize },
    Inline { observations: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteSpec {
    /// The seeded `d = 3`, `n = 10` instance.
    Standard,
    Random { d: usize, horizon: usize, seed: u64 },
    Tables(FiniteModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvReference {
    pub particles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverSpec {
    pub n2: Vec<usize>,
    /// Multiples of the predicted threshold at which `N1` is evaluated.
    #[serde(default = "default_factors")]
    pub factors: Vec<f64>,
    pub replications: usize,
}

fn default_factors() -> Vec<f64> {
    vec![0.25, 4.0]
}

/// A model ready to run.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Lgm(LinearGaussianModel),
    Sv(StochasticVolatilityModel),
    Finite(FiniteModel),
}

impl BuiltModel {
    pub fn horizon(&self) -> usize {
        use islandpf::FeynmanKac;
        match self {
            BuiltModel::Lgm(m) => m.horizon(),
            BuiltModel::Sv(m) => m.horizon(),
            BuiltModel::Finite(m) => m.horizon(),
        }
    }
}

impl DataSpec {
    fn observations(&self, kind: ContinuousKind) -> Result<Vec<f64>> {
        match self {
            DataSpec::Inline { observations } => Ok(observations.clone()),
            DataSpec::Simulated { seed, length } => {
                let mut rng = stream(*seed, &[domain::DATA]);
                Ok(kind.simulate(*length, &mut rng)?.observations)
            }
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel> {
        Ok(match self {
            ModelSpec::Lgm { phi, sigma_u, sigma_v, data } => {
                let kind = ContinuousKind::Lgm { phi: *phi, sigma_u: *sigma_u, sigma_v: *sigma_v };
                BuiltModel::Lgm(make_lgm(LgmParams {
                    phi: *phi,
                    sigma_u: *sigma_u,
                    sigma_v: *sigma_v,
                    observations: data.observations(kind)?,
                })?)
            }
            ModelSpec::Sv { alpha, sigma, beta, data } => {
                let kind = ContinuousKind::Sv { alpha: *alpha, sigma: *sigma, beta: *beta };
                BuiltModel::Sv(make_sv(SvParams {
                    alpha: *alpha,
                    sigma: *sigma,
                    beta: *beta,
                    observations: data.observations(kind)?,
                })?)
            }
            ModelSpec::Finite { instance: FiniteSpec::Standard } => BuiltModel::Finite(standard_instance()),
            ModelSpec::Finite { instance: FiniteSpec::Random { d, horizon, seed } } => {
                BuiltModel::Finite(random_finite_hmm(*d, *horizon, *seed)?)
            }
            ModelSpec::Finite { instance: FiniteSpec::Tables(m) } => BuiltModel::Finite(m.clone()),
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// All `(N1, N2)` cells: grid cells in row-major `(n1, n2)` order, then
    /// explicit cells.
    pub fn cell_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if let Some(g) = &self.grid {
            for &a in &g.n1 {
                for &b in &g.n2 {
                    out.push((a, b));
                }
            }
        }
        out.extend(self.cells.iter().copied());
        out
    }

    pub fn replications_for(&self, n1: usize, n2: usize) -> usize {
        let particles = n1 * n2;
        self.replication_caps
            .iter()
            .filter(|c| particles >= c.min_particles)
            .map(|c| c.replications)
            .fold(self.replications, usize::min)
    }

    pub fn within_scheme(&self, pair: &SchemePair) -> WithinScheme {
        match pair.within {
            WithinKind::Bootstrap => WithinScheme::Bootstrap,
            WithinKind::Epsilon => WithinScheme::EpsilonBootstrap(self.epsilon_for(pair).policy()),
            WithinKind::Ess => WithinScheme::AdaptiveEss { alpha: self.alpha_particles },
        }
    }

    pub fn across_scheme(&self, pair: &SchemePair) -> AcrossScheme {
        match pair.across {
            AcrossKind::Independent => AcrossScheme::Independent,
            AcrossKind::Bootstrap => AcrossScheme::Bootstrap,
            AcrossKind::Epsilon => AcrossScheme::EpsilonBootstrap(self.epsilon_for(pair).policy()),
            AcrossKind::Ess => AcrossScheme::AdaptiveEss { alpha_islands: self.alpha_islands },
        }
    }

    fn epsilon_for<'a>(&'a self, pair: &'a SchemePair) -> &'a EpsilonSpec {
        pair.epsilon.as_ref().unwrap_or(&self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.replications == 0 {
            return invalid("replications must be >= 1".into());
        }
        if self.schemes.is_empty() {
            return invalid("at least one scheme pair is required".into());
        }
        if self.functions.is_empty() {
            return invalid("at least one test function is required".into());
        }
        if self.workers == Some(0) {
            return invalid("workers must be >= 1".into());
        }
        if self.replication_caps.iter().any(|c| c.replications == 0) {
            return invalid("replication caps must be >= 1".into());
        }
        for &(n1, n2) in &self.cell_list() {
            if n1 == 0 || n2 == 0 {
                return invalid(format!("cell ({n1}, {n2}) has an empty dimension"));
            }
        }
        for pair in &self.schemes {
            self.within_scheme(pair).validate()?;
            self.across_scheme(pair).validate()?;
            if self.engine == Engine::Occupancy && pair.within == WithinKind::Ess {
                return invalid("the occupancy engine cannot run ESS within islands".into());
            }
        }
        if self.engine == Engine::Occupancy && !matches!(self.model, ModelSpec::Finite { .. }) {
            return invalid("the occupancy engine needs a finite model".into());
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the settings that determine the
    /// raw results (output location, worker count and timing excluded).
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.workers = None;
        canonical.record_timing = false;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kind": "lgm", "phi": 0.9, "sigma_u": 0.6, "sigma_v": 1.0,
                  "data": {"seed": 1, "length": 20}},
        "cells": [[10, 10]],
        "schemes": [{"within": "bootstrap", "across": "independent"}],
        "replications": 5,
        "seed": 3
    }"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.functions, vec![TestFunction::Identity]);
        assert_eq!(cfg.alpha_islands, 0.5);
        assert_eq!(cfg.cell_list(), vec![(10, 10)]);
        assert_eq!(cfg.model.build().unwrap().horizon(), 20);
    }

    #[test]
    fn syntax_errors_report_lines() {
        let broken = MINIMAL.replace("\"replications\": 5,", "\"replications\": 5");
        match ExperimentConfig::from_json(&broken) {
            Err(HarnessError::Config { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.workers = Some(8);
        b.output = Some("elsewhere".into());
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 4;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn finite_variants_and_caps() {
        let text = r#"{
            "model": {"kind": "finite", "instance": {"random": {"d": 3, "horizon": 4, "seed": 2}}},
            "grid": {"n1": [1, 100], "n2": [1, 1000]},
            "schemes": [{"within": "epsilon", "across": "epsilon", "epsilon": "supnorm"}],
            "replication_caps": [{"min_particles": 100000, "replications": 3}],
            "replications": 50, "seed": 0
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.cell_list(), vec![(1, 1), (1, 1000), (100, 1), (100, 1000)]);
        assert_eq!(cfg.replications_for(100, 1000), 3);
        assert_eq!(cfg.replications_for(1, 1000), 50);
        assert_eq!(
            cfg.within_scheme(&cfg.schemes[0]),
            WithinScheme::EpsilonBootstrap(EpsilonPolicy::SupNormInverse)
        );
        let standard = r#"{"model": {"kind": "finite", "instance": "standard"}, "cells": [[2, 2]],
            "schemes": [{"within": "ess", "across": "ess"}], "replications": 1, "seed": 0}"#;
        assert!(ExperimentConfig::from_json(standard).is_ok());
    }

    #[test]
    fn rejects_bad_settings() {
        let zero = MINIMAL.replace("\"replications\": 5", "\"replications\": 0");
        assert!(matches!(ExperimentConfig::from_json(&zero), Err(HarnessError::InvalidConfig(_))));
        let occupancy = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"engine\": \"occupancy\"");
        assert!(ExperimentConfig::from_json(&occupancy).is_err());
    }
}
