//! Island particle approximations of Feynman-Kac flows.
//!
//! A population of `N1 * N2` particles is split into `N2` islands of `N1`
//! particles. Within each island a bootstrap, epsilon-bootstrap or adaptive
//! ESS filter runs; across islands the same family of selection schemes acts
//! on whole islands, using the island mean potential as the island-level
//! potential.
//!
//! Modules:
//!
//! - [`fk`]: model abstraction, Boltzmann-Gibbs transform, exact finite-state
//!   flows and semigroups, Kalman predictive oracle.
//! - [`particle`]: single-island populations and their selection/mutation steps.
//! - [`island`]: the two-level island system and the run loop.
//! - [`asymptotics`]: exact asymptotic bias/variance constants on finite models.
//! - [`models`]: linear Gaussian, stochastic volatility and finite HMM builders.

pub mod asymptotics;
pub mod error;
pub mod fk;
pub mod functions;
pub mod island;
pub mod models;
pub mod numeric;
pub mod particle;
pub mod rng;

pub use error::{Error, Result};
pub use fk::{Distribution, FeynmanKac, FiniteModel, KernelMatrix};
pub use functions::TestFunction;
pub use island::{AcrossScheme, IslandSystem, RunConfig, RunResult};
pub use particle::{EpsilonPolicy, Population, WithinScheme};
