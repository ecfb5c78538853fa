//! Two-level island system: `N2` islands of `N1` particles.
//!
//! Each step first selects island ancestors with the across-island scheme
//! (using the island mean potential `G^{N1}_p` as the island potential), then
//! runs the within-island selection and mutation on each selected island.
//! Across-island selection is a serial barrier; the within-island steps of
//! different islands are independent and may run in parallel. Every island
//! draws from its own stream keyed by `(seed, island, step)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{FeynmanKac, FiniteModel};
use crate::functions::{Observable, TestFunction};
use crate::numeric::{compensated_sum, log_mean_exp};
use crate::particle::{
    self, check_epsilon, multinomial_select, EpsilonPolicy, Occupancy, Population, StepOutcome,
    WithinScheme,
};
use crate::rng::{domain, stream};

/// Interaction scheme across islands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcrossScheme {
    Independent,
    Bootstrap,
    EpsilonBootstrap(EpsilonPolicy),
    AdaptiveEss { alpha_islands: f64 },
}

impl AcrossScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            AcrossScheme::AdaptiveEss { alpha_islands } if !(*alpha_islands > 0.0 && *alpha_islands < 1.0) => {
                Err(Error::InvalidParameter(format!(
                    "island ESS threshold must lie in (0,1), got {alpha_islands}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AcrossScheme::Independent => "independent".into(),
            AcrossScheme::Bootstrap => "bootstrap".into(),
            AcrossScheme::EpsilonBootstrap(p) => format!("epsilon-{}", p.label()),
            AcrossScheme::AdaptiveEss { .. } => "ess".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n1: usize,
    pub n2: usize,
    pub within: WithinScheme,
    pub across: AcrossScheme,
    pub seed: u64,
    pub functions: Vec<TestFunction>,
    /// Run within-island steps on the rayon pool.
    #[serde(default)]
    pub parallel_islands: bool,
}

impl RunConfig {
    pub fn new(n1: usize, n2: usize, within: WithinScheme, across: AcrossScheme, seed: u64) -> Self {
        Self {
            n1,
            n2,
            within,
            across,
            seed,
            functions: vec![TestFunction::Identity],
            parallel_islands: false,
        }
    }

    pub fn with_functions(mut self, functions: Vec<TestFunction>) -> Self {
        self.functions = functions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "N1 and N2 must be >= 1, got N1={} N2={}",
                self.n1, self.n2
            )));
        }
        self.within.validate()?;
        self.across.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    /// `(function name, estimate of eta_n(f))`.
    pub estimates: Vec<(String, f64)>,
    /// `ln gamma_hat_n(1)`.
    pub log_gamma: f64,
    pub interaction_count: u64,
    pub island_resample_events: u64,
    pub particle_resample_events: u64,
}

impl RunResult {
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }
}

/// An island representation the island engine can drive on model `M`.
pub trait Island<M: FeynmanKac>: Clone + Send + Sync {
    fn initial<R: Rng + ?Sized>(model: &M, n1: usize, rng: &mut R) -> Result<Self>;

    fn step(&self) -> usize;

    /// `G^{N1}_p`: the weighted mean of `G_p` over the island.
    fn island_potential(&self, model: &M) -> Result<f64>;

    fn advance<R: Rng + ?Sized>(&mut self, model: &M, scheme: &WithinScheme, rng: &mut R) -> Result<StepOutcome>;

    /// `eta_hat(f)` for the island.
    fn estimate(&self, f: &TestFunction) -> Result<f64>;
}

impl<M> Island<M> for Population<M::State>
where
    M: FeynmanKac,
    M::State: Observable,
{
    fn initial<R: Rng + ?Sized>(model: &M, n1: usize, rng: &mut R) -> Result<Self> {
        Population::initial(model, n1, rng)
    }

    fn step(&self) -> usize {
        Population::step(self)
    }

    fn island_potential(&self, model: &M) -> Result<f64> {
        island_potential(self, model)
    }

    fn advance<R: Rng + ?Sized>(&mut self, model: &M, scheme: &WithinScheme, rng: &mut R) -> Result<StepOutcome> {
        particle::advance(self, model, scheme, rng)
    }

    fn estimate(&self, f: &TestFunction) -> Result<f64> {
        particle::eta_hat(self, f)
    }
}

impl Island<FiniteModel> for Occupancy {
    fn initial<R: Rng + ?Sized>(model: &FiniteModel, n1: usize, rng: &mut R) -> Result<Self> {
        Occupancy::initial(model, n1, rng)
    }

    fn step(&self) -> usize {
        Occupancy::step(self)
    }

    fn island_potential(&self, model: &FiniteModel) -> Result<f64> {
        Ok(self.mean_potential(model))
    }

    fn advance<R: Rng + ?Sized>(
        &mut self,
        model: &FiniteModel,
        scheme: &WithinScheme,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        Occupancy::advance(self, model, scheme, rng)
    }

    fn estimate(&self, f: &TestFunction) -> Result<f64> {
        let v = f.to_vector(self.counts().len());
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter(format!("{f} is undefined on some states")));
        }
        Ok(self.eta_hat(&v))
    }
}

/// `G^{N1}_p(xi) = sum w_i G_p(x_i) / sum w_i`.
pub fn island_potential<M: FeynmanKac>(pop: &Population<M::State>, model: &M) -> Result<f64> {
    let g = pop.potentials(model)?;
    let mass = compensated_sum(pop.weights().iter().copied());
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(compensated_sum(pop.weights().iter().zip(&g).map(|(w, gi)| w * gi)) / mass)
}

/// `N2` i.i.d. island ancestors proportional to the island potentials.
pub fn island_select_bootstrap<R: Rng + ?Sized>(potentials: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    multinomial_select(potentials, potentials.len(), rng)
}

/// Island `i` keeps itself with probability `eps * G_i`; otherwise its
/// ancestor is drawn proportionally to the island potentials. Returns the
/// ancestors and the number of replaced islands.
pub fn island_select_epsilon<R: Rng + ?Sized>(
    potentials: &[f64],
    eps: f64,
    step: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, usize)> {
    check_epsilon(eps, potentials, step)?;
    if !(potentials.iter().sum::<f64>() > 0.0) {
        return Err(Error::Extinction { step });
    }
    let keep: Vec<bool> = potentials.iter().map(|&g| rng.random::<f64>() < eps * g).collect();
    let replaced = keep.iter().filter(|k| !**k).count();
    let mut ancestors: Vec<usize> = (0..potentials.len()).collect();
    if replaced > 0 {
        let draws = multinomial_select(potentials, replaced, rng)?;
        let mut draws = draws.into_iter();
        for (slot, kept) in ancestors.iter_mut().zip(&keep) {
            if !kept {
                *slot = draws.next().expect("one draw per replaced island");
            }
        }
    }
    Ok((ancestors, replaced))
}

/// Island-level ESS selection. Returns the ancestors, the new island weights
/// and whether the islands were resampled.
pub fn island_select_ess<R: Rng + ?Sized>(
    potentials: &[f64],
    omega: &[f64],
    alpha_islands: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<f64>, bool)> {
    let products: Vec<f64> = omega.iter().zip(potentials).map(|(o, g)| o * g).collect();
    let ess = particle::ess_criterion(&products, &vec![1.0; products.len()])?;
    let n2 = potentials.len();
    if ess >= alpha_islands * n2 as f64 {
        Ok(((0..n2).collect(), products, false))
    } else {
        let ancestors = multinomial_select(&products, n2, rng)?;
        Ok((ancestors, vec![1.0; n2], true))
    }
}

/// `N2` islands plus island weights and interaction bookkeeping.
#[derive(Debug, Clone)]
pub struct IslandSystem<I> {
    islands: Vec<I>,
    island_weights: Vec<f64>,
    /// Per-island `ln gamma_hat(1)`, used when islands never interact.
    island_log_gammas: Vec<f64>,
    log_gamma: f64,
    independent: bool,
    step: usize,
    pub interaction_count: u64,
    pub island_resample_events: u64,
    pub particle_resample_events: u64,
}

impl<I> IslandSystem<I> {
    pub fn islands(&self) -> &[I] {
        &self.islands
    }

    pub fn island_weights(&self) -> &[f64] {
        &self.island_weights
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

impl<I> IslandSystem<I> {
    /// `N2` islands of `N1` i.i.d. initial draws, unit island weights.
    pub fn initialize<M>(model: &M, cfg: &RunConfig) -> Result<Self>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        cfg.validate()?;
        let build = |i: usize| I::initial(model, cfg.n1, &mut stream(cfg.seed, &[domain::INIT, i as u64]));
        let islands: Result<Vec<I>> = if cfg.parallel_islands {
            (0..cfg.n2).into_par_iter().map(build).collect()
        } else {
            (0..cfg.n2).map(build).collect()
        };
        Ok(Self {
            islands: islands?,
            island_weights: vec![1.0; cfg.n2],
            island_log_gammas: vec![0.0; cfg.n2],
            log_gamma: 0.0,
            independent: matches!(cfg.across, AcrossScheme::Independent),
            step: 0,
            interaction_count: 0,
            island_resample_events: 0,
            particle_resample_events: 0,
        })
    }

    pub fn island_potentials<M>(&self, model: &M) -> Result<Vec<f64>>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        self.islands
            .iter()
            .map(|isl| isl.island_potential(model).map_err(|e| e.at_step(self.step)))
            .collect()
    }

    /// Across-island selection at the current step: returns island ancestors,
    /// updates island weights, `gamma_hat` and the interaction counters.
    pub fn select_across<M>(&mut self, model: &M, cfg: &RunConfig, potentials: &[f64]) -> Result<Vec<usize>>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        let p = self.step;
        let n2 = self.islands.len();
        let mut rng = stream(cfg.seed, &[domain::ACROSS, p as u64]);
        match &cfg.across {
            AcrossScheme::Independent => {
                for (lg, &g) in self.island_log_gammas.iter_mut().zip(potentials) {
                    *lg += g.ln();
                }
                if potentials.iter().all(|&g| g <= 0.0) {
                    return Err(Error::Extinction { step: p });
                }
                Ok((0..n2).collect())
            }
            AcrossScheme::Bootstrap => {
                self.accumulate_gamma(potentials, p)?;
                let ancestors = island_select_bootstrap(potentials, &mut rng).map_err(|e| e.at_step(p))?;
                self.interaction_count += n2 as u64;
                self.island_resample_events += 1;
                Ok(ancestors)
            }
            AcrossScheme::EpsilonBootstrap(policy) => {
                self.accumulate_gamma(potentials, p)?;
                let current_max = potentials.iter().copied().fold(0.0, f64::max);
                let eps = policy.resolve(p, model.sup_bound(p), current_max)?;
                let (ancestors, replaced) = island_select_epsilon(potentials, eps, p, &mut rng)?;
                self.interaction_count += replaced as u64;
                if replaced > 0 {
                    self.island_resample_events += 1;
                }
                Ok(ancestors)
            }
            AcrossScheme::AdaptiveEss { alpha_islands } => {
                self.accumulate_gamma(potentials, p)?;
                let (ancestors, omega, resampled) =
                    island_select_ess(potentials, &self.island_weights, *alpha_islands, &mut rng)
                        .map_err(|e| e.at_step(p))?;
                self.island_weights = omega;
                if resampled {
                    self.interaction_count += n2 as u64;
                    self.island_resample_events += 1;
                }
                Ok(ancestors)
            }
        }
    }

    /// `gamma_hat` factor `sum Omega_i G_i / sum Omega_i`.
    fn accumulate_gamma(&mut self, potentials: &[f64], p: usize) -> Result<()> {
        let mass = compensated_sum(self.island_weights.iter().copied());
        let num = compensated_sum(self.island_weights.iter().zip(potentials).map(|(o, g)| o * g));
        if !(mass > 0.0) || !(num > 0.0) {
            return Err(Error::Extinction { step: p });
        }
        self.log_gamma += (num / mass).ln();
        Ok(())
    }

    /// Replace islands by their selected ancestors and run the within-island
    /// step on each.
    pub fn advance_islands<M>(&mut self, model: &M, cfg: &RunConfig, ancestors: &[usize]) -> Result<()>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        let p = self.step;
        let seed = cfg.seed;
        let within = &cfg.within;
        let parents = &self.islands;
        let step_one = |(i, &a): (usize, &usize)| -> Result<(I, StepOutcome)> {
            let mut island = parents[a].clone();
            let mut rng = stream(seed, &[domain::WITHIN, i as u64, p as u64]);
            let out = island.advance(model, within, &mut rng).map_err(|e| e.at_step(p))?;
            Ok((island, out))
        };
        let stepped: Result<Vec<(I, StepOutcome)>> = if cfg.parallel_islands {
            ancestors.par_iter().enumerate().map(step_one).collect()
        } else {
            ancestors.iter().enumerate().map(step_one).collect()
        };
        let stepped = stepped?;
        self.particle_resample_events += stepped.iter().filter(|(_, o)| o.resampled).count() as u64;
        self.islands = stepped.into_iter().map(|(isl, _)| isl).collect();
        self.step += 1;
        Ok(())
    }

    /// `ln gamma_hat(1)` at the current step.
    pub fn log_gamma(&self) -> f64 {
        if self.independent {
            log_mean_exp(&self.island_log_gammas)
        } else {
            self.log_gamma
        }
    }

    /// `(sum Omega_i)^{-1} sum_i Omega_i eta_hat^{(i)}(f)`.
    pub fn double_estimator<M>(&self, f: &TestFunction) -> Result<f64>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        double_estimator(&self.island_weights, &self.island_estimates::<M>(f)?)
    }

    fn island_estimates<M>(&self, f: &TestFunction) -> Result<Vec<f64>>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        self.islands.iter().map(|isl| Island::<M>::estimate(isl, f)).collect()
    }
}

/// `(sum Omega_i)^{-1} sum_i Omega_i m_i` from island weights and island means.
pub fn double_estimator(omega: &[f64], island_means: &[f64]) -> Result<f64> {
    let mass = compensated_sum(omega.iter().copied());
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(compensated_sum(omega.iter().zip(island_means).map(|(o, m)| o * m)) / mass)
}

/// Run the island system to the model horizon with particle populations.
pub fn run<M>(model: &M, cfg: &RunConfig) -> Result<RunResult>
where
    M: FeynmanKac,
    M::State: Observable,
{
    run_with::<M, Population<M::State>>(model, cfg)
}

/// Run the island system on a finite model with occupancy-count islands.
/// Supports the unit-weight within-island schemes only.
pub fn run_occupancy(model: &FiniteModel, cfg: &RunConfig) -> Result<RunResult> {
    run_with::<FiniteModel, Occupancy>(model, cfg)
}

pub fn run_with<M, I>(model: &M, cfg: &RunConfig) -> Result<RunResult>
where
    M: FeynmanKac,
    I: Island<M>,
{
    let mut sys = IslandSystem::<I>::initialize(model, cfg)?;
    for _ in 0..model.horizon() {
        let potentials = sys.island_potentials(model)?;
        let ancestors = sys.select_across(model, cfg, &potentials)?;
        sys.advance_islands(model, cfg, &ancestors)?;
    }
    sys.finish(cfg)
}

impl<I> IslandSystem<I> {
    /// Estimates for the configured functions plus counters.
    pub fn finish<M>(&self, cfg: &RunConfig) -> Result<RunResult>
    where
        M: FeynmanKac,
        I: Island<M>,
    {
        let estimates = cfg
            .functions
            .iter()
            .map(|f| Ok((f.name(), self.double_estimator::<M>(f)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunResult {
            estimates,
            log_gamma: self.log_gamma(),
            interaction_count: self.interaction_count,
            island_resample_events: self.island_resample_events,
            particle_resample_events: self.particle_resample_events,
        })
    }
}
