//! Single-island particle approximations: bootstrap, epsilon-bootstrap and
//! adaptive ESS selection followed by mutation.

mod occupancy;

use rand::distr::weighted::{Error as WeightError, WeightedIndex};
use rand::distr::Distribution as _;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::FeynmanKac;
use crate::functions::{Observable, TestFunction};
use crate::numeric::compensated_sum;

pub use occupancy::{multinomial_counts, Occupancy};

/// Slack allowed when checking `eps * G <= 1`.
pub const EPSILON_SLACK: f64 = 1e-12;

/// How the epsilon-bootstrap acceptance scale `eps_p` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// Explicit `eps_p` per step; missing trailing entries reuse the last one.
    FixedSchedule(Vec<f64>),
    /// `eps_p = 1 / sup_bound(p)`.
    SupNormInverse,
    /// `eps_p = 1 / max G_p` over the current population.
    EmpiricalEssSup,
}

impl EpsilonPolicy {
    /// Resolve `eps_p` given the declared bound and the largest potential
    /// currently present.
    pub fn resolve(&self, p: usize, sup_bound: Option<f64>, current_max: f64) -> Result<f64> {
        let eps = match self {
            EpsilonPolicy::FixedSchedule(schedule) => *schedule
                .get(p)
                .or(schedule.last())
                .ok_or_else(|| Error::InvalidParameter("empty epsilon schedule".into()))?,
            EpsilonPolicy::SupNormInverse => {
                let bound = sup_bound.ok_or_else(|| {
                    Error::Unsupported(format!("no sup bound declared for G_{p}"))
                })?;
                if bound > 0.0 {
                    1.0 / bound
                } else {
                    0.0
                }
            }
            EpsilonPolicy::EmpiricalEssSup => {
                if current_max > 0.0 {
                    1.0 / current_max
                } else {
                    0.0
                }
            }
        };
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {eps}")));
        }
        Ok(eps)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EpsilonPolicy::FixedSchedule(_) => "fixed",
            EpsilonPolicy::SupNormInverse => "supnorm",
            EpsilonPolicy::EmpiricalEssSup => "essup",
        }
    }
}

/// Selection scheme applied to the particles of one island.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinScheme {
    Bootstrap,
    EpsilonBootstrap(EpsilonPolicy),
    AdaptiveEss { alpha: f64 },
}

impl WithinScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            WithinScheme::AdaptiveEss { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => Err(
                Error::InvalidParameter(format!("ESS threshold alpha must lie in (0,1), got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WithinScheme::Bootstrap => "bootstrap".into(),
            WithinScheme::EpsilonBootstrap(p) => format!("epsilon-{}", p.label()),
            WithinScheme::AdaptiveEss { .. } => "ess".into(),
        }
    }

    pub fn has_unit_weights(&self) -> bool {
        !matches!(self, WithinScheme::AdaptiveEss { .. })
    }
}

/// What one selection/mutation step did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOutcome {
    /// Whether any unit was redrawn by the selection.
    pub resampled: bool,
    /// Number of units redrawn by the selection.
    pub replaced: usize,
}

/// One island's weighted particle set at step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<S> {
    states: Vec<S>,
    weights: Vec<f64>,
    step: usize,
}

impl<S: Clone> Population<S> {
    /// `n1` i.i.d. draws from the initial law with unit weights.
    pub fn initial<M, R>(model: &M, n1: usize, rng: &mut R) -> Result<Self>
    where
        M: FeynmanKac<State = S>,
        R: Rng + ?Sized,
    {
        if n1 == 0 {
            return Err(Error::InvalidParameter("population size must be >= 1".into()));
        }
        let states = (0..n1).map(|_| model.sample_initial(rng)).collect();
        Ok(Self { states, weights: vec![1.0; n1], step: 0 })
    }

    pub fn from_parts(states: Vec<S>, weights: Vec<f64>, step: usize) -> Result<Self> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "population needs matching nonempty states/weights, got {} and {}",
                states.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(Self { states, weights, step })
    }

    pub fn unit(states: Vec<S>, step: usize) -> Result<Self> {
        let n = states.len();
        Self::from_parts(states, vec![1.0; n], step)
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn has_unit_weights(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Weighted average of an arbitrary function of the state.
    pub fn weighted_mean(&self, f: impl Fn(&S) -> f64) -> Result<f64> {
        let mass = compensated_sum(self.weights.iter().copied());
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let total = compensated_sum(self.states.iter().zip(&self.weights).map(|(x, &w)| w * f(x)));
        Ok(total / mass)
    }

    /// `G_p(x_i)` for every particle at the current step, validated against
    /// the model's declared bound.
    pub fn potentials<M>(&self, model: &M) -> Result<Vec<f64>>
    where
        M: FeynmanKac<State = S>,
    {
        let p = self.step;
        let bound = model.sup_bound(p);
        self.states
            .iter()
            .map(|x| {
                let g = model.potential(p, x);
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "potential G_{p} returned {g}; must be finite and >= 0"
                    )));
                }
                if let Some(b) = bound {
                    if g > b * (1.0 + EPSILON_SLACK) {
                        return Err(Error::InvalidParameter(format!(
                            "potential G_{p} = {g} exceeds declared bound {b}"
                        )));
                    }
                }
                Ok(g)
            })
            .collect()
    }

    fn mutate_from<M, R>(&mut self, model: &M, ancestors: &[usize], rng: &mut R)
    where
        M: FeynmanKac<State = S>,
        R: Rng + ?Sized,
    {
        let p = self.step;
        self.states = ancestors.iter().map(|&j| model.mutate(p, &self.states[j], rng)).collect();
        self.step += 1;
    }

    fn mutate_in_place<M, R>(&mut self, model: &M, rng: &mut R)
    where
        M: FeynmanKac<State = S>,
        R: Rng + ?Sized,
    {
        let p = self.step;
        for x in self.states.iter_mut() {
            *x = model.mutate(p, x, rng);
        }
        self.step += 1;
    }
}

/// `(sum w_i g_i)^2 / sum (w_i g_i)^2`.
pub fn ess_criterion(weights: &[f64], potentials: &[f64]) -> Result<f64> {
    if weights.len() != potentials.len() {
        return Err(Error::InvalidParameter("weights and potentials differ in length".into()));
    }
    ess_of_products(weights.iter().zip(potentials).map(|(w, g)| w * g))
}

fn ess_of_products(products: impl Iterator<Item = f64> + Clone) -> Result<f64> {
    // Scale by the maximum so the squares cannot underflow.
    let max = products.clone().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroMass);
    }
    let s = compensated_sum(products.clone().map(|v| v / max));
    let s2 = compensated_sum(products.map(|v| (v / max) * (v / max)));
    Ok(s * s / s2)
}

/// `count` i.i.d. indices with `P(j) = w_j / sum w`.
pub fn multinomial_select<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dist = weighted_index(weights)?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

fn weighted_index(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| match e {
        WeightError::InsufficientNonZero => Error::ZeroMass,
        other => Error::InvalidParameter(format!("invalid selection weights: {other}")),
    })
}

fn check_unit_weights<S: Clone>(pop: &Population<S>, scheme: &str) -> Result<()> {
    if pop.has_unit_weights() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{scheme} step requires unit weights")))
    }
}

/// Bootstrap selection (ancestors drawn proportionally to `G_p`) followed by
/// mutation through `M_{p+1}`.
pub fn step_bootstrap<M, R>(pop: &mut Population<M::State>, model: &M, rng: &mut R) -> Result<StepOutcome>
where
    M: FeynmanKac,
    R: Rng + ?Sized,
{
    check_unit_weights(pop, "bootstrap")?;
    let p = pop.step;
    let g = pop.potentials(model)?;
    let ancestors = multinomial_select(&g, pop.len(), rng).map_err(|e| e.at_step(p))?;
    pop.mutate_from(model, &ancestors, rng);
    Ok(StepOutcome { resampled: true, replaced: ancestors.len() })
}

/// Epsilon-bootstrap: particle `i` is kept with probability `eps * G_p(x_i)`,
/// otherwise replaced by a draw proportional to the potentials; then every
/// particle mutates.
pub fn step_epsilon<M, R>(
    pop: &mut Population<M::State>,
    model: &M,
    eps: f64,
    rng: &mut R,
) -> Result<StepOutcome>
where
    M: FeynmanKac,
    R: Rng + ?Sized,
{
    check_unit_weights(pop, "epsilon-bootstrap")?;
    let p = pop.step;
    let g = pop.potentials(model)?;
    check_epsilon(eps, &g, p)?;
    if !(g.iter().sum::<f64>() > 0.0) {
        return Err(Error::Extinction { step: p });
    }
    let keep: Vec<bool> = g.iter().map(|&gi| rng.random::<f64>() < eps * gi).collect();
    let replaced = keep.iter().filter(|k| !**k).count();
    let mut ancestors: Vec<usize> = (0..pop.len()).collect();
    if replaced > 0 {
        let dist = weighted_index(&g).map_err(|e| e.at_step(p))?;
        for (slot, kept) in ancestors.iter_mut().zip(&keep) {
            if !kept {
                *slot = dist.sample(rng);
            }
        }
    }
    pop.mutate_from(model, &ancestors, rng);
    Ok(StepOutcome { resampled: replaced > 0, replaced })
}

pub(crate) fn check_epsilon(eps: f64, potentials: &[f64], step: usize) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(Error::EpsilonOutOfRange { eps, step, product: f64::NAN });
    }
    let max = potentials.iter().copied().fold(0.0, f64::max);
    let product = eps * max;
    if product > 1.0 + EPSILON_SLACK {
        return Err(Error::EpsilonOutOfRange { eps, step, product });
    }
    Ok(())
}

/// Adaptive ESS step. With products `w_i G_p(x_i)`: if the ESS is at least
/// `alpha * N1` the weights become the products and particles mutate in
/// place; otherwise particles are resampled proportionally to the products
/// and weights reset to 1.
pub fn step_ess<M, R>(
    pop: &mut Population<M::State>,
    model: &M,
    alpha: f64,
    rng: &mut R,
) -> Result<StepOutcome>
where
    M: FeynmanKac,
    R: Rng + ?Sized,
{
    let p = pop.step;
    let g = pop.potentials(model)?;
    let products: Vec<f64> = pop.weights.iter().zip(&g).map(|(w, gi)| w * gi).collect();
    let ess = ess_of_products(products.iter().copied()).map_err(|e| e.at_step(p))?;
    let n = pop.len();
    if ess >= alpha * n as f64 {
        pop.weights = products;
        pop.mutate_in_place(model, rng);
        Ok(StepOutcome { resampled: false, replaced: 0 })
    } else {
        let ancestors = multinomial_select(&products, n, rng).map_err(|e| e.at_step(p))?;
        pop.weights.iter_mut().for_each(|w| *w = 1.0);
        pop.mutate_from(model, &ancestors, rng);
        Ok(StepOutcome { resampled: true, replaced: n })
    }
}

/// One step under `scheme`, resolving the epsilon policy when needed.
pub fn advance<M, R>(
    pop: &mut Population<M::State>,
    model: &M,
    scheme: &WithinScheme,
    rng: &mut R,
) -> Result<StepOutcome>
where
    M: FeynmanKac,
    R: Rng + ?Sized,
{
    match scheme {
        WithinScheme::Bootstrap => step_bootstrap(pop, model, rng),
        WithinScheme::EpsilonBootstrap(policy) => {
            let p = pop.step;
            let current_max = match policy {
                EpsilonPolicy::EmpiricalEssSup => {
                    pop.potentials(model)?.into_iter().fold(0.0, f64::max)
                }
                _ => 0.0,
            };
            let eps = policy.resolve(p, model.sup_bound(p), current_max)?;
            step_epsilon(pop, model, eps, rng)
        }
        WithinScheme::AdaptiveEss { alpha } => step_ess(pop, model, *alpha, rng),
    }
}

/// `eta_hat(f) = sum w_i f(x_i) / sum w_i`.
pub fn eta_hat<S: Clone + Observable>(pop: &Population<S>, f: &TestFunction) -> Result<f64> {
    pop.weighted_mean(|x| f.eval(x))
}

/// `ln gamma_hat_{p+1}(1) = ln gamma_hat_p(1) + ln eta_hat_p(G_p)`, with `p`
/// the population's current step.
pub fn gamma_hat_update<M: FeynmanKac>(
    log_prev: f64,
    pop: &Population<M::State>,
    model: &M,
) -> Result<f64> {
    let p = pop.step;
    let g = pop.potentials(model)?;
    let mass = compensated_sum(pop.weights.iter().copied());
    let num = compensated_sum(pop.weights.iter().zip(&g).map(|(w, gi)| w * gi));
    if !(mass > 0.0) || !(num > 0.0) {
        return Err(Error::Extinction { step: p });
    }
    Ok(log_prev + (num / mass).ln())
}

/// Local sampling error
/// `sqrt(N1) * [eta_hat_p(f) - eta_hat_{p-1}(G_{p-1} M_p f) / eta_hat_{p-1}(G_{p-1})]`.
///
/// Needs `M_p f`, so it is only available for models with explicit kernels.
pub fn local_error<M>(
    pop: &Population<M::State>,
    prev: &Population<M::State>,
    model: &M,
    f: &dyn Fn(&M::State) -> f64,
) -> Result<f64>
where
    M: FeynmanKac,
{
    let q = prev.step;
    if pop.step != q + 1 {
        return Err(Error::IndexOrder { p: q + 1, n: pop.step });
    }
    let g = prev.potentials(model)?;
    let mut num = Vec::with_capacity(prev.len());
    for ((x, &w), &gi) in prev.states.iter().zip(&prev.weights).zip(&g) {
        let mf = model.transition_expectation(q, x, f).ok_or_else(|| {
            Error::Unsupported("local error needs an explicit mutation kernel".into())
        })?;
        num.push(w * gi * mf);
    }
    let denom = compensated_sum(prev.weights.iter().zip(&g).map(|(w, gi)| w * gi));
    if !(denom > 0.0) {
        return Err(Error::Extinction { step: q });
    }
    let predicted = compensated_sum(num) / denom;
    let current = pop.weighted_mean(f)?;
    Ok((pop.len() as f64).sqrt() * (current - predicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::FiniteModel;
    use crate::rng::stream;

    fn two_state(g0: Vec<f64>) -> FiniteModel {
        FiniteModel::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.8, 0.2], vec![0.3, 0.7]]; 2],
            vec![g0, vec![1.0, 2.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess_criterion(&[1.0; 5], &[3.0; 5]).unwrap(), 5.0);
        assert_eq!(ess_criterion(&[1.0, 0.0, 0.0, 0.0], &[1.0; 4]).unwrap(), 1.0);
        assert!((ess_criterion(&[2.0, 1.0], &[1.0, 1.0]).unwrap() - 9.0 / 5.0).abs() < 1e-15);
        assert_eq!(ess_criterion(&[1.0, 1.0], &[0.0, 0.0]), Err(Error::ZeroMass));
        // tiny products do not underflow
        assert!((ess_criterion(&[1e-300, 1e-300], &[1e-5, 1e-5]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_degenerate_and_deterministic() {
        let mut rng = stream(1, &[]);
        assert!(multinomial_select(&[1.0, 0.0, 0.0], 50, &mut rng)
            .unwrap()
            .iter()
            .all(|&i| i == 0));
        let a = multinomial_select(&[0.2, 0.5, 0.3], 100, &mut stream(9, &[1])).unwrap();
        let b = multinomial_select(&[0.2, 0.5, 0.3], 100, &mut stream(9, &[1])).unwrap();
        assert_eq!(a, b);
        assert_eq!(multinomial_select(&[0.0, 0.0], 3, &mut rng), Err(Error::ZeroMass));
    }

    #[test]
    fn eta_hat_examples() {
        let pop = Population::from_parts(vec![0usize, 1], vec![1.0, 3.0], 0).unwrap();
        let ind = TestFunction::Table(vec![0.0, 1.0]);
        assert_eq!(eta_hat(&pop, &ind).unwrap(), 0.75);
        let one = TestFunction::Table(vec![1.0, 1.0]);
        assert_eq!(eta_hat(&pop, &one).unwrap(), 1.0);
        let unit = Population::unit(vec![0usize, 1, 1, 0, 1], 0).unwrap();
        assert!((eta_hat(&unit, &ind).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn single_particle_bootstrap_keeps_its_ancestor() {
        let m = two_state(vec![1.0, 2.0]);
        let mut pop = Population::unit(vec![1usize], 0).unwrap();
        let out = step_bootstrap(&mut pop, &m, &mut stream(3, &[])).unwrap();
        assert_eq!(pop.step(), 1);
        assert_eq!(pop.len(), 1);
        assert!(out.resampled);
        assert!(pop.has_unit_weights());
    }

    #[test]
    fn bootstrap_extinction() {
        let m = two_state(vec![0.0, 2.0]);
        let mut pop = Population::unit(vec![0usize, 0], 0).unwrap();
        assert_eq!(
            step_bootstrap(&mut pop, &m, &mut stream(3, &[])),
            Err(Error::Extinction { step: 0 })
        );
    }

    #[test]
    fn epsilon_full_keep_only_mutates() {
        let m = two_state(vec![2.0, 2.0]);
        let mut pop = Population::unit(vec![0usize, 1, 1, 0], 0).unwrap();
        let out = step_epsilon(&mut pop, &m, 0.5, &mut stream(5, &[])).unwrap();
        assert_eq!(out.replaced, 0);
        assert!(!out.resampled);
        assert_eq!(pop.step(), 1);
    }

    #[test]
    fn epsilon_out_of_range() {
        let m = two_state(vec![1.0, 2.0]);
        let mut pop = Population::unit(vec![0usize, 1], 0).unwrap();
        assert!(matches!(
            step_epsilon(&mut pop, &m, 0.75, &mut stream(5, &[])),
            Err(Error::EpsilonOutOfRange { .. })
        ));
    }

    #[test]
    fn ess_thresholds() {
        let m = two_state(vec![1.0, 1.0]);
        // equal products, alpha close to 1: tie keeps
        let mut pop = Population::unit(vec![0usize, 1, 0], 0).unwrap();
        let out = step_ess(&mut pop, &m, 1.0, &mut stream(2, &[])).unwrap();
        assert!(!out.resampled);
        // unequal products with alpha = 1 always resample, and weights reset to 1
        let m = two_state(vec![1.0, 3.0]);
        let mut pop = Population::unit(vec![0usize, 1, 0], 0).unwrap();
        let out = step_ess(&mut pop, &m, 1.0, &mut stream(2, &[])).unwrap();
        assert!(out.resampled);
        assert!(pop.has_unit_weights());
        // tiny alpha never resamples and multiplies weights
        let mut pop = Population::unit(vec![0usize, 1, 0], 0).unwrap();
        let out = step_ess(&mut pop, &m, 1e-9, &mut stream(2, &[])).unwrap();
        assert!(!out.resampled);
        assert_eq!(pop.weights(), &[1.0, 3.0, 1.0]);
    }

    #[test]
    fn gamma_hat_examples() {
        let m = FiniteModel::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.8, 0.2], vec![0.3, 0.7]]],
            vec![vec![2.5, 2.5], vec![1.0, 1.0]],
        )
        .unwrap();
        let pop = Population::unit(vec![0usize, 1, 1], 0).unwrap();
        let lg = gamma_hat_update(0.0, &pop, &m).unwrap();
        assert!((lg.exp() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn local_error_of_constant_is_zero() {
        let m = two_state(vec![1.0, 2.0]);
        let prev = Population::unit(vec![0usize, 1, 1, 0, 1], 0).unwrap();
        let mut pop = prev.clone();
        step_bootstrap(&mut pop, &m, &mut stream(11, &[])).unwrap();
        let w = local_error(&pop, &prev, &m, &|_| 1.0).unwrap();
        assert!(w.abs() < 1e-14);
    }

    #[test]
    fn epsilon_policy_resolution() {
        let fixed = EpsilonPolicy::FixedSchedule(vec![0.1, 0.2]);
        assert_eq!(fixed.resolve(1, None, 0.0).unwrap(), 0.2);
        assert_eq!(fixed.resolve(5, None, 0.0).unwrap(), 0.2);
        assert_eq!(EpsilonPolicy::SupNormInverse.resolve(0, Some(4.0), 1.0).unwrap(), 0.25);
        assert!(EpsilonPolicy::SupNormInverse.resolve(0, None, 1.0).is_err());
        assert_eq!(EpsilonPolicy::EmpiricalEssSup.resolve(0, None, 2.0).unwrap(), 0.5);
        assert!(WithinScheme::AdaptiveEss { alpha: 1.5 }.validate().is_err());
    }
}
