//! Feynman-Kac models, the Boltzmann-Gibbs transform and exact finite-state
//! flows.
//!
//! A model is a Markov chain `X_0 ~ eta_0`, `X_{p+1} ~ M_{p+1}(X_p, .)` with
//! nonnegative potentials `G_p`. The normalized flow is
//! `eta_{p+1} = Psi_p(eta_p) M_{p+1}` and the normalizing constants satisfy
//! `gamma_{p+1}(1) = gamma_p(1) * eta_p(G_p)`.

mod finite;
mod kalman;

use rand::Rng;

pub use finite::{
    boltzmann_gibbs, exact_flow, qbar_kernel, q_kernel, Distribution, FiniteModel, FlowStep,
    KernelMatrix,
};
pub use kalman::{kalman_predictive, Gaussian};

/// A Feynman-Kac model over states of type `State`, observed through a
/// sampler for the initial law and each mutation kernel.
///
/// `mutate(p, x, rng)` samples from `M_{p+1}(x, .)` for `0 <= p < horizon`;
/// `potential(p, x)` evaluates `G_p(x) >= 0`.
pub trait FeynmanKac: Sync {
    type State: Clone + Send + Sync;

    fn horizon(&self) -> usize;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn mutate<R: Rng + ?Sized>(&self, p: usize, x: &Self::State, rng: &mut R) -> Self::State;

    fn potential(&self, p: usize, x: &Self::State) -> f64;

    /// Upper bound on `sup_x G_p(x)`, when one is known.
    fn sup_bound(&self, _p: usize) -> Option<f64> {
        None
    }

    /// `M_{p+1} f (x)`, available only for models with explicit kernels.
    fn transition_expectation(
        &self,
        _p: usize,
        _x: &Self::State,
        _f: &dyn Fn(&Self::State) -> f64,
    ) -> Option<f64> {
        None
    }
}

/// Sample an index from a probability vector by inversion.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the accumulated mass: take the last state with
    // positive probability.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
