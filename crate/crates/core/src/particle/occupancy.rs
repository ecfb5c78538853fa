//! Occupancy-count representation of an unweighted island on a finite model.
//!
//! For bootstrap and epsilon-bootstrap selection the particles of an island
//! are exchangeable, so the island is fully described by how many particles
//! occupy each state. Selection and mutation then reduce to multinomial and
//! binomial draws on the counts, which has the same law as moving the
//! particles one at a time but costs `O(d^2)` per step instead of `O(N1)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};

use super::{check_epsilon, EpsilonPolicy, StepOutcome, WithinScheme};
use crate::error::{Error, Result};
use crate::fk::{FeynmanKac, FiniteModel};

/// Multinomial counts of `n` draws over `probs` (need not be normalized).
pub fn multinomial_counts<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mut out = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_mass = total;
    for (k, &pk) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if pk <= 0.0 {
            continue;
        }
        if pk >= remaining_mass || k + 1 == probs.len() {
            out[k] = remaining_n;
            remaining_n = 0;
            break;
        }
        let q = (pk / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining_n, q)
            .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
            .sample(rng);
        out[k] = draw;
        remaining_n -= draw;
        remaining_mass -= pk;
    }
    if remaining_n > 0 {
        // rounding left mass unassigned: give it to the last positive state
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
        out[last] += remaining_n;
    }
    Ok(out)
}

/// An island on a finite model stored as per-state particle counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    counts: Vec<u64>,
    step: usize,
}

impl Occupancy {
    pub fn initial<R: Rng + ?Sized>(model: &FiniteModel, n1: usize, rng: &mut R) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidParameter("population size must be >= 1".into()));
        }
        Ok(Self { counts: multinomial_counts(n1 as u64, model.eta0(), rng)?, step: 0 })
    }

    pub fn from_counts(counts: Vec<u64>, step: usize) -> Result<Self> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self { counts, step })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `eta_hat(f)` for `f` given as a vector over states.
    pub fn eta_hat(&self, f: &[f64]) -> f64 {
        let n = self.size() as f64;
        self.counts.iter().zip(f).map(|(&c, &v)| c as f64 * v).sum::<f64>() / n
    }

    /// Mean potential `eta_hat_p(G_p)` at the current step.
    pub fn mean_potential(&self, model: &FiniteModel) -> f64 {
        self.eta_hat(model.potential_vector(self.step))
    }

    fn max_occupied_potential(&self, model: &FiniteModel) -> f64 {
        let g = model.potential_vector(self.step);
        self.counts
            .iter()
            .zip(g)
            .filter(|(&c, _)| c > 0)
            .map(|(_, &gi)| gi)
            .fold(0.0, f64::max)
    }

    fn mutate_from<R: Rng + ?Sized>(&mut self, model: &FiniteModel, ancestors: &[u64], rng: &mut R) -> Result<()> {
        let m = model.transition(self.step);
        let mut next = vec![0u64; self.counts.len()];
        for (s, &a) in ancestors.iter().enumerate() {
            if a > 0 {
                for (n, c) in next.iter_mut().zip(multinomial_counts(a, &m[s], rng)?) {
                    *n += c;
                }
            }
        }
        self.counts = next;
        self.step += 1;
        Ok(())
    }

    /// One selection/mutation step. Only unit-weight schemes are representable.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        model: &FiniteModel,
        scheme: &WithinScheme,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let p = self.step;
        let g = model.potential_vector(p);
        let weighted: Vec<f64> = self.counts.iter().zip(g).map(|(&c, &gi)| c as f64 * gi).collect();
        if !(weighted.iter().sum::<f64>() > 0.0) {
            return Err(Error::Extinction { step: p });
        }
        let n = self.size();
        match scheme {
            WithinScheme::Bootstrap => {
                let ancestors = multinomial_counts(n, &weighted, rng)?;
                self.mutate_from(model, &ancestors, rng)?;
                Ok(StepOutcome { resampled: true, replaced: n as usize })
            }
            WithinScheme::EpsilonBootstrap(policy) => {
                let current_max = match policy {
                    EpsilonPolicy::EmpiricalEssSup => self.max_occupied_potential(model),
                    _ => 0.0,
                };
                let eps = policy.resolve(p, model.sup_bound(p), current_max)?;
                let occupied: Vec<f64> = self
                    .counts
                    .iter()
                    .zip(g)
                    .map(|(&c, &gi)| if c > 0 { gi } else { 0.0 })
                    .collect();
                check_epsilon(eps, &occupied, p)?;
                let mut ancestors = vec![0u64; self.counts.len()];
                let mut replaced = 0u64;
                for (s, &c) in self.counts.iter().enumerate() {
                    if c > 0 {
                        let keep_prob = (eps * g[s]).clamp(0.0, 1.0);
                        let kept = Binomial::new(c, keep_prob)
                            .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
                            .sample(rng);
                        ancestors[s] = kept;
                        replaced += c - kept;
                    }
                }
                if replaced > 0 {
                    for (a, d) in ancestors.iter_mut().zip(multinomial_counts(replaced, &weighted, rng)?) {
                        *a += d;
                    }
                }
                self.mutate_from(model, &ancestors, rng)?;
                Ok(StepOutcome { resampled: replaced > 0, replaced: replaced as usize })
            }
            WithinScheme::AdaptiveEss { .. } => Err(Error::Unsupported(
                "occupancy islands carry no per-particle weights; use particle populations for ESS".into(),
            )),
        }
    }
}
