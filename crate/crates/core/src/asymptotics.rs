//! Exact asymptotic bias and variance constants on finite models.
//!
//! With `fbar = f - eta_n(f)` and the normalized kernels `Qbar_{p,n}`:
//!
//! - single island: `N1 * bias -> B`, `N1 * Var -> V`;
//! - double bootstrap: `N1 N2 * bias -> B + B_tilde`, `N1 N2 * Var -> V + V_tilde`;
//! - independent islands: bias `B / N1`, variance `V / (N1 N2)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fk::{boltzmann_gibbs, exact_flow, qbar_kernel, FiniteModel, FlowStep, KernelMatrix};
use crate::fk::{Distribution, FeynmanKac};
use crate::functions::TestFunction;
use crate::particle::EPSILON_SLACK;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub b: f64,
    pub v: f64,
    pub b_tilde: f64,
    pub v_tilde: f64,
    pub horizon: usize,
    pub function: String,
}

/// Which estimator an MSE prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IslandMode {
    Independent,
    Interacting,
}

struct Terms {
    flow: Vec<FlowStep>,
    n: usize,
    /// `Qbar_{l,n}(fbar)` for `l = 0..=n`.
    transported: Vec<Vec<f64>>,
    /// `Qbar_{l,n}(1)` for `l = 0..=n`.
    mass: Vec<Vec<f64>>,
}

fn terms(model: &FiniteModel, f: &[f64]) -> Result<Terms> {
    if f.len() != model.dim() {
        return Err(Error::InvalidParameter(format!(
            "function has {} values for a {}-state model",
            f.len(),
            model.dim()
        )));
    }
    let flow = exact_flow(model)?;
    let n = flow.len() - 1;
    let mean = flow[n].eta.expect(f);
    let fbar: Vec<f64> = f.iter().map(|x| x - mean).collect();
    let mut transported = Vec::with_capacity(n + 1);
    let mut mass = Vec::with_capacity(n + 1);
    for l in 0..=n {
        let qb = qbar_kernel(model, &flow, l, n)?;
        transported.push(qb.apply(&fbar));
        mass.push(qb.row_sums());
    }
    Ok(Terms { flow, n, transported, mass })
}

fn integrate(eta: &Distribution, h: impl Fn(usize) -> f64) -> f64 {
    eta.probs().iter().enumerate().map(|(i, &m)| m * h(i)).sum()
}

/// `(B, V)` for the bootstrap filter.
pub fn single_constants(model: &FiniteModel, f: &[f64]) -> Result<(f64, f64)> {
    let t = terms(model, f)?;
    Ok(single_from_terms(&t))
}

fn single_from_terms(t: &Terms) -> (f64, f64) {
    let mut b = 0.0;
    let mut v = 0.0;
    for p in 0..=t.n {
        let eta = &t.flow[p].eta;
        let (a, q) = (&t.mass[p], &t.transported[p]);
        b -= integrate(eta, |i| a[i] * q[i]);
        v += integrate(eta, |i| q[i] * q[i]);
    }
    (b, v)
}

/// `(B_tilde, V_tilde)` for the double bootstrap.
pub fn island_constants(model: &FiniteModel, f: &[f64]) -> Result<(f64, f64)> {
    let t = terms(model, f)?;
    island_from_terms(model, &t)
}

fn island_from_terms(model: &FiniteModel, t: &Terms) -> Result<(f64, f64)> {
    let n = t.n;
    let mut b_tilde = 0.0;
    let mut v_tilde = 0.0;
    for l in 0..=n {
        let eta = &t.flow[l].eta;
        let weight = (n - l) as f64;
        let (a, q) = (&t.mass[l], &t.transported[l]);
        v_tilde += weight * integrate(eta, |i| q[i] * q[i]);
        b_tilde -= weight * integrate(eta, |i| (a[i] - 1.0) * q[i]);
        // sum_{p=l}^{n} (Qbar_{l,p}(1) - 1)
        let mut excess = vec![0.0; model.dim()];
        for p in l..=n {
            let qb = qbar_kernel(model, &t.flow, l, p)?;
            for (e, s) in excess.iter_mut().zip(qb.row_sums()) {
                *e += s - 1.0;
            }
        }
        b_tilde += integrate(eta, |i| excess[i] * q[i]);
    }
    Ok((b_tilde, v_tilde))
}

/// All four constants for `f` on `model`.
pub fn constants(model: &FiniteModel, f: &TestFunction) -> Result<AsymptoticConstants> {
    let fv = f.to_vector(model.dim());
    if fv.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter(format!("{f} is undefined on some states")));
    }
    let t = terms(model, &fv)?;
    let (b, v) = single_from_terms(&t);
    let (b_tilde, v_tilde) = island_from_terms(model, &t)?;
    Ok(AsymptoticConstants { b, v, b_tilde, v_tilde, horizon: t.n, function: f.name() })
}

/// Explicit epsilon-bootstrap selection kernel
/// `S(x, .) = eps g(x) delta_x + (1 - eps g(x)) Psi_g(mu)`.
pub fn epsilon_selection_kernel(mu: &Distribution, g: &[f64], eps: f64) -> Result<KernelMatrix> {
    let max = g.iter().copied().fold(0.0, f64::max);
    if !(eps >= 0.0) || eps * max > 1.0 + EPSILON_SLACK {
        return Err(Error::EpsilonOutOfRange { eps, step: 0, product: eps * max });
    }
    let psi = boltzmann_gibbs(mu, g)?;
    let d = g.len();
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|x| {
            let keep = (eps * g[x]).min(1.0);
            (0..d)
                .map(|y| {
                    let stay = if x == y { keep } else { 0.0 };
                    stay + (1.0 - keep) * psi.probs()[y]
                })
                .collect()
        })
        .collect();
    Ok(KernelMatrix::from_rows(&rows, 0, 0))
}

/// Limiting variance of the epsilon-bootstrap local error at step `p >= 1`:
/// `eta_{p-1}[S M_p f^2 - (S M_p f)^2]` with `S = S_{p-1, eta_{p-1}}`.
pub fn epsilon_local_variance(model: &FiniteModel, eps: f64, p: usize, f: &[f64]) -> Result<f64> {
    if p == 0 || p > model.horizon() {
        return Err(Error::IndexOrder { p, n: model.horizon() });
    }
    let g = model.potential_vector(p - 1);
    let max = g.iter().copied().fold(0.0, f64::max);
    if !(eps >= 0.0) || eps * max > 1.0 + EPSILON_SLACK {
        return Err(Error::EpsilonOutOfRange { eps, step: p - 1, product: eps * max });
    }
    let flow = exact_flow(model)?;
    let eta = &flow[p - 1].eta;
    let s = epsilon_selection_kernel(eta, g, eps)?;
    let mf = model.transition_apply(p - 1, f);
    let f2: Vec<f64> = f.iter().map(|x| x * x).collect();
    let mf2 = model.transition_apply(p - 1, &f2);
    let smf = s.apply(&mf);
    let smf2 = s.apply(&mf2);
    Ok(integrate(eta, |i| smf2[i] - smf[i] * smf[i]))
}

/// Leading-order MSE of the island estimator.
pub fn mse_predict(c: &AsymptoticConstants, n1: usize, n2: usize, mode: IslandMode) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    match mode {
        IslandMode::Independent => c.v / (n1 * n2) + c.b * c.b / (n1 * n1),
        IslandMode::Interacting => (c.v + c.v_tilde) / (n1 * n2),
    }
}

/// `B^2 N2 / V_tilde`: interaction is predicted to win iff `N1` is below it.
pub fn crossover_n1(c: &AsymptoticConstants, n2: usize) -> Result<f64> {
    if c.v_tilde > 0.0 {
        Ok(c.b * c.b * n2 as f64 / c.v_tilde)
    } else {
        let threshold = if c.b != 0.0 { f64::INFINITY } else { 0.0 };
        Err(Error::DegenerateVtilde { threshold })
    }
}
