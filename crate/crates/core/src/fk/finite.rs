use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_categorical, FeynmanKac};
use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A probability vector over `d` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probability_vector(&probs, "distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(d: usize) -> Self {
        Self { probs: vec![1.0 / d as f64; d] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `mu(f)`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        dot(&self.probs, f)
    }

    /// `mu K` as a row vector (not renormalized).
    pub fn push(&self, k: &KernelMatrix) -> Vec<f64> {
        k.left_apply(&self.probs)
    }
}

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidTables(format!("{what}: empty vector")));
    }
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidTables(format!("{what}: negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidTables(format!("{what}: sums to {s}, not 1")));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonnegative `d x d` kernel transporting measures from `from_step` to
/// `to_step`; stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    d: usize,
    entries: Vec<f64>,
    pub from_step: usize,
    pub to_step: usize,
}

impl KernelMatrix {
    pub fn identity(d: usize, step: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1.0;
        }
        Self { d, entries, from_step: step, to_step: step }
    }

    pub fn from_rows(rows: &[Vec<f64>], from_step: usize, to_step: usize) -> Self {
        let d = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { d, entries, from_step, to_step }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    /// `K f` as a column vector.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| dot(self.row(i), f)).collect()
    }

    /// `mu K` as a row vector.
    pub fn left_apply(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, &m) in mu.iter().enumerate() {
            if m != 0.0 {
                for (o, &k) in out.iter_mut().zip(self.row(i)) {
                    *o += m * k;
                }
            }
        }
        out
    }

    /// `K 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Kernel composition `self * other`.
    pub fn compose(&self, other: &KernelMatrix) -> KernelMatrix {
        let d = self.d;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..d {
                        entries[i * d + j] += a * other.get(k, j);
                    }
                }
            }
        }
        KernelMatrix { d, entries, from_step: self.from_step, to_step: other.to_step }
    }

    pub fn scaled(&self, c: f64) -> KernelMatrix {
        KernelMatrix {
            d: self.d,
            entries: self.entries.iter().map(|x| x * c).collect(),
            from_step: self.from_step,
            to_step: self.to_step,
        }
    }

    pub fn max_abs_diff(&self, other: &KernelMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A finite-state Feynman-Kac model with explicit tables.
///
/// `transitions[p]` is the row-stochastic matrix `M_{p+1}` (so there are
/// `horizon` of them) and `potentials[p]` is `g_p` for `0 <= p <= horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteTables")]
pub struct FiniteModel {
    d: usize,
    eta0: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    potentials: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct FiniteTables {
    eta0: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    potentials: Vec<Vec<f64>>,
}

impl TryFrom<FiniteTables> for FiniteModel {
    type Error = Error;
    fn try_from(t: FiniteTables) -> Result<Self> {
        FiniteModel::new(t.eta0, t.transitions, t.potentials)
    }
}

impl FiniteModel {
    pub fn new(
        eta0: Vec<f64>,
        transitions: Vec<Vec<Vec<f64>>>,
        potentials: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let d = eta0.len();
        check_probability_vector(&eta0, "eta0")?;
        if potentials.len() != transitions.len() + 1 {
            return Err(Error::InvalidTables(format!(
                "expected {} potential vectors for {} transitions, got {}",
                transitions.len() + 1,
                transitions.len(),
                potentials.len()
            )));
        }
        for (p, m) in transitions.iter().enumerate() {
            if m.len() != d {
                return Err(Error::InvalidTables(format!("transition {p}: expected {d} rows")));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::InvalidTables(format!(
                        "transition {p} row {i}: expected {d} entries"
                    )));
                }
                check_probability_vector(row, &format!("transition {p} row {i}"))?;
            }
        }
        for (p, g) in potentials.iter().enumerate() {
            if g.len() != d {
                return Err(Error::InvalidTables(format!("potential {p}: expected {d} entries")));
            }
            if g.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidTables(format!(
                    "potential {p}: negative or non-finite entry"
                )));
            }
        }
        Ok(Self { d, eta0, transitions, potentials })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eta0(&self) -> &[f64] {
        &self.eta0
    }

    /// `M_{p+1}`.
    pub fn transition(&self, p: usize) -> &[Vec<f64>] {
        &self.transitions[p]
    }

    /// `g_p`.
    pub fn potential_vector(&self, p: usize) -> &[f64] {
        &self.potentials[p]
    }

    /// `M_{p+1} f`.
    pub fn transition_apply(&self, p: usize, f: &[f64]) -> Vec<f64> {
        self.transitions[p].iter().map(|row| dot(row, f)).collect()
    }

    /// One-step potential kernel `Q_{p+1} = diag(g_p) M_{p+1}`.
    pub fn q_step(&self, p: usize) -> KernelMatrix {
        let rows: Vec<Vec<f64>> = self.transitions[p]
            .iter()
            .zip(&self.potentials[p])
            .map(|(row, &g)| row.iter().map(|m| g * m).collect())
            .collect();
        KernelMatrix::from_rows(&rows, p, p + 1)
    }

    /// The same model truncated to `horizon` steps.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon > self.horizon() {
            return Err(Error::IndexOrder { p: horizon, n: self.horizon() });
        }
        Ok(Self {
            d: self.d,
            eta0: self.eta0.clone(),
            transitions: self.transitions[..horizon].to_vec(),
            potentials: self.potentials[..=horizon].to_vec(),
        })
    }
}

impl FeynmanKac for FiniteModel {
    type State = usize;

    fn horizon(&self) -> usize {
        self.transitions.len()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.eta0, rng)
    }

    fn mutate<R: Rng + ?Sized>(&self, p: usize, x: &usize, rng: &mut R) -> usize {
        sample_categorical(&self.transitions[p][*x], rng)
    }

    fn potential(&self, p: usize, x: &usize) -> f64 {
        self.potentials[p][*x]
    }

    fn sup_bound(&self, p: usize) -> Option<f64> {
        Some(self.potentials[p].iter().copied().fold(0.0, f64::max))
    }

    fn transition_expectation(
        &self,
        p: usize,
        x: &usize,
        f: &dyn Fn(&usize) -> f64,
    ) -> Option<f64> {
        Some(self.transitions[p][*x].iter().enumerate().map(|(y, m)| m * f(&y)).sum())
    }
}

/// `Psi_g(mu)(i) = g_i mu_i / mu(g)`.
pub fn boltzmann_gibbs(mu: &Distribution, g: &[f64]) -> Result<Distribution> {
    let mass = mu.expect(g);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(Distribution {
        probs: mu.probs.iter().zip(g).map(|(m, gi)| m * gi / mass).collect(),
    })
}

/// One entry of the exact flow: `eta_p` and `ln gamma_p(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStep {
    pub eta: Distribution,
    pub log_gamma: f64,
}

impl FlowStep {
    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }
}

/// `(eta_p, gamma_p(1))` for `p = 0..=horizon`.
pub fn exact_flow(model: &FiniteModel) -> Result<Vec<FlowStep>> {
    let n = model.horizon();
    let mut out = Vec::with_capacity(n + 1);
    let mut eta = Distribution { probs: model.eta0.clone() };
    let mut log_gamma = 0.0;
    for p in 0..n {
        let g = model.potential_vector(p);
        let mass = eta.expect(g);
        let selected = boltzmann_gibbs(&eta, g).map_err(|_| Error::Extinction { step: p })?;
        let next = selected.push(&KernelMatrix::from_rows(model.transition(p), p, p + 1));
        out.push(FlowStep { eta, log_gamma });
        log_gamma += mass.ln();
        eta = Distribution { probs: next };
    }
    out.push(FlowStep { eta, log_gamma });
    Ok(out)
}

/// `Q_{p,n} = Q_{p+1} ... Q_n`, with `Q_{n,n}` the identity.
pub fn q_kernel(model: &FiniteModel, p: usize, n: usize) -> Result<KernelMatrix> {
    if p > n {
        return Err(Error::IndexOrder { p, n });
    }
    if n > model.horizon() {
        return Err(Error::IndexOrder { p: n, n: model.horizon() });
    }
    let mut k = KernelMatrix::identity(model.dim(), p);
    for l in p..n {
        k = k.compose(&model.q_step(l));
    }
    k.from_step = p;
    k.to_step = n;
    Ok(k)
}

/// `Qbar_{p,n} = Q_{p,n} / eta_p Q_{p,n}(1)`, using the supplied exact flow.
pub fn qbar_kernel(
    model: &FiniteModel,
    flow: &[FlowStep],
    p: usize,
    n: usize,
) -> Result<KernelMatrix> {
    let q = q_kernel(model, p, n)?;
    if p == n {
        return Ok(q);
    }
    let mass = flow[p].eta.expect(&q.row_sums());
    if !(mass > 0.0) {
        return Err(Error::Extinction { step: p });
    }
    Ok(q.scaled(1.0 / mass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn boltzmann_gibbs_examples() {
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let out = boltzmann_gibbs(&mu, &[1.0, 3.0]).unwrap();
        assert_close(out.probs(), &[0.25, 0.75], 1e-15);

        let mu = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = boltzmann_gibbs(&mu, &[2.0, 1.0, 4.0]).unwrap();
        assert_close(out.probs(), &[0.4 / 2.7, 0.3 / 2.7, 2.0 / 2.7], 1e-15);

        let out = boltzmann_gibbs(&mu, &[3.0, 3.0, 3.0]).unwrap();
        assert_close(out.probs(), mu.probs(), 1e-15);
    }

    #[test]
    fn boltzmann_gibbs_zero_mass() {
        let mu = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(boltzmann_gibbs(&mu, &[0.0, 5.0]), Err(Error::ZeroMass));
    }

    #[test]
    fn deterministic_swap_flow() {
        let c = 2.5;
        let m = FiniteModel::new(
            vec![1.0, 0.0],
            vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            vec![vec![c, 7.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let flow = exact_flow(&m).unwrap();
        assert_close(flow[1].eta.probs(), &[0.0, 1.0], 0.0);
        assert!((flow[1].gamma() - c).abs() < 1e-14);
        assert_eq!(flow[0].log_gamma, 0.0);
    }

    #[test]
    fn unit_potentials_give_markov_marginals() {
        let m1 = vec![vec![0.9, 0.1], vec![0.3, 0.7]];
        let m2 = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
        let m = FiniteModel::new(
            vec![0.6, 0.4],
            vec![m1.clone(), m2.clone()],
            vec![vec![1.0, 1.0]; 3],
        )
        .unwrap();
        let flow = exact_flow(&m).unwrap();
        let eta1 = [0.6 * 0.9 + 0.4 * 0.3, 0.6 * 0.1 + 0.4 * 0.7];
        let eta2 = [eta1[0] * 0.5 + eta1[1] * 0.2, eta1[0] * 0.5 + eta1[1] * 0.8];
        assert_close(flow[1].eta.probs(), &eta1, 1e-15);
        assert_close(flow[2].eta.probs(), &eta2, 1e-15);
        assert!(flow.iter().all(|s| s.log_gamma.abs() < 1e-15));
        // Q reduces to products of M
        let q = q_kernel(&m, 0, 2).unwrap();
        let direct = KernelMatrix::from_rows(&m1, 0, 1).compose(&KernelMatrix::from_rows(&m2, 1, 2));
        assert!(q.max_abs_diff(&direct) < 1e-15);
        assert_close(&q.row_sums(), &[1.0, 1.0], 1e-15);
    }

    #[test]
    fn extinction_is_reported() {
        let m = FiniteModel::new(
            vec![1.0, 0.0],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(exact_flow(&m), Err(Error::Extinction { step: 0 }));
    }

    #[test]
    fn q_kernel_conventions() {
        let m = FiniteModel::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.9, 0.1], vec![0.3, 0.7]]; 2],
            vec![vec![2.0, 0.5], vec![1.0, 3.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(q_kernel(&m, 1, 1).unwrap(), KernelMatrix::identity(2, 1));
        assert_eq!(q_kernel(&m, 2, 1), Err(Error::IndexOrder { p: 2, n: 1 }));
        // Q_{0,2} = diag(g0) M1 diag(g1) M2, computed by hand
        let m1 = [[0.9, 0.1], [0.3, 0.7]];
        let g0 = [2.0, 0.5];
        let g1 = [1.0, 3.0];
        let q = q_kernel(&m, 0, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += g0[i] * m1[i][k] * g1[k] * m1[k][j];
                }
                assert!((q.get(i, j) - s).abs() < 1e-14);
            }
        }
        let flow = exact_flow(&m).unwrap();
        let qb = qbar_kernel(&m, &flow, 2, 2).unwrap();
        assert_eq!(qb, KernelMatrix::identity(2, 2));
    }

    #[test]
    fn qbar_with_constant_potentials_has_unit_mass() {
        let m = FiniteModel::new(
            vec![0.2, 0.8],
            vec![vec![vec![0.6, 0.4], vec![0.1, 0.9]]; 3],
            vec![vec![1.7, 1.7]; 4],
        )
        .unwrap();
        let flow = exact_flow(&m).unwrap();
        for p in 0..=3 {
            let qb = qbar_kernel(&m, &flow, p, 3).unwrap();
            assert_close(&qb.row_sums(), &[1.0, 1.0], 1e-14);
        }
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            FiniteModel::new(vec![0.5, 0.6], vec![], vec![vec![1.0, 1.0]]),
            Err(Error::InvalidTables(_))
        ));
        assert!(matches!(
            FiniteModel::new(vec![0.5, 0.5], vec![vec![vec![0.5, 0.6], vec![0.5, 0.5]]], vec![vec![1.0, 1.0]; 2]),
            Err(Error::InvalidTables(_))
        ));
        assert!(matches!(
            FiniteModel::new(vec![0.5, 0.5], vec![], vec![vec![-1.0, 1.0]]),
            Err(Error::InvalidTables(_))
        ));
        assert!(matches!(
            FiniteModel::new(vec![0.5, 0.5], vec![], vec![]),
            Err(Error::InvalidTables(_))
        ));
    }
}
