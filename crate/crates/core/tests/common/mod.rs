#![allow(dead_code)]

use islandpf::FiniteModel;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_err(xs: &[f64]) -> f64 {
    (sample_var(xs) / xs.len() as f64).sqrt()
}

/// Pearson statistic against expected probabilities; returns the p-value.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * total as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(c, 0, "observed an impossible outcome");
        }
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * (((n + m) as f64) / (n * m) as f64).sqrt()
}

/// `sum over all paths x_0..x_n` of `eta0(x_0) prod_{p<n} g_p(x_p) M_{p+1}(x_p, x_{p+1})`,
/// accumulated per terminal state with an optional final weight `h(x_n)`.
pub fn path_sum(model: &FiniteModel, n: usize, h: &[f64]) -> f64 {
    let d = model.dim();
    let mut total = 0.0;
    let mut path = vec![0usize; n + 1];
    loop {
        let mut w = model.eta0()[path[0]];
        for p in 0..n {
            w *= model.potential_vector(p)[path[p]] * model.transition(p)[path[p]][path[p + 1]];
        }
        total += w * h[path[n]];
        let mut k = 0;
        loop {
            if k > n {
                return total;
            }
            path[k] += 1;
            if path[k] < d {
                break;
            }
            path[k] = 0;
            k += 1;
        }
    }
}

/// Unnormalised marginal `gamma_n(1_{x})` for every terminal state `x`.
pub fn path_gamma_marginal(model: &FiniteModel, n: usize) -> Vec<f64> {
    let d = model.dim();
    (0..d)
        .map(|x| {
            let mut h = vec![0.0; d];
            h[x] = 1.0;
            path_sum(model, n, &h)
        })
        .collect()
}
