//! Statistical checks of the single-island selection/mutation kernels.

mod common;

use common::{chi_square_p, mean, sample_var, std_err};
use islandpf::fk::exact_flow;
use islandpf::models::random_finite_hmm;
use islandpf::particle::{
    advance, local_error, multinomial_select, step_bootstrap, step_epsilon, step_ess,
};
use islandpf::rng::stream;
use islandpf::{FeynmanKac, FiniteModel, Population, WithinScheme};

/// `d` states, identity transitions, fixed potentials at every step.
fn frozen_model(g: Vec<f64>, n: usize) -> FiniteModel {
    let d = g.len();
    let identity: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    FiniteModel::new(vec![1.0 / d as f64; d], vec![identity; n], vec![g; n + 1]).unwrap()
}

#[test]
fn multinomial_uniform_frequencies() {
    let mut rng = stream(1, &[]);
    let draws = multinomial_select(&[1.0; 6], 1_000_000, &mut rng).unwrap();
    let mut counts = [0u64; 6];
    for a in draws {
        counts[a] += 1;
    }
    assert!(chi_square_p(&counts, &[1.0 / 6.0; 6]) > 1e-4);
}

#[test]
fn multinomial_proportional_frequencies() {
    let w = [0.5, 2.0, 0.0, 1.5];
    let mut rng = stream(2, &[]);
    let mut counts = [0u64; 4];
    for a in multinomial_select(&w, 400_000, &mut rng).unwrap() {
        counts[a] += 1;
    }
    assert!(chi_square_p(&counts, &[0.125, 0.5, 0.0, 0.375]) > 1e-4);
}

#[test]
fn constant_potential_bootstrap_ancestors_are_uniform() {
    let d = 10;
    let model = frozen_model(vec![0.7; d], 1);
    let n1 = 100_000;
    let states: Vec<usize> = (0..n1).map(|i| i % d).collect();
    let mut pop = Population::unit(states, 0).unwrap();
    step_bootstrap(&mut pop, &model, &mut stream(3, &[])).unwrap();
    let mut counts = vec![0u64; d];
    for &x in pop.states() {
        counts[x] += 1;
    }
    assert!(chi_square_p(&counts, &vec![0.1; d]) > 1e-4);
}

/// Exact law of `(x1', x2')` under epsilon-bootstrap selection with identity
/// mutation: each particle stays with probability `eps g(x_i)`, otherwise it
/// is drawn from `Psi_g(eta_hat)`.
fn epsilon_pair_law(states: [usize; 2], g: &[f64], eps: f64) -> [f64; 4] {
    let mass: f64 = states.iter().map(|&x| g[x]).sum();
    let psi = |y: usize| states.iter().filter(|&&x| x == y).map(|&x| g[x]).sum::<f64>() / mass;
    let marginal = |x: usize, y: usize| {
        let keep = eps * g[x];
        keep * if x == y { 1.0 } else { 0.0 } + (1.0 - keep) * psi(y)
    };
    let mut law = [0.0; 4];
    for y1 in 0..2 {
        for y2 in 0..2 {
            law[2 * y1 + y2] = marginal(states[0], y1) * marginal(states[1], y2);
        }
    }
    law
}

#[test]
fn epsilon_pair_laws_match_enumeration() {
    let g = vec![0.4, 1.6];
    let model = frozen_model(g.clone(), 1);
    let reps = 100_000;
    for &eps in &[0.0, 0.3, 0.625] {
        for start in [[0usize, 1usize], [1, 0], [1, 1]] {
            let law = epsilon_pair_law(start, &g, eps);
            let mut eps_counts = [0u64; 4];
            let mut boot_counts = [0u64; 4];
            let mut rng = stream(4, &[(eps * 1000.0) as u64, start[0] as u64, start[1] as u64]);
            for _ in 0..reps {
                let mut pop = Population::unit(start.to_vec(), 0).unwrap();
                step_epsilon(&mut pop, &model, eps, &mut rng).unwrap();
                eps_counts[2 * pop.states()[0] + pop.states()[1]] += 1;
                if eps == 0.0 {
                    let mut pop = Population::unit(start.to_vec(), 0).unwrap();
                    step_bootstrap(&mut pop, &model, &mut rng).unwrap();
                    boot_counts[2 * pop.states()[0] + pop.states()[1]] += 1;
                }
            }
            assert!(chi_square_p(&eps_counts, &law) > 1e-4, "eps={eps} start={start:?}");
            if eps == 0.0 {
                assert!(chi_square_p(&boot_counts, &law) > 1e-4);
            }
        }
    }
}

fn conditional_mean_check(scheme: &WithinScheme, weights: Option<Vec<f64>>) {
    let model = random_finite_hmm(3, 3, 42).unwrap();
    let n1 = 10_000;
    let mut rng = stream(5, &[]);
    let mut base = Population::initial(&model, n1, &mut rng).unwrap();
    step_bootstrap(&mut base, &model, &mut rng).unwrap();
    if let Some(w) = weights {
        base = Population::from_parts(base.states().to_vec(), w, base.step()).unwrap();
    }
    let f = [0.3, -1.0, 2.5];
    let p = base.step();
    let g = model.potential_vector(p);
    let mf = model.transition_apply(p, &f);
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &w) in base.states().iter().zip(base.weights()) {
        num += w * g[x] * mf[x];
        den += w * g[x];
    }
    let target = num / den;
    let estimates: Vec<f64> = (0..1000)
        .map(|r| {
            let mut pop = base.clone();
            advance(&mut pop, &model, scheme, &mut stream(6, &[r])).unwrap();
            pop.weighted_mean(|&x| f[x]).unwrap()
        })
        .collect();
    let z = (mean(&estimates) - target) / std_err(&estimates);
    assert!(z.abs() < 4.0, "{scheme:?}: z = {z}");
}

#[test]
fn bootstrap_conditional_mean_is_the_transported_measure() {
    conditional_mean_check(&WithinScheme::Bootstrap, None);
}

#[test]
fn epsilon_conditional_mean_is_the_transported_measure() {
    use islandpf::EpsilonPolicy;
    conditional_mean_check(&WithinScheme::EpsilonBootstrap(EpsilonPolicy::SupNormInverse), None);
    conditional_mean_check(&WithinScheme::EpsilonBootstrap(EpsilonPolicy::FixedSchedule(vec![0.4])), None);
}

#[test]
fn ess_conditional_mean_is_the_transported_measure() {
    let w: Vec<f64> = (0..10_000).map(|i| 0.5 + (i % 7) as f64 * 0.25).collect();
    // keeps the weights
    conditional_mean_check(&WithinScheme::AdaptiveEss { alpha: 0.1 }, Some(w.clone()));
    // forces a resample
    conditional_mean_check(&WithinScheme::AdaptiveEss { alpha: 0.9999 }, Some(w));
}

#[test]
fn ess_weights_reset_exactly_after_resampling() {
    let model = random_finite_hmm(3, 2, 8).unwrap();
    let mut rng = stream(9, &[]);
    let mut pop = Population::initial(&model, 50, &mut rng).unwrap();
    let out = step_ess(&mut pop, &model, 0.99999, &mut rng).unwrap();
    if out.resampled {
        assert!(pop.weights().iter().all(|&w| w == 1.0));
    }
    let out = step_ess(&mut pop, &model, 1e-9, &mut rng).unwrap();
    assert!(!out.resampled);
    assert!(!pop.has_unit_weights());
}

#[test]
fn local_error_moments_for_bootstrap() {
    let model = random_finite_hmm(3, 3, 11).unwrap();
    let flow = exact_flow(&model).unwrap();
    let f = [1.0, -0.5, 2.0];
    let p = 2;
    let eta = flow[p].eta.probs();
    let m: f64 = eta.iter().zip(&f).map(|(e, v)| e * v).sum();
    let target: f64 = eta.iter().zip(&f).map(|(e, v)| e * (v - m) * (v - m)).sum();
    let n1 = 10_000;
    let errs: Vec<f64> = (0..4000u64)
        .map(|r| {
            let mut rng = stream(12, &[r]);
            let mut pop = Population::initial(&model, n1, &mut rng).unwrap();
            step_bootstrap(&mut pop, &model, &mut rng).unwrap();
            let prev = pop.clone();
            step_bootstrap(&mut pop, &model, &mut rng).unwrap();
            local_error(&pop, &prev, &model, &|&x: &usize| f[x]).unwrap()
        })
        .collect();
    assert!((mean(&errs) / std_err(&errs)).abs() < 4.0);
    let v = sample_var(&errs);
    assert!((v / target - 1.0).abs() < 0.1, "{v} vs {target}");
}

#[test]
fn potentials_respect_declared_bounds() {
    let model = random_finite_hmm(3, 4, 3).unwrap();
    for p in 0..=4 {
        let b = model.sup_bound(p).unwrap();
        assert!(model.potential_vector(p).iter().all(|&g| g > 0.0 && g <= b));
    }
}
