//! Invariant checks that go beyond the per-module unit tests: analytic
//! bounds on the statistic means, soundness of the early-reject argument,
//! goodness-of-fit for the samplers, and the estimation-layer properties.

mod common;

use common::{random_dist, random_sparse_dist, Moments};
use disttest::distances::{self, Restriction};
use disttest::distributions::{
    derive_seed, mix_uniform, rng_from_seed, sample_poisson, DiscreteDistribution, MixWeight,
    Sampler,
};
use disttest::equivalence::expected_z;
use disttest::estimation::{estimate_tv_plugin, learn_l2, meta_decision};
use disttest::harness::{run_experiment, ExperimentConfig, Tester};
use disttest::identity::{expected_zprime, light_set, Decision, IdentityConfig};
use disttest::instances::{chi2_reduction, hellinger_far_blocks, paninski_pair, InstanceFamily};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEED: u64 = 77;

/// Chi-square goodness-of-fit of observed counts against expected counts.
/// Bins with expected count below 5 are pooled into the previous bin.
fn chi_square_gof(observed: &[f64], expected: &[f64], significance: f64) -> (f64, f64) {
    let mut obs_pooled = Vec::new();
    let mut exp_pooled = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            obs_pooled.push(o_acc);
            exp_pooled.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        match exp_pooled.last_mut() {
            Some(last) => {
                *last += e_acc;
                *obs_pooled.last_mut().unwrap() += o_acc;
            }
            None => {
                exp_pooled.push(e_acc);
                obs_pooled.push(o_acc);
            }
        }
    }
    let stat: f64 = obs_pooled
        .iter()
        .zip(&exp_pooled)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = (exp_pooled.len() - 1).max(1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(1.0 - significance);
    (stat, critical)
}

#[test]
fn poissonized_counts_are_marginally_poisson() {
    // 1e5 Poissonized draws; each cell's count histogram must fit the
    // Poisson pmf at significance 1e-3.
    let dist = DiscreteDistribution::new(vec![0.3, 0.7]).unwrap();
    let m = 10u64;
    let trials = 100_000u64;
    let max_count = 40usize;
    let mut histograms = vec![vec![0u64; max_count + 1]; 2];
    for t in 0..trials {
        let h = sample_poisson(&dist, m, derive_seed(SEED, t)).unwrap();
        for cell in 0..2 {
            histograms[cell][(h.count(cell) as usize).min(max_count)] += 1;
        }
    }
    for (cell, observed_counts) in histograms.iter().enumerate() {
        let lambda = m as f64 * dist.prob(cell);
        // Poisson pmf, computed iteratively; the final bin absorbs the tail.
        let mut pmf = vec![0.0; max_count + 1];
        pmf[0] = (-lambda).exp();
        for j in 1..=max_count {
            pmf[j] = pmf[j - 1] * lambda / j as f64;
        }
        let total: f64 = pmf.iter().sum();
        pmf[max_count] += 1.0 - total;
        let expected: Vec<f64> = pmf.iter().map(|p| p * trials as f64).collect();
        let observed: Vec<f64> = observed_counts.iter().map(|&c| c as f64).collect();
        let (stat, critical) = chi_square_gof(&observed, &expected, 1e-3);
        assert!(
            stat <= critical,
            "cell {cell}: chi2 {stat:.2} above critical {critical:.2}"
        );
    }
}

#[test]
fn far_instances_separate_the_mean() {
    // Whenever the light set is empty and Hellinger(p, q) = eps, the
    // analytic mean of Z' is at least (2 - c1 - c2) m2 eps^2.
    let mut rng = rng_from_seed(SEED + 1);
    let mut checked = 0;
    for _ in 0..2000 {
        let n = rng.random_range(10..100usize);
        let q = mix_uniform(&random_dist(&mut rng, n, 0.0), MixWeight::new(0.2).unwrap());
        let p = random_sparse_dist(&mut rng, n);
        let h = distances::hellinger_dist(&p, &q).unwrap();
        let eps = h.min(1.0);
        if eps < 0.05 {
            continue;
        }
        let cfg = IdentityConfig::new(eps).unwrap();
        assert!(light_set(&q, &cfg).is_empty());
        let m2 = cfg.m2(n);
        let heavy: Vec<usize> = (0..n).collect();
        let mean = expected_zprime(&p, &q, m2, &heavy);
        let bound = (2.0 - cfg.c1 - cfg.c2) * m2 as f64 * eps * eps;
        assert!(
            mean >= bound - 1e-9,
            "mean {mean} below separation bound {bound} (n = {n}, eps = {eps})"
        );
        checked += 1;
    }
    assert!(checked >= 1000, "only {checked} instances checked");
}

#[test]
fn early_reject_is_sound() {
    // Any p putting at least (c2/2) eps^2 mass on the light set of q is
    // chi-squared-far from q, so the preliminary rejection never wrongs a
    // close p.
    let mut rng = rng_from_seed(SEED + 2);
    for trial in 0..1000 {
        let n = rng.random_range(20..200usize);
        let eps = 0.1 + 0.9 * rng.random::<f64>();
        let cfg = IdentityConfig::new(eps).unwrap();
        let light_count = n / 4;
        let e2 = eps * eps;

        // q: light coordinates share a sliver well under the pruning
        // threshold; the rest is roughly uniform.
        let q_light_total = cfg.c1 * e2 * 0.2 * rng.random::<f64>();
        let mut qv = vec![0.0; n];
        qv[..light_count].fill(q_light_total / light_count as f64);
        qv[light_count..].fill((1.0 - q_light_total) / (n - light_count) as f64);
        // p: at least (c2/2) eps^2 mass on those light coordinates.
        let p_light_total = (0.5 + 0.5 * rng.random::<f64>()) * cfg.c2 * e2;
        let mut pv = vec![0.0; n];
        pv[..light_count].fill(p_light_total / light_count as f64);
        pv[light_count..].fill((1.0 - p_light_total) / (n - light_count) as f64);

        let q = DiscreteDistribution::new(qv).unwrap();
        let p = DiscreteDistribution::new(pv).unwrap();
        let light = light_set(&q, &cfg);
        assert_eq!(light.len(), light_count, "trial {trial}");
        assert!(p.mass_on(&light) >= cfg.c2 / 2.0 * e2 - 1e-12);

        let chi = distances::chi2_dist(&p, &q).unwrap();
        assert!(chi > e2, "chi2 {chi} not above eps^2 {e2} at trial {trial}");
    }
}

#[test]
fn expected_z_upper_bounds() {
    // E[Z_A] <= (m / delta) l2^2(p_A, q_A) when p_i + q_i >= delta on A,
    // and E[Z] <= m^2 l2^2(p, q) unconditionally.
    let mut rng = rng_from_seed(SEED + 3);
    for _ in 0..1000 {
        let n = rng.random_range(5..50usize);
        let m = rng.random_range(5..2000u64);
        let p = random_dist(&mut rng, n, 0.01);
        let q = random_dist(&mut rng, n, 0.01);
        let a: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if a.is_empty() {
            continue;
        }
        let delta = a
            .iter()
            .map(|&i| p.prob(i) + q.prob(i))
            .fold(f64::INFINITY, f64::min);
        let r = Restriction::of(&p, &q, &a).unwrap();
        let l2a = distances::l2(&r);
        let mean_a = expected_z(&p, &q, m, &a);
        assert!(
            mean_a <= m as f64 / delta * l2a * l2a + 1e-9,
            "well-conditioned upper bound violated"
        );

        let full: Vec<usize> = (0..n).collect();
        let mean = expected_z(&p, &q, m, &full);
        let l2 = distances::l2_dist(&p, &q).unwrap();
        let mf = m as f64;
        assert!(
            mean <= mf * mf * l2 * l2 + 1e-9,
            "general upper bound violated"
        );
    }
}

#[test]
fn expected_z_lower_bounds() {
    // E[Z_A] >= (2m/3) Hellinger^2(p_A, q_A) on the busy set, and the TV
    // lower bound holds on arbitrary sets.
    let mut rng = rng_from_seed(SEED + 4);
    let mut busy_checked = 0;
    for _ in 0..1000 {
        let n = rng.random_range(5..50usize);
        let m = rng.random_range(5..2000u64);
        let p = random_sparse_dist(&mut rng, n);
        let q = random_dist(&mut rng, n, 0.0);
        let mf = m as f64;

        let busy: Vec<usize> = (0..n)
            .filter(|&i| mf * (p.prob(i) + q.prob(i)) >= 1.0)
            .collect();
        if !busy.is_empty() {
            let r = Restriction::of(&p, &q, &busy).unwrap();
            let h = distances::hellinger(&r);
            let mean = expected_z(&p, &q, m, &busy);
            assert!(
                mean >= 2.0 * mf / 3.0 * h * h - 1e-9,
                "busy-set Hellinger lower bound violated"
            );
            busy_checked += 1;
        }

        let a: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if a.is_empty() {
            continue;
        }
        let r = Restriction::of(&p, &q, &a).unwrap();
        let tv = distances::tv(&r);
        let mass: f64 = a.iter().map(|&i| p.prob(i) + q.prob(i)).sum();
        let mean = expected_z(&p, &q, m, &a);
        let bound = 4.0 * mf * mf / (2.0 * a.len() as f64 + mf * mass) * tv * tv;
        assert!(mean >= bound - 1e-9, "TV lower bound violated");
    }
    assert!(busy_checked >= 500);
}

#[test]
fn learner_expected_squared_error_bound() {
    // E[l2^2(p-hat, p)] <= 1/m for every p, any support size.
    let mut rng = rng_from_seed(SEED + 5);
    for &n in &[2usize, 10, 100] {
        let p = random_dist(&mut rng, n, 0.0);
        let m = 500u64; // matches learn budget for eps = 0.2, K = 20
        let mut sq = Moments::default();
        for t in 0..10_000u64 {
            let mut s = p.sampler().unwrap();
            let mut trial_rng = rng_from_seed(derive_seed(SEED + 6, t));
            let learned = learn_l2(&mut s, 0.2, 20.0, &mut trial_rng).unwrap();
            let d = distances::l2_dist(&learned, &p).unwrap();
            sq.add(d * d);
        }
        let bound = 1.0 / m as f64;
        assert!(
            sq.mean() <= bound + 4.0 * sq.mean_se(),
            "n = {n}: E[l2^2] = {} above 1/m = {bound}",
            sq.mean()
        );
    }
}

#[test]
fn meta_tester_with_perfect_estimator_is_deterministic() {
    // Injecting the analytic distance as the estimate makes the meta rule
    // always correct under the separation hypotheses.
    let mut rng = rng_from_seed(SEED + 7);
    for trial in 0..1000 {
        let n = 2 * rng.random_range(5..50usize);
        let eps = 0.4 + 0.5 * rng.random::<f64>();
        let eps1 = eps * eps / 4.0;
        if trial % 2 == 0 {
            // Close case: TV at most eps1.
            let a = (eps1 * rng.random::<f64>()).min(0.5);
            let (q, p) = paninski_pair(n, a, derive_seed(SEED, trial)).unwrap();
            let tau = distances::tv_dist(&p, &q).unwrap();
            assert_eq!(meta_decision(tau, eps1), Decision::Accept, "trial {trial}");
        } else {
            // Far case: Hellinger at least eps / sqrt(2), which forces
            // TV > 3 eps1 / 2 through the distance chain.
            let (p, q) =
                hellinger_far_blocks(n, eps / 2.0f64.sqrt(), derive_seed(SEED + 1, trial)).unwrap();
            let tau = distances::tv_dist(&p, &q).unwrap();
            assert!(tau > 1.5 * eps1, "separation hypothesis violated");
            assert_eq!(meta_decision(tau, eps1), Decision::Reject, "trial {trial}");
        }
    }
}

#[test]
fn tv_plugin_is_symmetric_in_distribution() {
    // Swapping the samplers changes nothing statistically: mean estimates
    // and threshold verdict rates agree within Monte Carlo noise.
    let (u, p) = paninski_pair(50, 0.3, 3).unwrap();
    let trials = 400u64;
    let mut forward = Moments::default();
    let mut swapped = Moments::default();
    let (mut acc_f, mut acc_s) = (0u64, 0u64);
    let verdict_threshold = 0.36;
    for t in 0..trials {
        let mut sp = p.sampler().unwrap();
        let mut sq = u.sampler().unwrap();
        let mut rng = rng_from_seed(derive_seed(SEED + 8, t));
        let est = estimate_tv_plugin(&mut sp, &mut sq, 500, &mut rng).unwrap();
        forward.add(est.value);
        acc_f += (est.value <= verdict_threshold) as u64;

        let mut sp = p.sampler().unwrap();
        let mut sq = u.sampler().unwrap();
        let mut rng = rng_from_seed(derive_seed(SEED + 9, t));
        let est = estimate_tv_plugin(&mut sq, &mut sp, 500, &mut rng).unwrap();
        swapped.add(est.value);
        acc_s += (est.value <= verdict_threshold) as u64;
    }
    let se = (forward.mean_se().powi(2) + swapped.mean_se().powi(2)).sqrt();
    assert!(
        (forward.mean() - swapped.mean()).abs() <= 4.0 * se,
        "means differ: {} vs {}",
        forward.mean(),
        swapped.mean()
    );
    let (rf, rs) = (acc_f as f64 / trials as f64, acc_s as f64 / trials as f64);
    let rate_se = (2.0 * 0.25 / trials as f64).sqrt();
    assert!(
        (rf - rs).abs() <= 4.0 * rate_se,
        "verdict rates differ: {rf} vs {rs}"
    );
}

#[test]
fn meta_tester_error_rates() {
    // The TV-close versus Hellinger-far instantiation with the plug-in
    // estimator: both sides at least 90% correct over 200 trials.
    let close_tv = 0.6f64 * 0.6 / 4.0;
    let mut cfg =
        ExperimentConfig::new(Tester::MetaTvHellinger, InstanceFamily::Paninski, 100, 0.6);
    cfg.instance_epsilon = close_tv;
    cfg.trials = 200;
    cfg.seed = SEED;
    let close = run_experiment(&cfg).unwrap();
    assert_eq!(close.expected, Decision::Accept);
    assert!(
        close.accept_rate() >= 0.9,
        "close accept {}",
        close.accept_rate()
    );

    cfg.family = InstanceFamily::HellingerFarBlocks;
    cfg.instance_epsilon = 0.6 / 2.0f64.sqrt();
    let far = run_experiment(&cfg).unwrap();
    assert_eq!(far.expected, Decision::Reject);
    assert!(far.accept_rate() <= 0.1, "far accept {}", far.accept_rate());
}

#[test]
fn reduction_outputs_are_simulatable_by_channel_mixing() {
    // Samples from the reduced p' are distributionally identical to mixing
    // samples from p and q with weights (2/3, 1/3): goodness-of-fit of 1e5
    // channel-mixed draws against the analytic p'.
    let mut rng = rng_from_seed(SEED + 10);
    let p = random_dist(&mut rng, 10, 0.02);
    let q = random_dist(&mut rng, 10, 0.02);
    let (p_prime, _) = chi2_reduction(&p, &q).unwrap();

    let draws = 100_000u64;
    let mut counts = [0u64; 10];
    let mut sp = p.sampler().unwrap();
    let mut sq = q.sampler().unwrap();
    for _ in 0..draws {
        let s = if rng.random::<f64>() < 2.0 / 3.0 {
            sp.draw(&mut rng).unwrap()
        } else {
            sq.draw(&mut rng).unwrap()
        };
        counts[s] += 1;
    }
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let expected: Vec<f64> = p_prime.probs().iter().map(|v| v * draws as f64).collect();
    let (stat, critical) = chi_square_gof(&observed, &expected, 1e-3);
    assert!(
        stat <= critical,
        "chi2 {stat:.2} above critical {critical:.2}"
    );
}

#[test]
fn paninski_scaling_exhibits_hellinger_far_instances() {
    // The scaled perturbation sqrt(2) eps used by the harness really is
    // Hellinger-far at eps for the epsilons the acceptance runs use.
    for &eps in &[0.25, 0.3, 0.35] {
        let (u, p) = paninski_pair(500, 2.0f64.sqrt() * eps, 1).unwrap();
        let h = distances::hellinger_dist(&p, &u).unwrap();
        assert!(h >= eps, "eps = {eps}: hellinger {h}");
    }
}
