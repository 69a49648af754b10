//! Estimation-based testing: l2 learning and distance estimation, a plug-in
//! total variation estimator, and a meta-tester that turns any distance
//! estimator plus a separation hypothesis into a tester.

use rand::Rng;

use crate::distances;
use crate::distributions::{
    derive_seed, empirical, histogram_from_sampler, rng_from_seed, DiscreteDistribution, Sampler,
};
use crate::error::{Error, Result};
use crate::identity::{Decision, Stage, TestVerdict};

/// Default constant K in the l2 learner budget ceil(K / eps^2). K = 3
/// already gives failure probability 1/3 by Markov; 20 leaves margin for
/// the composed two-sided estimator.
pub const DEFAULT_LEARN_CONST: f64 = 20.0;

/// Which distance an estimator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Tv,
    L2,
}

/// A distance estimator choice for the meta-tester: the distance it
/// estimates, its additive error target, and its per-stream sample budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub distance_kind: DistanceKind,
    pub additive_error: f64,
    pub sample_budget: u64,
}

impl EstimatorSpec {
    /// l2 estimation via learning both distributions to additive_error/2.
    pub fn l2(additive_error: f64) -> Result<Self> {
        if additive_error <= 0.0 {
            return Err(Error::InvalidParameter(
                "additive error must be positive".into(),
            ));
        }
        let half = additive_error / 2.0;
        let per_stream = (DEFAULT_LEARN_CONST / (half * half)).ceil() as u64;
        Ok(Self {
            distance_kind: DistanceKind::L2,
            additive_error,
            sample_budget: 2 * per_stream,
        })
    }

    /// Plug-in TV estimation on m samples per stream. The additive error is
    /// the caller's claim for the budget; the plug-in error decays like
    /// sqrt(n/m) in expectation.
    pub fn tv_plugin(sample_budget: u64, additive_error: f64) -> Result<Self> {
        if sample_budget == 0 {
            return Err(Error::InvalidParameter(
                "sample budget must be positive".into(),
            ));
        }
        if additive_error <= 0.0 {
            return Err(Error::InvalidParameter(
                "additive error must be positive".into(),
            ));
        }
        Ok(Self {
            distance_kind: DistanceKind::Tv,
            additive_error,
            sample_budget,
        })
    }
}

/// An estimate together with the samples it consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub samples_drawn: u64,
}

/// Learns a distribution to l2 error `epsilon` (with probability at least
/// 2/3) from ceil(learn_const / eps^2) samples; the budget does not depend
/// on the support size.
pub fn learn_l2<S: Sampler, R: Rng + ?Sized>(
    p: &mut S,
    epsilon: f64,
    learn_const: f64,
    rng: &mut R,
) -> Result<DiscreteDistribution> {
    if epsilon <= 0.0 || learn_const <= 0.0 {
        return Err(Error::InvalidParameter(
            "epsilon and learn constant must be positive".into(),
        ));
    }
    let m = learn_budget(epsilon, learn_const);
    let hist = histogram_from_sampler(p, m, m, rng)?;
    empirical(&hist)
}

/// The l2 learner's budget for a given target error.
pub fn learn_budget(epsilon: f64, learn_const: f64) -> u64 {
    (learn_const / (epsilon * epsilon)).ceil() as u64
}

/// Estimates the l2 distance between two sampled distributions to additive
/// `epsilon` (with probability at least 2/3), by learning each side to
/// epsilon/2 and taking the distance between the empiricals.
pub fn estimate_l2_distance<S1: Sampler, S2: Sampler, R: Rng + ?Sized>(
    p: &mut S1,
    q: &mut S2,
    epsilon: f64,
    learn_const: f64,
    rng: &mut R,
) -> Result<Estimate> {
    let half = epsilon / 2.0;
    let p_hat = learn_l2(p, half, learn_const, rng)?;
    let q_hat = learn_l2(q, half, learn_const, rng)?;
    Ok(Estimate {
        value: distances::l2_dist(&p_hat, &q_hat)?,
        samples_drawn: 2 * learn_budget(half, learn_const),
    })
}

/// Plug-in total variation estimate: the TV distance between the two
/// empirical distributions on m samples each.
pub fn estimate_tv_plugin<S1: Sampler, S2: Sampler, R: Rng + ?Sized>(
    p: &mut S1,
    q: &mut S2,
    m: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample budget must be positive".into(),
        ));
    }
    let hp = histogram_from_sampler(p, m, m, rng)?;
    let hq = histogram_from_sampler(q, m, m, rng)?;
    Ok(Estimate {
        value: distances::tv_dist(&empirical(&hp)?, &empirical(&hq)?)?,
        samples_drawn: 2 * m,
    })
}

/// The meta-tester's thresholding rule: accept the close hypothesis iff the
/// estimate is at most 5 eps1 / 4 (inclusive).
pub fn meta_decision(tau_hat: f64, eps1: f64) -> Decision {
    if tau_hat <= 1.25 * eps1 {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Turns a distance estimator into a tester for d_X(p,q) <= eps1 versus
/// d_Y(p,q) >= eps2.
///
/// The caller is responsible for the separation hypothesis
/// (d_Y >= eps2 implies d_X > 3 eps1 / 2); it cannot be verified from
/// samples. The estimator targets d_X at additive error eps1/4, so the
/// verdict inherits its success probability.
pub fn meta_test_from_estimator<S1: Sampler, S2: Sampler>(
    spec: &EstimatorSpec,
    eps1: f64,
    eps2: f64,
    p: &mut S1,
    q: &mut S2,
    seed: u64,
) -> Result<TestVerdict> {
    if eps1 <= 0.0 || eps2 <= 0.0 {
        return Err(Error::InvalidParameter(
            "eps1 and eps2 must be positive".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let estimate = match spec.distance_kind {
        DistanceKind::L2 => estimate_l2_distance(p, q, eps1 / 4.0, DEFAULT_LEARN_CONST, &mut rng)?,
        DistanceKind::Tv => estimate_tv_plugin(p, q, spec.sample_budget, &mut rng)?,
    };
    let threshold = 1.25 * eps1;
    Ok(TestVerdict {
        decision: meta_decision(estimate.value, eps1),
        statistic: estimate.value,
        threshold,
        stage: Stage::Main,
        samples_drawn: estimate.samples_drawn,
        capped: false,
    })
}

/// Median-of-k amplification: runs the estimator k times on derived seeds
/// and returns the median, boosting success 2/3 to near certainty.
pub fn median_of_k<F>(k: usize, seed: u64, mut estimator: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let mut values = Vec::with_capacity(k);
    for i in 0..k {
        values.push(estimator(derive_seed(seed, i as u64))?);
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("estimates must not be NaN"));
    Ok(values[k / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::derive_seed;

    fn dist(v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_mass_learned_exactly() {
        let p = dist(&[0.0, 1.0, 0.0]);
        let mut s = p.sampler().unwrap();
        let mut rng = rng_from_seed(1);
        let learned = learn_l2(&mut s, 0.5, DEFAULT_LEARN_CONST, &mut rng).unwrap();
        assert_eq!(learned.probs(), p.probs());
    }

    #[test]
    fn learn_budget_is_support_independent() {
        assert_eq!(learn_budget(0.1, 20.0), 2000);
        // Same budget regardless of n; the function never sees n.
        let spec = EstimatorSpec::l2(0.1).unwrap();
        assert_eq!(spec.sample_budget, 2 * learn_budget(0.05, 20.0));
    }

    #[test]
    fn learn_l2_hits_target_rate() {
        let p = DiscreteDistribution::uniform(100).unwrap();
        let trials = 200;
        let mut ok = 0;
        for t in 0..trials {
            let mut s = p.sampler().unwrap();
            let mut rng = rng_from_seed(derive_seed(40, t));
            let learned = learn_l2(&mut s, 0.1, 20.0, &mut rng).unwrap();
            if distances::l2_dist(&learned, &p).unwrap() <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.9 * trials as f64, "ok = {ok}");
    }

    #[test]
    fn l2_estimate_near_true_distance() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.0, 1.0]);
        let truth = 2.0f64.sqrt();
        let trials = 200;
        let mut ok = 0;
        for t in 0..trials {
            let mut sp = p.sampler().unwrap();
            let mut sq = q.sampler().unwrap();
            let mut rng = rng_from_seed(derive_seed(41, t));
            let est = estimate_l2_distance(&mut sp, &mut sq, 0.1, 20.0, &mut rng).unwrap();
            if (est.value - truth).abs() <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.9 * trials as f64, "ok = {ok}");
    }

    #[test]
    fn l2_estimate_of_identical_pair_stays_small() {
        let p = DiscreteDistribution::uniform(30).unwrap();
        let trials = 200;
        let mut ok = 0;
        for t in 0..trials {
            let mut sp = p.sampler().unwrap();
            let mut sq = p.sampler().unwrap();
            let mut rng = rng_from_seed(derive_seed(43, t));
            let est = estimate_l2_distance(&mut sp, &mut sq, 0.1, 20.0, &mut rng).unwrap();
            if est.value <= 0.1 {
                ok += 1;
            }
        }
        // The guarantee is 2/3; the composed learner does far better here.
        assert!(3 * ok >= 2 * trials, "ok = {ok}");
    }

    #[test]
    fn tv_plugin_exact_cases() {
        let point = dist(&[1.0, 0.0]);
        let mut sp = point.sampler().unwrap();
        let mut sq = point.sampler().unwrap();
        let mut rng = rng_from_seed(7);
        let est = estimate_tv_plugin(&mut sp, &mut sq, 50, &mut rng).unwrap();
        assert_eq!(est.value, 0.0);

        let q = dist(&[0.0, 1.0]);
        let mut sp = point.sampler().unwrap();
        let mut sq = q.sampler().unwrap();
        let est = estimate_tv_plugin(&mut sp, &mut sq, 1, &mut rng).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn tv_plugin_consistent_on_uniform() {
        let p = DiscreteDistribution::uniform(10).unwrap();
        let trials = 200;
        let mut ok = 0;
        for t in 0..trials {
            let mut sp = p.sampler().unwrap();
            let mut sq = p.sampler().unwrap();
            let mut rng = rng_from_seed(derive_seed(42, t));
            let est = estimate_tv_plugin(&mut sp, &mut sq, 100_000, &mut rng).unwrap();
            if est.value <= 0.05 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.9 * trials as f64, "ok = {ok}");
    }

    #[test]
    fn meta_decision_tie_accepts() {
        assert_eq!(meta_decision(1.25 * 0.4, 0.4), Decision::Accept);
        assert_eq!(meta_decision(1.25 * 0.4 + 1e-12, 0.4), Decision::Reject);
    }

    #[test]
    fn median_amplification_resists_outliers() {
        let mut call = 0u64;
        let est = median_of_k(9, 3, |_| {
            call += 1;
            // Two wild outliers out of nine runs do not move the median.
            Ok(if call.is_multiple_of(4) { 100.0 } else { 0.5 })
        })
        .unwrap();
        assert_eq!(est, 0.5);
    }
}
