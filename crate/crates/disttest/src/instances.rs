//! Constructors for the hard and calibrated instance families the harness
//! runs testers against: paired-perturbation uniformity instances,
//! l2-calibrated near pairs, Hellinger-far block pairs, the KL-untestable
//! pair, and the chi-squared tolerance reduction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::distributions::{rng_from_seed, DiscreteDistribution};
use crate::error::{Error, Result};

/// The instance families the harness understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFamily {
    /// p = q = uniform(n).
    Equal,
    /// Uniform versus the paired +/- perturbation with TV exactly epsilon.
    Paninski,
    /// Uniform versus a two-coordinate shift with l2 exactly the target.
    L2Near,
    /// Disjoint-support block pair with Hellinger at least epsilon.
    HellingerFarBlocks,
    /// q = (1, 0) versus p = (1 - delta, delta): infinite KL, tiny TV.
    KlUntestable,
    /// Paninski instance scaled so the chi-squared divergence is eps^2/4.
    Chi2Close,
}

impl InstanceFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Self::Equal),
            "paninski" => Ok(Self::Paninski),
            "l2-near" => Ok(Self::L2Near),
            "hellinger-far-blocks" => Ok(Self::HellingerFarBlocks),
            "kl-untestable" => Ok(Self::KlUntestable),
            "chi2-close" => Ok(Self::Chi2Close),
            other => Err(Error::Config(format!("unknown instance family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Equal => "equal",
            Self::Paninski => "paninski",
            Self::L2Near => "l2-near",
            Self::HellingerFarBlocks => "hellinger-far-blocks",
            Self::KlUntestable => "kl-untestable",
            Self::Chi2Close => "chi2-close",
        }
    }
}

/// A fully specified instance: family plus its parameters. `build` returns
/// the pair `(q, p)` with the reference distribution first; identity testers
/// receive q explicitly and sample from p.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub family: InstanceFamily,
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
        match self.family {
            InstanceFamily::Equal => {
                let u = DiscreteDistribution::uniform(self.n)?;
                Ok((u.clone(), u))
            }
            InstanceFamily::Paninski => paninski_pair(self.n, self.epsilon, self.seed),
            InstanceFamily::L2Near => l2_near_pair(self.n, self.epsilon, self.seed),
            InstanceFamily::HellingerFarBlocks => {
                let (p, q) = hellinger_far_blocks(self.n, self.epsilon, self.seed)?;
                Ok((q, p))
            }
            InstanceFamily::KlUntestable => kl_untestable_pair(self.epsilon),
            InstanceFamily::Chi2Close => paninski_pair(self.n, self.epsilon / 4.0, self.seed),
        }
    }
}

/// Uniform over [n] versus the classic paired perturbation: coordinates are
/// grouped in adjacent pairs and each pair gets masses (1 +/- 2 eps)/n in a
/// random order, so the TV distance to uniform is exactly eps.
/// Returns (uniform, perturbed).
pub fn paninski_pair(
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "support size {n} must be positive and even"
        )));
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "perturbation {epsilon} outside [0, 1/2]"
        )));
    }
    let uniform = DiscreteDistribution::uniform(n)?;
    let mut rng = rng_from_seed(seed);
    let base = 1.0 / n as f64;
    let bump = 2.0 * epsilon / n as f64;
    let mut probs = vec![0.0; n];
    for pair in 0..n / 2 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        probs[2 * pair] = base + sign * bump;
        probs[2 * pair + 1] = base - sign * bump;
    }
    Ok((uniform, DiscreteDistribution::new(probs)?))
}

/// The untestable pair: q = (1, 0) and p = (1 - delta, delta). Their KL
/// divergence is infinite while TV is only delta, and no finite-sample test
/// can see the difference once delta is small.
pub fn kl_untestable_pair(delta: f64) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 1)"
        )));
    }
    let q = DiscreteDistribution::new(vec![1.0, 0.0])?;
    let p = DiscreteDistribution::new(vec![1.0 - delta, delta])?;
    Ok((q, p))
}

/// The tolerance reduction p' = (2/3) p + (1/3) q, q' = (1/3) p + (2/3) q.
/// The outputs satisfy p'_i <= 2 q'_i everywhere, TV shrinks by exactly a
/// third, and chi2(p', q') <= 12 * Hellinger^2(p', q').
pub fn chi2_reduction(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if p.n() != q.n() {
        return Err(Error::MismatchedSupport(p.n(), q.n()));
    }
    let two_thirds = 2.0 / 3.0;
    let third = 1.0 / 3.0;
    let p_probs: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&pi, &qi)| two_thirds * pi + third * qi)
        .collect();
    let q_probs: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&pi, &qi)| third * pi + two_thirds * qi)
        .collect();
    Ok((
        DiscreteDistribution::new(p_probs)?,
        DiscreteDistribution::new(q_probs)?,
    ))
}

/// Uniform over [n] versus uniform with mass shifted between coordinate
/// pairs, giving l2 distance exactly the target. A single pair shifted by
/// target/sqrt(2) is used whenever that keeps entries non-negative; larger
/// targets spread the same l2 budget over the fewest pairs that fit, with
/// per-coordinate shift target/sqrt(2k). Returns (uniform, shifted).
pub fn l2_near_pair(
    n: usize,
    target_l2: f64,
    seed: u64,
) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "need support size at least 2".into(),
        ));
    }
    if target_l2 < 0.0 {
        return Err(Error::InvalidParameter("target must be >= 0".into()));
    }
    let uniform = DiscreteDistribution::uniform(n)?;
    if target_l2 == 0.0 {
        return Ok((uniform.clone(), uniform));
    }
    let base = 1.0 / n as f64;
    // Smallest k with target / sqrt(2k) <= 1/n.
    let pairs = ((target_l2 / base).powi(2) / 2.0).ceil().max(1.0) as usize;
    if 2 * pairs > n {
        return Err(Error::InvalidParameter(format!(
            "target {target_l2} cannot be realized on uniform({n}) (max 1/sqrt(n) = {})",
            1.0 / (n as f64).sqrt()
        )));
    }
    let shift = target_l2 / (2.0 * pairs as f64).sqrt();

    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut probs = uniform.probs().to_vec();
    for pair in 0..pairs {
        probs[order[2 * pair]] += shift;
        let down = &mut probs[order[2 * pair + 1]];
        *down -= shift;
        // shift <= 1/n by construction; absorb rounding dust only.
        if *down < 0.0 && *down > -1e-15 {
            *down = 0.0;
        }
    }
    Ok((uniform, DiscreteDistribution::new(probs)?))
}

/// A pair that is Hellinger-far by construction: both distributions place
/// mass 2 eps^2 on disjoint random blocks and share the remaining mass
/// uniformly, so squared Hellinger is exactly 2 eps^2 and the distance is
/// at least eps.
pub fn hellinger_far_blocks(
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if !(0.0..=1.0).contains(&epsilon) || 2.0 * epsilon * epsilon > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "need 2 eps^2 <= 1, got eps = {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        let u = DiscreteDistribution::uniform(n)?;
        return Ok((u.clone(), u));
    }
    let moved = (2.0 * epsilon * epsilon).min(1.0);
    let block = (n / 10).max(1);
    let shared = n.checked_sub(2 * block).ok_or_else(|| {
        Error::InvalidParameter(format!("support size {n} too small for two blocks"))
    })?;
    if shared == 0 && moved < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "support size {n} leaves no room for the shared mass"
        )));
    }

    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let p_block = &order[..block];
    let q_block = &order[block..2 * block];
    let rest = &order[2 * block..];

    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for &i in p_block {
        p[i] = moved / block as f64;
    }
    for &i in q_block {
        q[i] = moved / block as f64;
    }
    if shared > 0 {
        let fill = (1.0 - moved) / shared as f64;
        for &i in rest {
            p[i] = fill;
            q[i] = fill;
        }
    }
    Ok((DiscreteDistribution::new(p)?, DiscreteDistribution::new(q)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances;
    use crate::distributions::derive_seed;

    #[test]
    fn paninski_examples() {
        let (u, p) = paninski_pair(2, 0.25, 9).unwrap();
        assert_eq!(u.probs(), &[0.5, 0.5]);
        let probs = p.probs();
        assert!(probs == [0.75, 0.25] || probs == [0.25, 0.75]);
        assert!((distances::tv_dist(&u, &p).unwrap() - 0.25).abs() < 1e-15);

        let (u, p) = paninski_pair(10, 0.0, 1).unwrap();
        assert_eq!(u.probs(), p.probs());

        assert!(paninski_pair(3, 0.1, 0).is_err());
        assert!(paninski_pair(4, 0.6, 0).is_err());
    }

    #[test]
    fn paninski_tv_is_exact() {
        let mut rng = rng_from_seed(17);
        for t in 0..1000u64 {
            let n = 2 * rng.random_range(1..200usize);
            let eps = 0.5 * rng.random::<f64>();
            let (u, p) = paninski_pair(n, eps, derive_seed(100, t)).unwrap();
            let tv = distances::tv_dist(&u, &p).unwrap();
            assert!((tv - eps).abs() < 1e-12, "n={n} eps={eps} tv={tv}");
        }
    }

    #[test]
    fn kl_untestable_examples() {
        let (q, p) = kl_untestable_pair(0.1).unwrap();
        assert_eq!(distances::kl_dist(&p, &q).unwrap(), f64::INFINITY);
        assert!((distances::tv_dist(&p, &q).unwrap() - 0.1).abs() < 1e-15);
        assert!(kl_untestable_pair(0.0).is_err());
        assert!(kl_untestable_pair(1.0).is_err());

        // With m = 10 and delta = 1e-4 the second symbol effectively never
        // appears: (1 - delta)^10 >= 0.999.
        let stay = (1.0f64 - 1e-4).powi(10);
        assert!(stay >= 0.999);
    }

    #[test]
    fn chi2_reduction_examples() {
        let p = DiscreteDistribution::new(vec![1.0, 0.0]).unwrap();
        let q = DiscreteDistribution::new(vec![0.0, 1.0]).unwrap();
        let (pp, qq) = chi2_reduction(&p, &q).unwrap();
        assert!((pp.prob(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((pp.prob(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((qq.prob(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((distances::tv_dist(&pp, &qq).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let (pp, qq) = chi2_reduction(&p, &p).unwrap();
        assert_eq!(pp.probs(), p.probs());
        assert_eq!(qq.probs(), p.probs());
    }

    #[test]
    fn chi2_reduction_ratio_bound() {
        let mut rng = rng_from_seed(23);
        for _ in 0..1000 {
            let n = rng.random_range(2..30usize);
            let mut pv: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut qv: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (sp, sq): (f64, f64) = (pv.iter().sum(), qv.iter().sum());
            pv.iter_mut().for_each(|v| *v /= sp);
            qv.iter_mut().for_each(|v| *v /= sq);
            let p = DiscreteDistribution::new(pv).unwrap();
            let q = DiscreteDistribution::new(qv).unwrap();
            let (pp, qq) = chi2_reduction(&p, &q).unwrap();
            for i in 0..n {
                assert!(pp.prob(i) <= 2.0 * qq.prob(i) + 1e-15);
            }
        }
    }

    #[test]
    fn l2_near_examples() {
        let (u, p) = l2_near_pair(4, 0.0, 5).unwrap();
        assert_eq!(u.probs(), p.probs());

        let (u, p) = l2_near_pair(4, 0.1, 5).unwrap();
        let l2 = distances::l2_dist(&u, &p).unwrap();
        assert!((l2 - 0.1).abs() < 1e-12);
        let tv = distances::tv_dist(&u, &p).unwrap();
        assert!((tv - 0.1 / 2.0f64.sqrt()).abs() < 1e-12);

        // Targets past 1/sqrt(n) cannot keep entries non-negative.
        assert!(l2_near_pair(4, 0.50001, 5).is_err());
        assert!(l2_near_pair(4, 0.5, 5).is_ok());
    }

    #[test]
    fn l2_near_spreads_large_targets() {
        // A target beyond the single-pair limit sqrt(2)/n spreads over more
        // pairs and still realizes the distance exactly.
        let n = 500;
        let target = 0.3 / (2.0 * (n as f64).sqrt());
        let (u, p) = l2_near_pair(n, target, 7).unwrap();
        let l2 = distances::l2_dist(&u, &p).unwrap();
        assert!((l2 - target).abs() < 1e-12, "{l2} vs {target}");
        assert!(p.probs().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn blocks_are_hellinger_far() {
        let mut rng = rng_from_seed(31);
        for t in 0..1000u64 {
            let n = rng.random_range(4..400usize);
            let eps = rng.random::<f64>() * (0.5f64).sqrt();
            let (p, q) = hellinger_far_blocks(n, eps, derive_seed(200, t)).unwrap();
            let h = distances::hellinger_dist(&p, &q).unwrap();
            assert!(h >= eps - 1e-12, "n={n} eps={eps} h={h}");
        }
    }

    #[test]
    fn blocks_full_disjoint_at_max_eps() {
        // 2 eps^2 = 1 moves all mass into the disjoint blocks.
        let eps = (0.5f64).sqrt();
        let (p, q) = hellinger_far_blocks(40, eps, 3).unwrap();
        let overlap: f64 = p
            .probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| a.min(*b))
            .sum();
        assert_eq!(overlap, 0.0);
        let h = distances::hellinger_dist(&p, &q).unwrap();
        assert!(h >= eps);
    }
}
