//! Discrete distributions over `[n]`, sample access (fixed-budget and
//! Poissonized), empirical distributions, and the uniform-mixing transform.
//!
//! All types are immutable values after construction and all sampling is
//! driven by an explicit seed, so everything here is safe to share across
//! threads and reproducible by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Factor by which a Poissonized draw may exceed its nominal budget before
/// being capped. Poi(m) > 4m has negligible probability at any m we run.
pub const POISSON_CAP_FACTOR: u64 = 4;

/// A probability distribution over the symbols `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from raw masses. Entries must be non-negative
    /// and sum to one within [`NORMALIZATION_TOL`]; inputs inside the
    /// tolerance are renormalized, anything further off is rejected rather
    /// than silently fixed.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "support size must be at least 1".into(),
            ));
        }
        for (i, &p) in probs.iter().enumerate() {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {p}, expected a finite value >= 0"
                )));
            }
        }
        let total: f64 = crate::distances::compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, outside 1 +/- {NORMALIZATION_TOL}"
            )));
        }
        let probs = if total == 1.0 {
            probs
        } else {
            probs.iter().map(|p| p / total).collect()
        };
        Ok(Self { probs })
    }

    /// The uniform distribution over `[n]`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution(
                "support size must be at least 1".into(),
            ));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Support size `n`.
    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// Mass on symbol `i`.
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Total mass on a set of symbols.
    pub fn mass_on(&self, indices: &[usize]) -> f64 {
        crate::distances::compensated_sum(indices.iter().map(|&i| self.probs[i]))
    }

    /// Sample access to this distribution backed by an alias table.
    pub fn sampler(&self) -> Result<AliasSampler> {
        AliasSampler::new(self)
    }
}

/// Per-symbol sample counts: the sufficient statistic for every tester here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
    nominal_m: u64,
}

impl Histogram {
    /// Wraps raw counts drawn with the given nominal budget. The recorded
    /// total always equals the sum of counts.
    pub fn new(counts: Vec<u64>, nominal_m: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter(
                "histogram must cover at least one symbol".into(),
            ));
        }
        if nominal_m == 0 {
            return Err(Error::InvalidParameter(
                "nominal sample budget must be positive".into(),
            ));
        }
        let total = counts.iter().sum();
        Ok(Self {
            counts,
            total,
            nominal_m,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// The budget `m` the draw was configured with (for Poissonized draws
    /// this is the Poisson parameter, not the realized total).
    pub fn nominal_m(&self) -> u64 {
        self.nominal_m
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Iterator over `(symbol, count)` for observed symbols only.
    pub fn observed(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }
}

/// Mixing weight for the uniform-mixing transform, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixWeight {
    delta: f64,
}

impl MixWeight {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "mixing weight {delta} outside [0, 1]"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Sample access to an unknown distribution over `[n]`.
///
/// Implementations may be backed by an explicit distribution, a recorded
/// sample stream, or a transform of another sampler. `draw` is fallible so
/// finite streams can signal exhaustion.
pub trait Sampler {
    /// Support size of the underlying distribution.
    fn n(&self) -> usize;

    /// Draws one symbol.
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize>;
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn n(&self) -> usize {
        (**self).n()
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        (**self).draw(rng)
    }
}

/// Alias-table sampler over an explicit distribution: O(n) setup, O(1) per
/// draw.
#[derive(Debug, Clone)]
pub struct AliasSampler {
    table: WeightedAliasIndex<f64>,
    n: usize,
}

impl AliasSampler {
    pub fn new(dist: &DiscreteDistribution) -> Result<Self> {
        let table = WeightedAliasIndex::new(dist.probs().to_vec()).map_err(|e| {
            Error::InvalidDistribution(format!("alias table rejected weights: {e}"))
        })?;
        Ok(Self { table, n: dist.n() })
    }
}

impl Sampler for AliasSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        Ok(self.table.sample(rng))
    }
}

/// A finite, pre-recorded stream of symbols. Draws fail once the stream is
/// exhausted.
#[derive(Debug, Clone)]
pub struct StreamSampler {
    symbols: Vec<usize>,
    pos: usize,
    n: usize,
}

impl StreamSampler {
    pub fn new(symbols: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidParameter(format!(
                "stream symbol {bad} outside support [0, {n})"
            )));
        }
        Ok(Self { symbols, pos: 0, n })
    }
}

impl Sampler for StreamSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn draw<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Result<usize> {
        match self.symbols.get(self.pos) {
            Some(&s) => {
                self.pos += 1;
                Ok(s)
            }
            None => Err(Error::StreamExhausted(self.pos)),
        }
    }
}

/// Channel realization of the uniform-mixing transform: each draw is
/// replaced by a uniform symbol with probability `delta`, so the output is
/// distributed exactly as `(1-delta) p + delta * uniform`.
#[derive(Debug)]
pub struct MixedSampler<S> {
    inner: S,
    delta: f64,
}

impl<S: Sampler> MixedSampler<S> {
    pub fn new(inner: S, w: MixWeight) -> Self {
        Self {
            inner,
            delta: w.delta(),
        }
    }
}

impl<S: Sampler> Sampler for MixedSampler<S> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        if rng.random::<f64>() < self.delta {
            Ok(rng.random_range(0..self.inner.n()))
        } else {
            self.inner.draw(rng)
        }
    }
}

/// Derives an independent sub-seed from a base seed and an index, so trials
/// can run in parallel while staying reproducible.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a Weyl-sequence offset.
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fresh deterministic RNG for the given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a Poisson(m) sample budget, capped at `POISSON_CAP_FACTOR * m`.
/// Returns the budget and whether the cap fired.
pub fn poisson_budget<R: Rng + ?Sized>(m: u64, rng: &mut R) -> Result<(u64, bool)> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample budget must be positive".into(),
        ));
    }
    let pois = Poisson::new(m as f64)
        .map_err(|e| Error::InvalidParameter(format!("Poisson({m}) rejected: {e}")))?;
    let raw = pois.sample(rng) as u64;
    let cap = POISSON_CAP_FACTOR * m;
    if raw > cap {
        Ok((cap, true))
    } else {
        Ok((raw, false))
    }
}

/// Builds a histogram by drawing `count` symbols from a sampler. The
/// histogram records `nominal_m` as its budget, which may differ from
/// `count` under Poissonized draws.
pub fn histogram_from_sampler<S: Sampler, R: Rng + ?Sized>(
    sampler: &mut S,
    count: u64,
    nominal_m: u64,
    rng: &mut R,
) -> Result<Histogram> {
    let mut counts = vec![0u64; sampler.n()];
    for _ in 0..count {
        counts[sampler.draw(rng)?] += 1;
    }
    Histogram::new(counts, nominal_m)
}

/// Draws exactly `m` multinomial samples from an explicit distribution.
pub fn sample_fixed(dist: &DiscreteDistribution, m: u64, seed: u64) -> Result<Histogram> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample budget must be positive".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut sampler = dist.sampler()?;
    histogram_from_sampler(&mut sampler, m, m, &mut rng)
}

/// Poissonized sampling: each count is an independent Poisson(m * p_i)
/// draw, which is distributionally identical to drawing Poisson(m) samples
/// and tallying them.
pub fn sample_poisson(dist: &DiscreteDistribution, m: u64, seed: u64) -> Result<Histogram> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample budget must be positive".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; dist.n()];
    for (i, &p) in dist.probs().iter().enumerate() {
        if p > 0.0 {
            let lambda = m as f64 * p;
            let pois = Poisson::new(lambda)
                .map_err(|e| Error::InvalidParameter(format!("Poisson({lambda}) rejected: {e}")))?;
            counts[i] = pois.sample(&mut rng) as u64;
        }
    }
    Histogram::new(counts, m)
}

/// Normalizes counts into the empirical distribution.
pub fn empirical(hist: &Histogram) -> Result<DiscreteDistribution> {
    if hist.total() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total = hist.total() as f64;
    DiscreteDistribution::new(hist.counts().iter().map(|&c| c as f64 / total).collect())
}

/// The uniform-mixing transform `(1-delta) p + delta * uniform(n)`, applied
/// analytically. Every output entry is at least `delta / n`.
pub fn mix_uniform(dist: &DiscreteDistribution, w: MixWeight) -> DiscreteDistribution {
    let n = dist.n() as f64;
    let delta = w.delta();
    let probs = dist
        .probs()
        .iter()
        .map(|&p| (1.0 - delta) * p + delta / n)
        .collect();
    DiscreteDistribution { probs }
}
