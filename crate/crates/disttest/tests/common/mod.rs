//! Shared helpers for the integration suites: random instance generation,
//! naive reference implementations used as independent oracles, and small
//! statistics utilities.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use disttest::distributions::{DiscreteDistribution, Histogram};

/// A random distribution over [n], optionally floored away from zero.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DiscreteDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + floor).collect();
    let total: f64 = raw.iter().sum();
    DiscreteDistribution::new(raw.iter().map(|v| v / total).collect()).unwrap()
}

/// A random distribution with a sparsity pattern: roughly half the entries
/// forced to zero (useful for exercising infinite KL/chi2 paths).
pub fn random_sparse_dist(rng: &mut ChaCha8Rng, n: usize) -> DiscreteDistribution {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<bool>() {
                    rng.random::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 1e-3 {
            return DiscreteDistribution::new(raw.iter().map(|v| v / total).collect()).unwrap();
        }
    }
}

/// Naive reference implementations of the distances, kept deliberately
/// independent of the library's compensated versions.
pub mod naive {
    pub fn tv(p: &[f64], q: &[f64]) -> f64 {
        0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn kl(p: &[f64], q: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (&a, &b) in p.iter().zip(q) {
            if a == 0.0 {
                continue;
            }
            if b == 0.0 {
                return f64::INFINITY;
            }
            sum += a * (a / b).ln();
        }
        sum
    }

    pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
        let s: f64 = p
            .iter()
            .zip(q)
            .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
            .sum();
        (0.5 * s).sqrt()
    }

    pub fn chi2(p: &[f64], q: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (&a, &b) in p.iter().zip(q) {
            if b == 0.0 {
                if a > 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            sum += (a - b).powi(2) / b;
        }
        sum
    }

    pub fn l2(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn triangle(p: &[f64], q: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (&a, &b) in p.iter().zip(q) {
            if a + b == 0.0 {
                continue;
            }
            sum += (a - b).powi(2) / (a + b);
        }
        sum
    }
}

/// Naive Z' over an explicit index set: sum of ((N_i - m q_i)^2 - N_i) /
/// (m q_i).
pub fn naive_zprime(hist: &Histogram, q: &DiscreteDistribution, m: u64, a: &[usize]) -> f64 {
    let mf = m as f64;
    a.iter()
        .map(|&i| {
            let ni = hist.count(i) as f64;
            let dev = ni - mf * q.prob(i);
            (dev * dev - ni) / (mf * q.prob(i))
        })
        .sum()
}

/// Naive two-sample statistic over all symbols.
pub fn naive_z(x: &Histogram, y: &Histogram) -> f64 {
    (0..x.n())
        .map(|i| {
            let (xi, yi) = (x.count(i) as f64, y.count(i) as f64);
            let s = xi + yi;
            if s == 0.0 {
                0.0
            } else {
                ((xi - yi).powi(2) - xi - yi) / s
            }
        })
        .sum()
}

/// Running mean/variance accumulator (Welford), with fourth-moment tracking
/// so the standard error of the sample variance can be estimated.
#[derive(Debug, Default, Clone)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn add(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.m2 / (self.n as f64 - 1.0)
    }

    /// Standard error of the sample mean.
    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Standard error of the sample variance, from the fourth central
    /// moment: Var(S^2) ~ (mu4 - sigma^4 (n-3)/(n-1)) / n.
    pub fn variance_se(&self) -> f64 {
        let n = self.n as f64;
        let mu4 = self.m4 / n;
        let var = self.variance();
        ((mu4 - var * var * (n - 3.0) / (n - 1.0)) / n)
            .max(0.0)
            .sqrt()
    }
}
