//! Text formats for distributions, histograms, and sample streams.
//!
//! Distributions are flat lists of floats, one value per line or a single
//! whitespace/comma delimited row; histograms are integer rows of the same
//! shape; sample streams are zero-based symbol indices.

use std::fs;
use std::path::Path;

use crate::distributions::{DiscreteDistribution, Histogram};
use crate::error::{Error, Result};

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
}

/// Reads a distribution from a text file of floats.
pub fn read_distribution(path: &Path) -> Result<DiscreteDistribution> {
    let text = fs::read_to_string(path)?;
    let probs = tokens(&text)
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                Error::InvalidDistribution(format!("{}: '{t}' is not a number", path.display()))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    DiscreteDistribution::new(probs)
}

/// Writes a distribution as one float per line.
pub fn write_distribution(path: &Path, dist: &DiscreteDistribution) -> Result<()> {
    let mut out = String::with_capacity(dist.n() * 24);
    for &p in dist.probs() {
        out.push_str(&format!("{p:.17}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a histogram from a text file of integer counts. The nominal budget
/// is taken to be the total count.
pub fn read_histogram(path: &Path) -> Result<Histogram> {
    let text = fs::read_to_string(path)?;
    let counts = tokens(&text)
        .map(|t| {
            t.parse::<u64>().map_err(|_| {
                Error::InvalidParameter(format!(
                    "{}: '{t}' is not a non-negative integer",
                    path.display()
                ))
            })
        })
        .collect::<Result<Vec<u64>>>()?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    Histogram::new(counts, total)
}

/// Writes a histogram as one count per line.
pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    let mut out = String::with_capacity(hist.n() * 8);
    for &c in hist.counts() {
        out.push_str(&format!("{c}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a sample stream: zero-based symbol indices, one or more per line.
pub fn read_samples(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    tokens(&text)
        .map(|t| {
            t.parse::<usize>().map_err(|_| {
                Error::InvalidParameter(format!("{}: '{t}' is not a symbol index", path.display()))
            })
        })
        .collect()
}
