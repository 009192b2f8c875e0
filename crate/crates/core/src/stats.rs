//! Small statistics toolkit for the Monte Carlo estimators.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Normal quantile used for the 95% Wilson interval.
pub const Z95: f64 = 1.96;

/// Running mean and variance (Welford). `merge` is exact up to rounding and
/// deterministic for a fixed merge order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Summary) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Rebuilds the running state behind a reported estimate, so estimates
    /// from disjoint samples can be merged.
    pub fn from_estimate(e: &Estimate) -> Self {
        let n = e.n as f64;
        Self {
            n: e.n,
            mean: e.mean,
            m2: e.stderr * e.stderr * n * (n - 1.0).max(0.0),
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr(),
            n: self.n,
        }
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    /// `|mean − target| ≤ z · stderr`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.stderr
    }
}

/// Bernoulli frequency with a binomial standard error and Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub hits: u64,
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    pub wilson95: [f64; 2],
}

impl TailEstimate {
    pub fn from_counts(hits: u64, n: u64) -> Result<Self> {
        if n == 0 || hits > n {
            return Err(Error::Validation(format!("bad frequency {hits}/{n}")));
        }
        let p = hits as f64 / n as f64;
        Ok(Self {
            threshold: None,
            hits,
            n,
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            wilson95: wilson_interval(hits, n, Z95),
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr,
            n: self.n,
        }
    }
}

/// Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> [f64; 2] {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

/// Pearson χ² goodness-of-fit p-value of `observed` counts against the
/// probabilities `expected` (which must sum to one). Cells with expected
/// count below 5 are pooled into their neighbours first.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::Validation("observed and expected differ in length".into()));
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        if p == 0.0 && o > 0 {
            return Ok(0.0);
        }
        o_acc += o as f64;
        e_acc += p * n;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    if cells.len() < 2 {
        return Ok(1.0);
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64)
        .map_err(|e| Error::Validation(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}
