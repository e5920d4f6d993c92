use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform-bin density histogram. `densities[k]` covers `[edges[k], edges[k+1])`,
/// with the last bin closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Density histogram of `samples` over `[lo, hi]`. Samples outside the
    /// range are counted in the nearest edge bin.
    pub fn from_samples(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 1 {
            return Err(Error::Parameter("histogram needs at least one bin".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("invalid histogram range [{lo}, {hi}]")));
        }
        if samples.is_empty() {
            return Err(Error::Parameter("histogram of an empty sample".into()));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + k as f64 * width })
            .collect();
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let k = ((x - lo) / width).floor();
            let k = if k.is_nan() || k < 0.0 {
                0
            } else {
                (k as usize).min(bins - 1)
            };
            counts[k] += 1;
        }
        let total = samples.len() as f64;
        let densities = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect();
        Ok(Histogram { edges, densities })
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    /// Sum of density times bin width; 1 for any histogram built from samples.
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Index of the bin containing `x`, if any.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let last = self.bins() - 1;
        (0..self.bins()).find(|&k| {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            x >= a && (x < b || (k == last && x <= b))
        })
    }
}
