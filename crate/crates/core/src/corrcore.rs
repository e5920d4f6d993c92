//! Standardized returns, the correlation matrix, and the distribution of
//! its off-diagonal coefficients.

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::ingest::InstrumentMeta;
use crate::returns::{is_degenerate_sd, ReturnPanel};

/// Default number of uniform bins over `[-1, 1]`.
pub const DEFAULT_COEFFICIENT_BINS: usize = 50;

/// Rows with zero mean and unit population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    instruments: Vec<InstrumentMeta>,
    g: Array2<f64>,
}

impl StandardizedPanel {
    pub fn instruments(&self) -> &[InstrumentMeta] {
        &self.instruments
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.g
    }
}

/// `g_i(t) = (r_i(t) - <r_i>) / sigma_i` with the population sigma.
pub fn standardize(rp: &ReturnPanel) -> Result<StandardizedPanel> {
    standardize_rows(rp.instruments(), rp.returns())
}

pub(crate) fn standardize_rows(
    instruments: &[InstrumentMeta],
    values: &Array2<f64>,
) -> Result<StandardizedPanel> {
    let t = values.ncols();
    if t == 0 {
        return Err(Error::Parameter("cannot standardize empty series".into()));
    }
    let mut g = values.to_owned();
    for (i, (meta, mut row)) in instruments.iter().zip(g.rows_mut()).enumerate() {
        let mean = row.sum() / t as f64;
        row.mapv_inplace(|v| v - mean);
        let sd = (row.iter().map(|v| v * v).sum::<f64>() / t as f64).sqrt();
        if is_degenerate_sd(sd, values.row(i)) {
            return Err(Error::Domain(format!(
                "instrument {} ({}) has zero return variance and cannot be standardized",
                meta.label, meta.name
            )));
        }
        row.mapv_inplace(|v| v / sd);
    }
    Ok(StandardizedPanel {
        instruments: instruments.to_vec(),
        g,
    })
}

/// Symmetric matrix of Pearson coefficients with exact unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    instruments: Vec<InstrumentMeta>,
    c: Array2<f64>,
}

impl CorrelationMatrix {
    /// Wraps a matrix, enforcing symmetry by averaging with the transpose,
    /// forcing the diagonal to 1 and clamping entries into `[-1, 1]`.
    pub fn from_matrix(instruments: Vec<InstrumentMeta>, m: Array2<f64>) -> Result<Self> {
        let n = instruments.len();
        if m.dim() != (n, n) {
            return Err(Error::Integrity(format!(
                "correlation matrix {:?} does not match {n} instruments",
                m.dim()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("correlation matrix has non-finite entries".into()));
        }
        let mut c = Array2::zeros((n, n));
        for i in 0..n {
            c[[i, i]] = 1.0;
            for j in i + 1..n {
                let v = (0.5 * (m[[i, j]] + m[[j, i]])).clamp(-1.0, 1.0);
                c[[i, j]] = v;
                c[[j, i]] = v;
            }
        }
        Ok(CorrelationMatrix { instruments, c })
    }

    pub fn instruments(&self) -> &[InstrumentMeta] {
        &self.instruments
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.instruments.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[[i, j]]
    }

    pub fn index_of(&self, label: u32) -> Option<usize> {
        self.instruments.iter().position(|m| m.label == label)
    }

    /// The `N(N-1)/2` coefficients above the diagonal, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.c[[i, j]]);
            }
        }
        out
    }

    /// Mean of the off-diagonal coefficients.
    pub fn mean_off_diagonal(&self) -> f64 {
        let upper = self.upper_triangle();
        if upper.is_empty() {
            return 0.0;
        }
        upper.iter().sum::<f64>() / upper.len() as f64
    }
}

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `c_ij = <g_i(t) g_j(t)>`. Each entry is an independent dot product, so
/// the parallel evaluation is deterministic.
pub fn correlation_matrix(sp: &StandardizedPanel) -> Result<CorrelationMatrix> {
    let g = sp.values();
    let (n, t) = g.dim();
    let tf = t as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let gi = g.index_axis(Axis(0), i);
            (0..n)
                .map(|j| if j < i { 0.0 } else { dot(gi, g.row(j)) / tf })
                .collect()
        })
        .collect();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            m[[i, j]] = rows[i][j];
            m[[j, i]] = rows[i][j];
        }
    }
    CorrelationMatrix::from_matrix(sp.instruments().to_vec(), m)
}

/// Density histogram and moments of the upper-triangle coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientDistribution {
    pub histogram: Histogram,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// `None` if every coefficient is identical.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn coefficient_distribution(cm: &CorrelationMatrix, bins: usize) -> Result<CoefficientDistribution> {
    if bins < 1 {
        return Err(Error::Parameter("coefficient histogram needs at least one bin".into()));
    }
    if cm.n() < 2 {
        return Err(Error::Parameter(
            "coefficient distribution needs at least two instruments".into(),
        ));
    }
    let upper = cm.upper_triangle();
    let histogram = Histogram::from_samples(&upper, bins, -1.0, 1.0)?;
    let stats = crate::returns::SeriesStats::of(ndarray::ArrayView1::from(&upper))?;
    Ok(CoefficientDistribution {
        histogram,
        count: upper.len(),
        mean: stats.mean,
        sd: stats.sd,
        skewness: stats.skewness,
        kurtosis: stats.kurtosis,
    })
}
