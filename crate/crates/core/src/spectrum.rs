//! Eigen-decomposition of a correlation matrix and comparison with the
//! Marchenko-Pastur law for uncorrelated series.
//!
//! Eigenvalues are sorted in descending order and ranks are 1-based:
//! rank 1 is the largest eigenvalue. Each eigenvector is sign-normalized so
//! that its component sum is non-negative; when the sum vanishes (within
//! round-off) the largest-magnitude component is made positive instead.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::corrcore::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::ingest::InstrumentMeta;
use crate::linalg::jacobi_eigen;

/// A component sum below this is treated as zero by the sign convention.
const SIGN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    instruments: Vec<InstrumentMeta>,
    eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of rank `k + 1`.
    eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    pub fn instruments(&self) -> &[InstrumentMeta] {
        &self.instruments
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, in rank order.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalue of 1-based `rank`.
    pub fn eigenvalue(&self, rank: usize) -> Option<f64> {
        rank.checked_sub(1).and_then(|k| self.eigenvalues.get(k).copied())
    }

    /// Eigenvector of 1-based `rank`.
    pub fn eigenvector(&self, rank: usize) -> Option<ArrayView1<'_, f64>> {
        if rank == 0 || rank > self.n() {
            None
        } else {
            Some(self.eigenvectors.column(rank - 1))
        }
    }

    pub(crate) fn check_rank(&self, rank: usize) -> Result<()> {
        if rank == 0 || rank > self.n() {
            Err(Error::Parameter(format!(
                "rank {rank} outside 1..={}",
                self.n()
            )))
        } else {
            Ok(())
        }
    }

    /// `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let u = &self.eigenvectors;
        let scaled = u * &ndarray::Array1::from(self.eigenvalues.clone());
        scaled.dot(&u.t())
    }
}

/// Applies the sign convention in place.
pub(crate) fn normalize_sign(mut v: ndarray::ArrayViewMut1<'_, f64>) {
    let sum: f64 = v.sum();
    let flip = if sum.abs() > SIGN_TIE_TOLERANCE {
        sum < 0.0
    } else {
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = v
            .iter()
            .find(|x| x.abs() >= max - SIGN_TIE_TOLERANCE)
            .copied()
            .unwrap_or(0.0);
        lead < 0.0
    };
    if flip {
        v.mapv_inplace(|x| -x);
    }
}

/// Full symmetric eigendecomposition `C = U Lambda U^T`.
pub fn decompose(cm: &CorrelationMatrix) -> Result<SpectralDecomposition> {
    decompose_matrix(cm.instruments().to_vec(), cm.matrix())
}

pub(crate) fn decompose_matrix(
    instruments: Vec<InstrumentMeta>,
    m: &Array2<f64>,
) -> Result<SpectralDecomposition> {
    let pairs = jacobi_eigen(m)?;
    let n = pairs.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&a, &b| pairs.values[b].total_cmp(&pairs.values[a]));
    let eigenvalues = order.iter().map(|&k| pairs.values[k]).collect();
    let mut eigenvectors = pairs.vectors.select(ndarray::Axis(1), &order);
    for col in eigenvectors.columns_mut() {
        normalize_sign(col);
    }
    Ok(SpectralDecomposition {
        instruments,
        eigenvalues,
        eigenvectors,
    })
}

/// Support of the Marchenko-Pastur density for aspect ratio `Q = T/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarchenkoPasturLaw {
    #[serde(rename = "Q")]
    pub q: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl MarchenkoPasturLaw {
    /// Requires `Q > 1`.
    pub fn from_q(q: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::Parameter(format!(
                "aspect ratio Q = T/N must exceed 1, got {q}"
            )));
        }
        let inv = 1.0 / q;
        let root = inv.sqrt();
        Ok(MarchenkoPasturLaw {
            q,
            lambda_min: 1.0 + inv - 2.0 * root,
            lambda_max: 1.0 + inv + 2.0 * root,
        })
    }

    /// `(Q / 2 pi) sqrt((lmax - l)(l - lmin)) / l` on the support, 0 elsewhere.
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lambda_min || lambda >= self.lambda_max {
            return 0.0;
        }
        let prod = (self.lambda_max - lambda) * (lambda - self.lambda_min);
        self.q / (2.0 * std::f64::consts::PI) * prod.max(0.0).sqrt() / lambda
    }

    pub fn classify(&self, lambda: f64) -> DeviationClass {
        if lambda < self.lambda_min {
            DeviationClass::Below
        } else if lambda > self.lambda_max {
            DeviationClass::Above
        } else {
            DeviationClass::Bulk
        }
    }
}

/// Law for `n` series of length `t`; requires `t > n >= 1`.
pub fn mp_law(n: usize, t: usize) -> Result<MarchenkoPasturLaw> {
    if n == 0 || t <= n {
        return Err(Error::Parameter(format!(
            "Marchenko-Pastur law needs T > N >= 1, got N = {n}, T = {t}"
        )));
    }
    MarchenkoPasturLaw::from_q(t as f64 / n as f64)
}

pub fn mp_density(law: &MarchenkoPasturLaw, lambda: f64) -> f64 {
    law.density(lambda)
}

/// Normalized histogram of the eigenvalues over their own range. A
/// degenerate spectrum (all eigenvalues equal) gets a unit-wide range
/// centred on the common value.
pub fn empirical_density(sd: &SpectralDecomposition, bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(Error::Parameter("eigenvalue histogram needs at least one bin".into()));
    }
    let vals = sd.eigenvalues();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    Histogram::from_samples(vals, bins, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationClass {
    Below,
    Bulk,
    Above,
}

impl DeviationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviationClass::Below => "below",
            DeviationClass::Bulk => "bulk",
            DeviationClass::Above => "above",
        }
    }
}

/// Ranks (1-based) of eigenvalues below, inside and above the law's support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationReport {
    pub below: Vec<usize>,
    pub bulk: Vec<usize>,
    pub above: Vec<usize>,
}

impl DeviationReport {
    pub fn class_of(&self, rank: usize) -> Option<DeviationClass> {
        if self.below.contains(&rank) {
            Some(DeviationClass::Below)
        } else if self.above.contains(&rank) {
            Some(DeviationClass::Above)
        } else if self.bulk.contains(&rank) {
            Some(DeviationClass::Bulk)
        } else {
            None
        }
    }

    pub fn outside_fraction(&self) -> f64 {
        let total = self.below.len() + self.bulk.len() + self.above.len();
        (self.below.len() + self.above.len()) as f64 / total as f64
    }
}

/// Eigenvalues exactly on a bound count as bulk.
pub fn classify_deviations(sd: &SpectralDecomposition, law: &MarchenkoPasturLaw) -> DeviationReport {
    let mut report = DeviationReport {
        below: Vec::new(),
        bulk: Vec::new(),
        above: Vec::new(),
    };
    for (k, &lambda) in sd.eigenvalues().iter().enumerate() {
        let rank = k + 1;
        match law.classify(lambda) {
            DeviationClass::Below => report.below.push(rank),
            DeviationClass::Bulk => report.bulk.push(rank),
            DeviationClass::Above => report.above.push(rank),
        }
    }
    report
}
