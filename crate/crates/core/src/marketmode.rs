//! Market-mode removal and the structure left behind.
//!
//! Each instrument's returns are regressed on a common market factor
//! (normally the rank-1 eigenportfolio), `r_i(t) = alpha_i + beta_i M(t) + e_i(t)`.
//! The residuals are standardized and correlated again; the large
//! eigenvalues of that residual matrix pick out sector-like groups and the
//! small ones pick out tightly coupled pairs.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::corrcore::{correlation_matrix, standardize_rows, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::ingest::InstrumentMeta;
use crate::returns::{is_degenerate_sd, ReturnPanel};
use crate::spectrum::{decompose, mp_law, MarchenkoPasturLaw, SpectralDecomposition};

/// Default significance level, in units of the uniform component `1/sqrt(N)`.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1.5;

/// Residual eigenvalues at or below this are treated as exact null modes.
pub const NULL_MODE_TOLERANCE: f64 = 1e-9;

/// Top-2 squared-magnitude share below which a vector has no dominant pair.
pub const DOMINANT_PAIR_SHARE: f64 = 0.5;

/// Residuals whose standard deviation falls below this fraction of the
/// instrument's return deviation count as a perfect fit.
const PERFECT_FIT_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModeRemoval {
    pub market_factor: Vec<f64>,
    pub instruments: Vec<InstrumentMeta>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// N x T' residuals for every instrument, including excluded ones.
    pub residuals: Array2<f64>,
    /// Labels of instruments fitted exactly by the market factor; they are
    /// left out of the residual correlation matrix.
    pub excluded: Vec<u32>,
    pub residual_corr: CorrelationMatrix,
    pub residual_spectrum: SpectralDecomposition,
}

impl MarketModeRemoval {
    /// Marchenko-Pastur law matching the residual matrix's dimensions.
    pub fn residual_law(&self) -> Result<MarchenkoPasturLaw> {
        mp_law(self.residual_corr.n(), self.residuals.ncols())
    }
}

/// Per-instrument OLS on `market`, then the correlation spectrum of the
/// standardized residuals.
pub fn remove_market_mode(rp: &ReturnPanel, market: &[f64]) -> Result<MarketModeRemoval> {
    let t = rp.len();
    if market.len() != t {
        return Err(Error::Parameter(format!(
            "market factor has {} points, return panel {t}",
            market.len()
        )));
    }
    let m = ArrayView1::from(market);
    let tf = t as f64;
    let m_mean = m.sum() / tf;
    let dm = m.mapv(|v| v - m_mean);
    let smm = dm.dot(&dm);
    if is_degenerate_sd((smm / tf).sqrt(), m) {
        return Err(Error::Parameter("market factor has zero variance".into()));
    }

    let n = rp.n_instruments();
    let mut alphas = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let mut residuals = Array2::zeros((n, t));
    let mut kept = Vec::with_capacity(n);
    let mut excluded = Vec::new();
    for (i, r) in rp.returns().rows().into_iter().enumerate() {
        let r_mean = r.sum() / tf;
        let mut beta = dm.dot(&r) / smm;
        let mut alpha = r_mean - beta * m_mean;
        let mut eps = &r - &m.mapv(|v| alpha + beta * v);
        // one refinement pass tightens orthogonality to round-off level
        let e_mean = eps.sum() / tf;
        let e_beta = dm.dot(&eps) / smm;
        beta += e_beta;
        alpha += e_mean - e_beta * m_mean;
        eps = &r - &m.mapv(|v| alpha + beta * v);

        let r_sd = {
            let c = r.mapv(|v| v - r_mean);
            (c.dot(&c) / tf).sqrt()
        };
        let e_sd = {
            let e_mean = eps.sum() / tf;
            let c = eps.mapv(|v| v - e_mean);
            (c.dot(&c) / tf).sqrt()
        };
        if e_sd == 0.0 || e_sd <= PERFECT_FIT_RATIO * r_sd {
            excluded.push(rp.instruments()[i].label);
        } else {
            kept.push(i);
        }
        alphas.push(alpha);
        betas.push(beta);
        residuals.row_mut(i).assign(&eps);
    }

    let kept_meta: Vec<InstrumentMeta> = kept.iter().map(|&i| rp.instruments()[i].clone()).collect();
    let kept_resid = residuals.select(ndarray::Axis(0), &kept);
    let standardized = standardize_rows(&kept_meta, &kept_resid)?;
    let residual_corr = correlation_matrix(&standardized)?;
    let residual_spectrum = decompose(&residual_corr)?;
    Ok(MarketModeRemoval {
        market_factor: market.to_vec(),
        instruments: rp.instruments().to_vec(),
        alphas,
        betas,
        residuals,
        excluded,
        residual_corr,
        residual_spectrum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Participant {
    /// Row index in the decomposition's instrument list.
    pub index: usize,
    pub label: u32,
    pub component: f64,
}

impl Participant {
    pub fn sign(&self) -> Sign {
        Sign::of(self.component)
    }
}

/// Components with `|u_l| >= threshold_factor / sqrt(N)`, largest magnitude first.
pub fn significant_participants(
    sd: &SpectralDecomposition,
    rank: usize,
    threshold_factor: f64,
) -> Result<Vec<Participant>> {
    sd.check_rank(rank)?;
    if !(threshold_factor > 0.0) {
        return Err(Error::Parameter(format!(
            "threshold factor must be positive, got {threshold_factor}"
        )));
    }
    let u = sd.eigenvector(rank).expect("rank checked");
    let level = threshold_factor / (sd.n() as f64).sqrt();
    let cutoff = level * (1.0 - 1e-12);
    let mut out: Vec<Participant> = u
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() >= cutoff)
        .map(|(index, &component)| Participant {
            index,
            label: sd.instruments()[index].label,
            component,
        })
        .collect();
    out.sort_by(|a, b| b.component.abs().total_cmp(&a.component.abs()).then(a.index.cmp(&b.index)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorParticipant {
    pub label: u32,
    pub name: String,
    pub exchange: String,
    pub country: String,
    pub commodity: Option<String>,
    pub component: f64,
    pub sign: Sign,
}

/// Participants of one sign sharing an exchange or commodity tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub sign: Sign,
    pub key: String,
    pub labels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorEigenvector {
    pub rank: usize,
    pub eigenvalue: f64,
    pub above_mp: bool,
    /// Signs and components below are reversed relative to the stored
    /// residual eigenvector.
    pub flipped: bool,
    /// Positive block first, then negative; each block by descending magnitude.
    pub participants: Vec<SectorParticipant>,
    pub exchange_groups: Vec<Group>,
    pub commodity_groups: Vec<Group>,
}

impl SectorEigenvector {
    pub fn block(&self, sign: Sign) -> Vec<u32> {
        self.participants
            .iter()
            .filter(|p| p.sign == sign)
            .map(|p| p.label)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    pub threshold_factor: f64,
    pub eigenvectors: Vec<SectorEigenvector>,
    pub warnings: Vec<String>,
}

fn group_by<F>(participants: &[SectorParticipant], key: F) -> Vec<Group>
where
    F: Fn(&SectorParticipant) -> Option<String>,
{
    let mut groups: std::collections::BTreeMap<(Sign, String), Vec<u32>> = Default::default();
    for p in participants {
        if let Some(k) = key(p).filter(|k| !k.is_empty()) {
            groups.entry((p.sign, k)).or_default().push(p.label);
        }
    }
    groups
        .into_iter()
        .map(|((sign, key), labels)| Group { sign, key, labels })
        .collect()
}

/// Significant participants of the requested residual eigenvectors with
/// their metadata, split into sign blocks and grouped by exchange and
/// commodity. Ranks whose eigenvalue is inside the Marchenko-Pastur bulk
/// are still processed but produce a warning.
///
/// Residual eigenvectors are all orthogonal to the market-weighted null
/// direction, so their component sums sit near zero and the spectrum's sign
/// convention says little about them. Each vector is therefore oriented so
/// that its significant components sum to a non-negative value.
pub fn sector_report(mr: &MarketModeRemoval, ranks: &[usize], threshold_factor: f64) -> Result<SectorReport> {
    let sd = &mr.residual_spectrum;
    let law = mr.residual_law().ok();
    let mut warnings = Vec::new();
    if law.is_none() {
        warnings.push("residual panel has T <= N; Marchenko-Pastur bound unavailable".to_string());
    }
    let mut eigenvectors = Vec::with_capacity(ranks.len());
    for &rank in ranks {
        let found = significant_participants(sd, rank, threshold_factor)?;
        let eigenvalue = sd.eigenvalue(rank).expect("rank checked");
        let above_mp = law.map(|l| eigenvalue > l.lambda_max).unwrap_or(false);
        if let Some(l) = law {
            if !above_mp {
                warnings.push(format!(
                    "residual eigenvalue {eigenvalue:.6} of rank {rank} is not above lambda_max = {:.6}",
                    l.lambda_max
                ));
            }
        }
        let flipped = found.iter().map(|p| p.component).sum::<f64>() < 0.0;
        let orient = if flipped { -1.0 } else { 1.0 };
        let mut participants: Vec<SectorParticipant> = found
            .iter()
            .map(|p| {
                let meta = &sd.instruments()[p.index];
                SectorParticipant {
                    label: meta.label,
                    name: meta.name.clone(),
                    exchange: meta.exchange.clone(),
                    country: meta.country.clone(),
                    commodity: meta.commodity.clone(),
                    component: orient * p.component,
                    sign: Sign::of(orient * p.component),
                }
            })
            .collect();
        // stable sort keeps descending magnitude inside each block
        participants.sort_by_key(|p| p.sign);
        let exchange_groups = group_by(&participants, |p| Some(p.exchange.clone()));
        let commodity_groups = group_by(&participants, |p| p.commodity.clone());
        eigenvectors.push(SectorEigenvector {
            rank,
            eigenvalue,
            above_mp,
            flipped,
            participants,
            exchange_groups,
            commodity_groups,
        });
    }
    Ok(SectorReport {
        threshold_factor,
        eigenvectors,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    /// Rank in the residual spectrum.
    pub rank: usize,
    pub eigenvalue: f64,
    pub label_a: u32,
    pub label_b: u32,
    pub component_a: f64,
    pub component_b: f64,
    pub sign_a: Sign,
    pub sign_b: Sign,
    /// Coefficient between the two instruments in the original matrix.
    pub c_ij: f64,
    /// 1-based position of `c_ij` among all original coefficients, largest first.
    pub coefficient_rank: usize,
    /// `u_a^2 + u_b^2`
    pub top2_share: f64,
    pub dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    /// Smallest eigenvalue first.
    pub entries: Vec<PairEntry>,
    /// Ranks skipped because their eigenvalue is numerically zero.
    pub null_modes: Vec<usize>,
}

/// Top-2 components of the `count` smallest residual eigenvectors, paired
/// with the original (pre-removal) correlation between those instruments.
///
/// Regressing on a factor that is itself a weighted sum of the returns
/// leaves the residuals linearly dependent, so the residual matrix has an
/// eigenvalue of zero whose vector follows the factor weights rather than
/// any pair. Eigenvalues at or below [`NULL_MODE_TOLERANCE`] are skipped
/// and listed in `null_modes`; `count` applies to the remaining vectors.
pub fn pair_report(mr: &MarketModeRemoval, original: &CorrelationMatrix, count: usize) -> Result<PairReport> {
    let sd = &mr.residual_spectrum;
    let n = sd.n();
    if count > n {
        return Err(Error::Parameter(format!(
            "requested {count} eigenvectors, residual spectrum has {n}"
        )));
    }
    if n < 2 && count > 0 {
        return Err(Error::Parameter("pair report needs at least two instruments".into()));
    }
    let mut upper = original.upper_triangle();
    upper.sort_by(|a, b| b.total_cmp(a));

    let mut entries = Vec::with_capacity(count);
    let mut null_modes = Vec::new();
    for rank in (1..=n).rev() {
        if entries.len() == count {
            break;
        }
        if sd.eigenvalue(rank).expect("rank in range") <= NULL_MODE_TOLERANCE {
            null_modes.push(rank);
            continue;
        }
        let u = sd.eigenvector(rank).expect("rank in range");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b)));
        let (ia, ib) = (idx[0], idx[1]);
        let (la, lb) = (sd.instruments()[ia].label, sd.instruments()[ib].label);
        let lookup = |label: u32| {
            original.index_of(label).ok_or_else(|| {
                Error::Integrity(format!("instrument {label} missing from original correlation matrix"))
            })
        };
        let (oa, ob) = (lookup(la)?, lookup(lb)?);
        let c_ij = original.get(oa, ob);
        let coefficient_rank = upper.iter().position(|&c| c == c_ij).map(|p| p + 1).unwrap_or(0);
        let top2_share = u[ia] * u[ia] + u[ib] * u[ib];
        entries.push(PairEntry {
            rank,
            eigenvalue: sd.eigenvalue(rank).expect("rank in range"),
            label_a: la,
            label_b: lb,
            component_a: u[ia],
            component_b: u[ib],
            sign_a: Sign::of(u[ia]),
            sign_b: Sign::of(u[ib]),
            c_ij,
            coefficient_rank,
            top2_share,
            dominant: top2_share >= DOMINANT_PAIR_SHARE,
        });
    }
    Ok(PairReport { entries, null_modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn date(k: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(k)
    }

    fn rp(m: Array2<f64>) -> ReturnPanel {
        let (n, t) = m.dim();
        let metas = (1..=n as u32).map(|l| InstrumentMeta::bare(l, date(0))).collect();
        ReturnPanel::new(metas, date(0), (1..=t as u64).map(date).collect(), m).unwrap()
    }

    fn noise(rows: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, t), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.01 * z
        })
    }

    #[test]
    fn perfect_fit_is_excluded() {
        let t = 200;
        let base = noise(4, t, 1);
        let market: Vec<f64> = base.row(0).to_vec();
        let mut m = base.clone();
        m.row_mut(0).assign(&base.row(0).mapv(|v| 2.0 * v));
        let out = remove_market_mode(&rp(m), &market).unwrap();
        assert!((out.betas[0] - 2.0).abs() < 1e-12);
        assert!(out.alphas[0].abs() < 1e-15);
        assert!(out.residuals.row(0).iter().all(|e| e.abs() < 1e-15));
        assert_eq!(out.excluded, vec![1]);
        assert_eq!(out.residual_corr.n(), 3);
    }

    #[test]
    fn independent_instrument_has_small_beta() {
        let m = noise(2, 5000, 3);
        let market: Vec<f64> = m.row(0).to_vec();
        let panel = rp(noise(3, 5000, 4));
        let out = remove_market_mode(&panel, &market).unwrap();
        for b in &out.betas {
            assert!(b.abs() < 0.05, "{b}");
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_market() {
        let m = noise(6, 400, 5);
        let market: Vec<f64> = m.row(5).to_vec();
        let out = remove_market_mode(&rp(m.slice(ndarray::s![0..5, ..]).to_owned()), &market).unwrap();
        let t = 400.0;
        for row in out.residuals.rows() {
            let mean = row.sum() / t;
            let cross = row.iter().zip(&market).map(|(e, m)| e * m).sum::<f64>() / t;
            assert!(mean.abs() < 1e-10 && cross.abs() < 1e-10);
        }
    }

    #[test]
    fn bad_market_factor_rejected() {
        let panel = rp(noise(3, 50, 6));
        assert!(remove_market_mode(&panel, &[0.01; 50]).is_err());
        assert!(remove_market_mode(&panel, &[0.01; 10]).is_err());
    }

    fn spectrum_of(m: Array2<f64>) -> SpectralDecomposition {
        let n = m.nrows();
        let metas = (1..=n as u32).map(|l| InstrumentMeta::bare(l, date(0))).collect();
        decompose(&CorrelationMatrix::from_matrix(metas, m).unwrap()).unwrap()
    }

    #[test]
    fn uniform_vector_has_no_participants() {
        let n = 9;
        let sd = spectrum_of(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.4 }));
        assert!(significant_participants(&sd, 1, 1.5).unwrap().is_empty());
    }

    #[test]
    fn one_hot_vector_has_one_participant() {
        let sd = spectrum_of(Array2::eye(4));
        for rank in 1..=4 {
            assert_eq!(significant_participants(&sd, rank, 2.0).unwrap().len(), 1);
            assert_eq!(significant_participants(&sd, rank, 1.0).unwrap().len(), 1);
        }
        assert!(significant_participants(&sd, 5, 1.5).is_err());
        assert!(significant_participants(&sd, 1, 0.0).is_err());
    }

    #[test]
    fn pair_report_count_bounds() {
        let m = noise(4, 300, 8);
        let market: Vec<f64> = noise(1, 300, 9).row(0).to_vec();
        let panel = rp(m);
        let mr = remove_market_mode(&panel, &market).unwrap();
        let original = correlation_matrix(&crate::corrcore::standardize(&panel).unwrap()).unwrap();
        assert!(pair_report(&mr, &original, 5).is_err());
        let rep = pair_report(&mr, &original, 4).unwrap();
        assert_eq!(rep.entries.len(), 4);
        assert_eq!(rep.entries[0].rank, 4);
        for e in &rep.entries {
            let (a, b) = (original.index_of(e.label_a).unwrap(), original.index_of(e.label_b).unwrap());
            assert_eq!(e.c_ij.to_bits(), original.get(a, b).to_bits());
            assert!(e.coefficient_rank >= 1);
        }
    }
}
