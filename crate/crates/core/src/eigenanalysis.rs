//! Inverse participation ratios, eigenportfolios and the price index built
//! from the market eigenportfolio.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::returns::ReturnPanel;
use crate::spectrum::SpectralDecomposition;

/// `|sum_j u_j| < DEGENERATE_FACTOR * sqrt(N)` makes the eigenportfolio undefined.
pub const DEGENERATE_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IprSeries {
    /// `I^k` in rank order.
    pub values: Vec<f64>,
    pub mean: f64,
}

/// `I^k = sum_l (u_l^k)^4` for every eigenvector.
pub fn ipr(sd: &SpectralDecomposition) -> IprSeries {
    let values: Vec<f64> = sd
        .eigenvectors()
        .columns()
        .into_iter()
        .map(|u| u.iter().map(|x| x.powi(4)).sum())
        .collect();
    let mean = if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    };
    IprSeries { values, mean }
}

/// Returns of the portfolio weighted by one eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenportfolio {
    pub rank: usize,
    pub weights: Vec<f64>,
    /// `sum_j u_j^k`
    pub normalizer: f64,
    pub start_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

/// `G^k(t) = sum_j u_j^k r_j(t) / sum_j u_j^k` on raw (unstandardized) returns.
pub fn eigenportfolio(sd: &SpectralDecomposition, rp: &ReturnPanel, rank: usize) -> Result<Eigenportfolio> {
    sd.check_rank(rank)?;
    if sd.n() != rp.n_instruments() {
        return Err(Error::Parameter(format!(
            "decomposition has {} instruments, return panel {}",
            sd.n(),
            rp.n_instruments()
        )));
    }
    let u = sd.eigenvector(rank).expect("rank checked");
    let normalizer = u.sum();
    let threshold = DEGENERATE_FACTOR * (sd.n() as f64).sqrt();
    if normalizer.abs() < threshold {
        return Err(Error::DegeneratePortfolio {
            rank,
            sum: normalizer,
            threshold,
        });
    }
    let returns = rp
        .returns()
        .columns()
        .into_iter()
        .map(|col| col.dot(&u) / normalizer)
        .collect();
    Ok(Eigenportfolio {
        rank,
        weights: u.to_vec(),
        normalizer,
        start_date: rp.start_date(),
        dates: rp.dates().to_vec(),
        returns,
    })
}

/// OLS fit of the cross-sectional mean return on the eigenportfolio return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearityTest {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Regresses `<r>(t)` (y) on `G^k(t)` (x).
pub fn linearity_test(ep: &Eigenportfolio, rp: &ReturnPanel) -> Result<LinearityTest> {
    let mean_r = rp.mean_return();
    fit_line(&ep.returns, &mean_r)
}

pub(crate) fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearityTest> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Parameter(format!("linear fit needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let xscale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sxx == 0.0 || (sxx / nf).sqrt() <= 1e-13 * xscale {
        return Err(Error::Domain(
            "eigenportfolio return has zero variance; the linear fit is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LinearityTest {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSeries {
    /// `dates[0]` is the base date; the rest follow the eigenportfolio.
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub base: f64,
}

/// `AFPI(t) = base * exp(sum_{s <= t} G(s))`, starting from `base` on the
/// date before the first return.
pub fn afpi(ep: &Eigenportfolio, base_price: f64) -> Result<IndexSeries> {
    if !(base_price > 0.0) || !base_price.is_finite() {
        return Err(Error::Parameter(format!(
            "index base price must be positive, got {base_price}"
        )));
    }
    let mut dates = Vec::with_capacity(ep.dates.len() + 1);
    let mut values = Vec::with_capacity(ep.dates.len() + 1);
    dates.push(ep.start_date);
    values.push(base_price);
    let mut cumulative = 0.0;
    for (date, g) in ep.dates.iter().zip(&ep.returns) {
        cumulative += g;
        dates.push(*date);
        values.push(base_price * cumulative.exp());
    }
    Ok(IndexSeries {
        dates,
        values,
        base: base_price,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrcore::CorrelationMatrix;
    use crate::ingest::InstrumentMeta;
    use crate::spectrum::decompose;
    use ndarray::{array, Array2};

    fn metas(n: usize) -> Vec<InstrumentMeta> {
        (1..=n as u32).map(|l| InstrumentMeta::bare(l, date(0))).collect()
    }

    fn date(k: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(k)
    }

    fn rp(m: Array2<f64>) -> ReturnPanel {
        let (n, t) = m.dim();
        ReturnPanel::new(metas(n), date(0), (1..=t as u64).map(date).collect(), m).unwrap()
    }

    fn spectrum_of(m: Array2<f64>) -> SpectralDecomposition {
        let n = m.nrows();
        decompose(&CorrelationMatrix::from_matrix(metas(n), m).unwrap()).unwrap()
    }

    #[test]
    fn ipr_of_identity_is_one() {
        let sd = spectrum_of(Array2::eye(3));
        let s = ipr(&sd);
        assert_eq!(s.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn ipr_of_balanced_pair_is_half() {
        let sd = spectrum_of(array![[1.0, 0.8], [0.8, 1.0]]);
        for v in ipr(&sd).values {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_vector_tracks_mean_return() {
        let n = 4;
        let sd = spectrum_of(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.5 }));
        let panel = rp(array![[0.01, -0.02, 0.0], [0.03, 0.01, -0.01], [0.0, 0.0, 0.02], [-0.01, 0.05, 0.01]]);
        let ep = eigenportfolio(&sd, &panel, 1).unwrap();
        let mean = panel.mean_return();
        for (g, m) in ep.returns.iter().zip(&mean) {
            assert!((g - m).abs() < 1e-15);
        }
        let fit = linearity_test(&ep, &panel).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-10);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_vector_selects_instrument() {
        let sd = spectrum_of(Array2::eye(3));
        let panel = rp(array![[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]);
        // identity: column k is e_k
        let ep = eigenportfolio(&sd, &panel, 2).unwrap();
        let k = ep.weights.iter().position(|&w| w == 1.0).unwrap();
        assert_eq!(ep.returns, panel.returns().row(k).to_vec());
    }

    #[test]
    fn zero_sum_vector_is_degenerate() {
        let sd = spectrum_of(array![[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let panel = rp(Array2::from_elem((3, 4), 0.01));
        let rank = (1..=3)
            .find(|&k| (sd.eigenvector(k).unwrap().sum()).abs() < 1e-9)
            .expect("(1,-1,0)/sqrt2 is an eigenvector");
        assert!(matches!(
            eigenportfolio(&sd, &panel, rank),
            Err(Error::DegeneratePortfolio { .. })
        ));
        assert!(eigenportfolio(&sd, &panel, 0).is_err());
        assert!(eigenportfolio(&sd, &panel, 4).is_err());
    }

    #[test]
    fn fit_rejects_constant_regressor() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    fn ep_with(returns: Vec<f64>) -> Eigenportfolio {
        let t = returns.len() as u64;
        Eigenportfolio {
            rank: 1,
            weights: vec![1.0],
            normalizer: 1.0,
            start_date: date(0),
            dates: (1..=t).map(date).collect(),
            returns,
        }
    }

    #[test]
    fn index_of_zero_returns_is_flat() {
        let idx = afpi(&ep_with(vec![0.0; 5]), 42.0).unwrap();
        assert!(idx.values.iter().all(|&v| v == 42.0));
        assert_eq!(idx.values.len(), 6);
        assert_eq!(idx.dates[0], date(0));
    }

    #[test]
    fn index_compounds_from_base() {
        let base = 2673.995;
        let idx = afpi(&ep_with(vec![0.01, 0.01]), base).unwrap();
        assert_eq!(idx.values[0], base);
        assert!((idx.values[1] - base * 0.01f64.exp()).abs() < 1e-9);
        assert!((idx.values[2] - base * 0.02f64.exp()).abs() < 1e-9);
        assert!(afpi(&ep_with(vec![0.0]), 0.0).is_err());
        assert!(afpi(&ep_with(vec![0.0]), -1.0).is_err());
    }
}
