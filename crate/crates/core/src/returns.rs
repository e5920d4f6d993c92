//! Daily log returns and per-instrument descriptive statistics.
//!
//! All moments use the population convention (divisor `T'`), which keeps
//! the standard deviation here identical to the one used for standardizing
//! returns before correlating them. Kurtosis is raw, so a Gaussian sample
//! sits near 3.

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{apply_exclusions, ExclusionCalendar, FillFlag, InstrumentMeta, PricePanel};

/// N x T' matrix of log returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    instruments: Vec<InstrumentMeta>,
    /// Date of the price preceding the first return.
    start_date: NaiveDate,
    dates: Vec<NaiveDate>,
    returns: Array2<f64>,
    dt_days: u32,
}

impl ReturnPanel {
    /// Wraps a precomputed return matrix. Entries must be finite.
    pub fn new(
        instruments: Vec<InstrumentMeta>,
        start_date: NaiveDate,
        dates: Vec<NaiveDate>,
        returns: Array2<f64>,
    ) -> Result<Self> {
        if returns.dim() != (instruments.len(), dates.len()) {
            return Err(Error::Integrity(format!(
                "return matrix {:?} does not match {} instruments x {} dates",
                returns.dim(),
                instruments.len(),
                dates.len()
            )));
        }
        if let Some(((i, j), v)) = returns.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite return {v} for instrument {} on {}",
                instruments[i].label, dates[j]
            )));
        }
        Ok(ReturnPanel {
            instruments,
            start_date,
            dates,
            returns,
            dt_days: 1,
        })
    }

    pub fn instruments(&self) -> &[InstrumentMeta] {
        &self.instruments
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &Array2<f64> {
        &self.returns
    }

    pub fn dt_days(&self) -> u32 {
        self.dt_days
    }

    pub fn n_instruments(&self) -> usize {
        self.instruments.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Equal-weight cross-sectional mean return on each date.
    pub fn mean_return(&self) -> Vec<f64> {
        let n = self.n_instruments() as f64;
        self.returns.columns().into_iter().map(|c| c.sum() / n).collect()
    }
}

/// Log returns of a filled panel after removing the calendar's dates.
///
/// Excluded dates are dropped from the price panel first, so the return on
/// the first kept date after an excluded one spans the gap. Calendar dates
/// outside the panel are ignored; use [`apply_exclusions`] directly to see
/// which ones.
pub fn compute_returns(panel: &PricePanel, cal: &ExclusionCalendar) -> Result<ReturnPanel> {
    let excluded = apply_exclusions(panel, cal);
    log_returns(&excluded.panel)
}

/// `r_i(t) = ln P_i(t) - ln P_i(t-1)` over consecutive panel dates.
pub fn log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.has_missing() {
        return Err(Error::Integrity(
            "panel has missing cells; run align_and_fill first".into(),
        ));
    }
    if panel.n_dates() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 dates to form returns, panel has {}",
            panel.n_dates()
        )));
    }
    let prices = panel.prices();
    for ((i, j), &p) in prices.indexed_iter() {
        if p <= 0.0 {
            return Err(Error::Domain(format!(
                "non-positive price {p} for instrument {} on {}",
                panel.instruments()[i].label,
                panel.dates()[j]
            )));
        }
    }
    debug_assert!(panel.flags().iter().all(|&f| f != FillFlag::Missing));

    let logs = prices.mapv(f64::ln);
    let (n, t) = prices.dim();
    let mut returns = Array2::zeros((n, t - 1));
    for i in 0..n {
        for j in 1..t {
            returns[[i, j - 1]] = logs[[i, j]] - logs[[i, j - 1]];
        }
    }
    ReturnPanel::new(
        panel.instruments().to_vec(),
        panel.dates()[0],
        panel.dates()[1..].to_vec(),
        returns,
    )
}

/// Population moments of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub sd: f64,
    /// `None` when the series has zero variance.
    pub skewness: Option<f64>,
    /// Raw (non-excess) kurtosis; `None` when the series has zero variance.
    pub kurtosis: Option<f64>,
}

impl SeriesStats {
    pub fn of(values: ArrayView1<'_, f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Parameter("statistics of an empty series".into()));
        }
        let nf = n as f64;
        let mean = values.sum() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
            max = max.max(v);
            min = min.min(v);
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let sd = m2.sqrt();
        let degenerate = is_degenerate_sd(sd, values);
        let (skewness, kurtosis) = if degenerate {
            (None, None)
        } else {
            (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
        };
        Ok(SeriesStats {
            max,
            min,
            mean,
            sd: if degenerate { 0.0 } else { sd },
            skewness,
            kurtosis,
        })
    }
}

/// A standard deviation this small relative to the data scale comes from
/// round-off on a constant series.
pub(crate) fn is_degenerate_sd(sd: f64, values: ArrayView1<'_, f64>) -> bool {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    sd == 0.0 || sd <= 1e-13 * scale
}

/// Table-1 style statistics, one entry per instrument.
#[derive(Debug, Clone, Serialize)]
pub struct DescriptiveStats {
    pub rows: Vec<(InstrumentMeta, SeriesStats)>,
}

pub fn descriptive_stats(rp: &ReturnPanel) -> Result<DescriptiveStats> {
    let rows = rp
        .instruments()
        .iter()
        .zip(rp.returns().rows())
        .map(|(meta, row)| Ok((meta.clone(), SeriesStats::of(row)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DescriptiveStats { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::read_panel;
    use ndarray::{array, Array1};

    fn panel(rows: &[&[f64]]) -> PricePanel {
        let t = rows[0].len();
        let mut csv = String::from("date");
        for i in 0..rows.len() {
            csv.push_str(&format!(",{}", i + 1));
        }
        csv.push('\n');
        for j in 0..t {
            csv.push_str(&format!("2020-01-{:02}", j + 1));
            for r in rows {
                csv.push_str(&format!(",{}", r[j]));
            }
            csv.push('\n');
        }
        read_panel(csv.as_bytes()).unwrap()
    }

    #[test]
    fn flat_price_gives_zero_return() {
        let rp = log_returns(&panel(&[&[100.0, 100.0]])).unwrap();
        assert_eq!(rp.returns()[[0, 0]], 0.0);
    }

    #[test]
    fn ten_percent_move() {
        let rp = log_returns(&panel(&[&[100.0, 110.0]])).unwrap();
        assert!((rp.returns()[[0, 0]] - 0.0953102).abs() < 1e-7);
    }

    #[test]
    fn round_trip_telescopes_to_zero() {
        let rp = log_returns(&panel(&[&[100.0, 110.0, 100.0]])).unwrap();
        let r = rp.returns().row(0);
        assert!((r[0] - 0.0953102).abs() < 1e-7);
        assert!((r[1] + 0.0953102).abs() < 1e-7);
        assert!(r.sum().abs() < 1e-15);
    }

    #[test]
    fn non_positive_price_is_domain_error() {
        let err = log_returns(&panel(&[&[1.0, 2.0], &[3.0, 0.0]])).unwrap_err();
        match err {
            Error::Domain(msg) => assert!(msg.contains("instrument 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exclusion_drops_date_and_spans_gap() {
        let p = panel(&[&[1.0, 2.0, 4.0, 8.0, 16.0]]);
        let excluded = p.dates()[2];
        let rp = compute_returns(&p, &ExclusionCalendar::new([excluded])).unwrap();
        assert_eq!(rp.len(), 3);
        assert!(!rp.dates().contains(&excluded));
        // 2 -> 8 across the removed day
        assert!((rp.returns()[[0, 1]] - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_sample_has_zero_skew() {
        let s = SeriesStats::of(array![-1.0, 0.0, 1.0].view()).unwrap();
        assert_eq!(s.skewness, Some(0.0));
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn two_point_sample_has_unit_kurtosis() {
        let s = SeriesStats::of(array![-1.0, 1.0, -1.0, 1.0].view()).unwrap();
        assert_eq!(s.kurtosis, Some(1.0));
        assert_eq!(s.sd, 1.0);
    }

    #[test]
    fn constant_series_has_undefined_shape() {
        let s = SeriesStats::of(Array1::from_elem(10, 0.3).view()).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.skewness, None);
        assert_eq!(s.kurtosis, None);
    }

    #[test]
    fn gaussian_kurtosis_near_three() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Array1<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = SeriesStats::of(xs.view()).unwrap();
        assert!((s.kurtosis.unwrap() - 3.0).abs() < 0.15);
    }
}
