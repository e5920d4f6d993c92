//! Writers for every table and figure, shared by the single-stage
//! subcommands and `report`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use eigenmarket::corrcore::{CoefficientDistribution, CorrelationMatrix};
use eigenmarket::eigenanalysis::{Eigenportfolio, IndexSeries, IprSeries, LinearityTest};
use eigenmarket::histogram::Histogram;
use eigenmarket::ingest::{FillFlag, PricePanel};
use eigenmarket::marketmode::{MarketModeRemoval, PairReport, SectorReport, Sign};
use eigenmarket::returns::{DescriptiveStats, ReturnPanel};
use eigenmarket::spectrum::{DeviationReport, MarchenkoPasturLaw, SpectralDecomposition};
use serde_json::{json, Value};

use crate::error::{CliError, ResultExt};
use crate::format::Fmt;
use crate::svg::{Chart, BLUE, GREEN, GREY, ORANGE, RED};

/// File names, kept here so the manifest plan and the writers agree.
pub mod names {
    pub const PANEL: &str = "panel.csv";
    pub const FILL_FLAGS: &str = "fill_flags.csv";
    pub const INGEST: &str = "ingest.json";
    pub const STATS: &str = "stats.csv";
    pub const CORRELATION: &str = "correlation.csv";
    pub const COEFFICIENTS_CSV: &str = "coefficients.csv";
    pub const COEFFICIENTS_JSON: &str = "coefficients.json";
    pub const COEFFICIENTS_SVG: &str = "coefficients.svg";
    pub const EIGENVALUES: &str = "eigenvalues.csv";
    pub const MP: &str = "mp.json";
    pub const SPECTRUM_SVG: &str = "spectrum.svg";
    pub const IPR_CSV: &str = "ipr.csv";
    pub const IPR_SVG: &str = "ipr.svg";
    pub const LINEARITY: &str = "linearity.json";
    pub const INDEX_CSV: &str = "index.csv";
    pub const INDEX_SVG: &str = "index.svg";
    pub const REGRESSION: &str = "regression.csv";
    pub const RESIDUAL_EIGENVALUES: &str = "residual_eigenvalues.csv";
    pub const RESIDUAL_MP: &str = "residual_mp.json";
    pub const BEFORE_AFTER_CSV: &str = "coefficients_before_after.csv";
    pub const BEFORE_AFTER_SVG: &str = "coefficients_before_after.svg";
    pub const SECTORS_CSV: &str = "sectors.csv";
    pub const SECTORS_JSON: &str = "sectors.json";
    pub const PAIRS_CSV: &str = "pairs.csv";
    pub const PAIRS_JSON: &str = "pairs.json";
    pub const MANIFEST: &str = "manifest.json";

    pub fn portfolio_csv(rank: usize) -> String {
        format!("portfolio_{rank}.csv")
    }

    pub fn portfolio_svg(rank: usize) -> String {
        format!("portfolio_{rank}.svg")
    }

    pub fn sector_svg(rank: usize) -> String {
        format!("sector_{rank}.svg")
    }

    /// `position` 1 is the smallest reported residual eigenvector.
    pub fn pair_svg(position: usize) -> String {
        format!("pair_{position}.svg")
    }
}

/// Output directory plus number formatting; records every file written.
#[derive(Debug)]
pub struct Out {
    dir: PathBuf,
    pub fmt: Fmt,
    written: Vec<String>,
}

impl Out {
    pub fn create(dir: &Path, fmt: Fmt) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Out {
            dir: dir.to_path_buf(),
            fmt,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Input(format!("cannot format {name}: {e}"));
        wtr.write_record(header).map_err(fail)?;
        for row in rows {
            wtr.write_record(&row).map_err(fail)?;
        }
        let buf = wtr
            .into_inner()
            .map_err(|e| CliError::Input(format!("cannot format {name}: {e}")))?;
        self.bytes(name, &buf)
    }

    pub fn json(&mut self, name: &str, value: Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.fmt.json(value)).expect("JSON value serializes");
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, chart: &Chart) -> Result<(), CliError> {
        self.bytes(name, chart.render().as_bytes())
    }
}

fn date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn histogram_rows(fmt: Fmt, h: &Histogram) -> Vec<Vec<String>> {
    h.densities
        .iter()
        .enumerate()
        .map(|(k, d)| vec![fmt.num(h.edges[k]), fmt.num(h.edges[k + 1]), fmt.num(*d)])
        .collect()
}

/// Filled panel, per-cell fill flags and a summary.
pub fn ingest(out: &mut Out, filled: &PricePanel, kept: &PricePanel, ignored: &[NaiveDate]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    eigenmarket::ingest::write_panel(kept, &mut buf, None).into_input()?;
    out.bytes(names::PANEL, &buf)?;

    let mut header = vec!["date".to_string()];
    header.extend(kept.instruments().iter().map(|m| m.label.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = kept.dates().iter().enumerate().map(|(j, d)| {
        let mut row = vec![date(*d)];
        row.extend((0..kept.n_instruments()).map(|i| kept.flags()[[i, j]].as_str().to_string()));
        row
    });
    out.csv(names::FILL_FLAGS, &header, rows)?;

    let count = |flag| filled.count_flag(flag);
    out.json(
        names::INGEST,
        json!({
            "instruments": kept.n_instruments(),
            "dates": kept.n_dates(),
            "first_date": kept.dates().first().map(|d| date(*d)),
            "last_date": kept.dates().last().map(|d| date(*d)),
            "cells": {
                "observed": count(FillFlag::Observed),
                "backfilled_from_listing": count(FillFlag::BackfilledFromListing),
                "forward_filled": count(FillFlag::ForwardFilled),
                "missing": count(FillFlag::Missing),
            },
            "excluded_dates_removed": filled.n_dates() - kept.n_dates(),
            "excluded_dates_not_in_panel": ignored.iter().map(|d| date(*d)).collect::<Vec<_>>(),
        }),
    )
}

/// Table-1 layout with the mean scaled by 10^4.
pub fn stats(out: &mut Out, ds: &DescriptiveStats) -> Result<(), CliError> {
    let f = out.fmt;
    let rows = ds.rows.iter().map(|(m, s)| {
        vec![
            m.label.to_string(),
            m.name.clone(),
            m.exchange.clone(),
            m.country.clone(),
            date(m.listing_date),
            f.num(s.max),
            f.num(s.min),
            f.num(s.mean * 1e4),
            f.num(s.sd),
            f.opt(s.skewness),
            f.opt(s.kurtosis),
        ]
    });
    out.csv(
        names::STATS,
        &["label", "name", "exchange", "country", "listing_date", "max", "min", "mean_e4", "sd", "skewness", "kurtosis"],
        rows.collect::<Vec<_>>(),
    )
}

/// Full matrix, coefficient histogram and its moments.
pub fn coefficients(out: &mut Out, cm: &CorrelationMatrix, dist: &CoefficientDistribution) -> Result<(), CliError> {
    let f = out.fmt;
    let labels: Vec<String> = cm.instruments().iter().map(|m| m.label.to_string()).collect();
    let mut header = vec![""];
    header.extend(labels.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..cm.n())
        .map(|i| {
            let mut row = vec![labels[i].clone()];
            row.extend((0..cm.n()).map(|j| f.num(cm.get(i, j))));
            row
        })
        .collect();
    out.csv(names::CORRELATION, &header, rows)?;
    out.csv(
        names::COEFFICIENTS_CSV,
        &["bin_left", "bin_right", "density"],
        histogram_rows(f, &dist.histogram),
    )?;
    out.json(
        names::COEFFICIENTS_JSON,
        json!({
            "count": dist.count,
            "mean": dist.mean,
            "sd": dist.sd,
            "skewness": dist.skewness,
            "kurtosis": dist.kurtosis,
        }),
    )?;
    let h = &dist.histogram;
    let chart = Chart::new("Distribution of correlation coefficients", "c_ij", "P(c_ij)")
        .histogram(&h.edges, &h.densities, BLUE, "empirical")
        .vline(dist.mean, RED, "mean");
    out.svg(names::COEFFICIENTS_SVG, &chart)
}

fn eigenvalue_rows(fmt: Fmt, sd: &SpectralDecomposition, rep: &DeviationReport) -> Vec<Vec<String>> {
    sd.eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let class = rep.class_of(k + 1).map(|c| c.as_str()).unwrap_or("bulk");
            vec![(k + 1).to_string(), fmt.num(*l), class.to_string()]
        })
        .collect()
}

fn law_json(law: &MarchenkoPasturLaw) -> Value {
    to_json(law)
}

fn mp_curve(law: &MarchenkoPasturLaw) -> Vec<(f64, f64)> {
    let steps = 200;
    (0..=steps)
        .map(|s| {
            let l = law.lambda_min + (law.lambda_max - law.lambda_min) * s as f64 / steps as f64;
            (l, law.density(l))
        })
        .collect()
}

/// Eigenvalues with their class, the law's parameters and the overlay of
/// the empirical density with the theoretical one.
pub fn spectrum(
    out: &mut Out,
    sd: &SpectralDecomposition,
    law: &MarchenkoPasturLaw,
    rep: &DeviationReport,
    bins: usize,
) -> Result<(), CliError> {
    let f = out.fmt;
    out.csv(names::EIGENVALUES, &["rank", "lambda", "class"], eigenvalue_rows(f, sd, rep))?;
    out.json(names::MP, law_json(law))?;
    // bulk only, so the largest eigenvalue does not flatten the picture
    let hi = law.lambda_max * 1.5;
    let vals: Vec<f64> = sd.eigenvalues().iter().copied().filter(|l| *l <= hi).collect();
    let h = Histogram::from_samples(&vals, bins, 0.0, hi).in_module("spectrum")?;
    let scale = vals.len() as f64 / sd.n() as f64;
    let dens: Vec<f64> = h.densities.iter().map(|d| d * scale).collect();
    let chart = Chart::new("Eigenvalue density", "lambda", "P(lambda)")
        .histogram(&h.edges, &dens, BLUE, "empirical")
        .line(mp_curve(law), RED, "Marchenko-Pastur")
        .vline(law.lambda_min, GREY, "")
        .vline(law.lambda_max, GREY, "");
    out.svg(names::SPECTRUM_SVG, &chart)
}

pub fn ipr(out: &mut Out, sd: &SpectralDecomposition, series: &IprSeries, law: &MarchenkoPasturLaw) -> Result<(), CliError> {
    let f = out.fmt;
    let rows: Vec<Vec<String>> = series
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| vec![(k + 1).to_string(), f.num(sd.eigenvalues()[k]), f.num(*v)])
        .collect();
    out.csv(names::IPR_CSV, &["rank", "lambda", "ipr"], rows)?;
    let points = sd.eigenvalues().iter().copied().zip(series.values.iter().copied()).collect();
    let chart = Chart::new("Inverse participation ratio", "lambda", "I")
        .scatter(points, BLUE, "I^k")
        .hline(series.mean, ORANGE, "mean")
        .hline(1.0 / sd.n() as f64, GREY, "1/N")
        .vline(law.lambda_min, GREY, "")
        .vline(law.lambda_max, GREY, "");
    out.svg(names::IPR_SVG, &chart)
}

/// One eigenportfolio: its return series and the scatter against the
/// cross-sectional mean return.
pub fn portfolio(out: &mut Out, ep: &Eigenportfolio, fit: &LinearityTest, rp: &ReturnPanel) -> Result<(), CliError> {
    let f = out.fmt;
    let k = ep.rank;
    let col = format!("G_{k}");
    let rows: Vec<Vec<String>> = ep.dates.iter().zip(&ep.returns).map(|(d, g)| vec![date(*d), f.num(*g)]).collect();
    out.csv(&names::portfolio_csv(k), &["date", &col], rows)?;
    let mean = rp.mean_return();
    let points: Vec<(f64, f64)> = ep.returns.iter().copied().zip(mean.iter().copied()).collect();
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, _)| (a.min(*x), b.max(*x)));
    let fitted = vec![(lo, fit.intercept + fit.slope * lo), (hi, fit.intercept + fit.slope * hi)];
    let chart = Chart::new(
        &format!("Mean return against G^{k} (R^2 = {})", crate::format::general(fit.r_squared, 4)),
        &format!("G^{k}"),
        "<r>",
    )
    .scatter(points, BLUE, "days")
    .line(fitted, RED, "OLS fit");
    out.svg(&names::portfolio_svg(k), &chart)
}

pub fn linearity(out: &mut Out, fits: &[(&Eigenportfolio, LinearityTest)]) -> Result<(), CliError> {
    let items: Vec<Value> = fits
        .iter()
        .map(|(ep, fit)| {
            json!({
                "rank": ep.rank,
                "normalizer": ep.normalizer,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
            })
        })
        .collect();
    out.json(names::LINEARITY, Value::Array(items))
}

/// Index against the cross-sectional mean price on the same dates.
pub fn index(out: &mut Out, idx: &IndexSeries, mean_price: &[f64]) -> Result<(), CliError> {
    let f = out.fmt;
    let rows: Vec<Vec<String>> = idx
        .dates
        .iter()
        .zip(&idx.values)
        .zip(mean_price)
        .map(|((d, v), p)| vec![date(*d), f.num(*v), f.num(*p)])
        .collect();
    out.csv(names::INDEX_CSV, &["date", "afpi", "mean_price"], rows)?;
    let x: Vec<f64> = (0..idx.values.len()).map(|i| i as f64).collect();
    let chart = Chart::new("Market index and mean price", "trading day", "price")
        .line(x.iter().copied().zip(idx.values.iter().copied()).collect(), RED, "index")
        .line(x.iter().copied().zip(mean_price.iter().copied()).collect(), BLUE, "mean price");
    out.svg(names::INDEX_SVG, &chart)
}

/// Regression coefficients, residual spectrum and the coefficient
/// distribution before and after removal on common bins.
pub fn market_removal(
    out: &mut Out,
    mr: &MarketModeRemoval,
    original: &CorrelationMatrix,
    law: &MarchenkoPasturLaw,
    rep: &DeviationReport,
    bins: usize,
) -> Result<(), CliError> {
    let f = out.fmt;
    let rows: Vec<Vec<String>> = mr
        .instruments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                m.label.to_string(),
                f.num(mr.alphas[i]),
                f.num(mr.betas[i]),
                mr.excluded.contains(&m.label).to_string(),
            ]
        })
        .collect();
    out.csv(names::REGRESSION, &["label", "alpha", "beta", "excluded"], rows)?;
    out.csv(
        names::RESIDUAL_EIGENVALUES,
        &["rank", "lambda", "class"],
        eigenvalue_rows(f, &mr.residual_spectrum, rep),
    )?;
    out.json(names::RESIDUAL_MP, law_json(law))?;

    let before = original.upper_triangle();
    let after = mr.residual_corr.upper_triangle();
    let (lo, hi) = before
        .iter()
        .chain(&after)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(*c), b.max(*c)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let hb = Histogram::from_samples(&before, bins, lo, hi).in_module("marketmode")?;
    let ha = Histogram::from_samples(&after, bins, lo, hi).in_module("marketmode")?;
    let rows: Vec<Vec<String>> = (0..bins)
        .map(|k| {
            vec![
                f.num(hb.edges[k]),
                f.num(hb.edges[k + 1]),
                f.num(hb.densities[k]),
                f.num(ha.densities[k]),
            ]
        })
        .collect();
    out.csv(
        names::BEFORE_AFTER_CSV,
        &["bin_left", "bin_right", "density_before", "density_after"],
        rows,
    )?;
    let chart = Chart::new("Correlation coefficients before and after market removal", "c_ij", "P(c_ij)")
        .histogram(&hb.edges, &hb.densities, BLUE, "before")
        .histogram(&ha.edges, &ha.densities, ORANGE, "after");
    out.svg(names::BEFORE_AFTER_SVG, &chart)
}

/// Table-2 layout plus groupings and one component plot per rank.
pub fn sectors(out: &mut Out, rep: &SectorReport, mr: &MarketModeRemoval) -> Result<(), CliError> {
    let f = out.fmt;
    let mut rows = Vec::new();
    for e in &rep.eigenvectors {
        for p in &e.participants {
            rows.push(vec![
                e.rank.to_string(),
                p.sign.as_str().to_string(),
                p.label.to_string(),
                p.name.clone(),
                p.exchange.clone(),
                p.country.clone(),
                f.num(p.component),
            ]);
        }
    }
    out.csv(
        names::SECTORS_CSV,
        &["eigenvector", "sign", "label", "name", "exchange", "country", "component"],
        rows,
    )?;
    out.json(names::SECTORS_JSON, to_json(rep))?;

    let sd = &mr.residual_spectrum;
    let level = rep.threshold_factor / (sd.n() as f64).sqrt();
    for e in &rep.eigenvectors {
        let orient = if e.flipped { -1.0 } else { 1.0 };
        let u: Vec<f64> = sd
            .eigenvector(e.rank)
            .expect("rank validated by sector_report")
            .iter()
            .map(|c| orient * c)
            .collect();
        let chart = Chart::new(
            &format!("Residual eigenvector u^{} (lambda = {})", e.rank, crate::format::general(e.eigenvalue, 4)),
            "instrument position",
            "component",
        )
        .stems(&u, BLUE, "")
        .hline(level, RED, "significance")
        .hline(-level, RED, "significance");
        out.svg(&names::sector_svg(e.rank), &chart)?;
    }
    Ok(())
}

/// Pair table and one component plot per reported eigenvector.
pub fn pairs(out: &mut Out, rep: &PairReport, mr: &MarketModeRemoval) -> Result<(), CliError> {
    let f = out.fmt;
    let sign = |s: Sign| s.as_str().to_string();
    let rows: Vec<Vec<String>> = rep
        .entries
        .iter()
        .map(|e| {
            vec![
                e.rank.to_string(),
                e.label_a.to_string(),
                e.label_b.to_string(),
                sign(e.sign_a),
                sign(e.sign_b),
                f.num(e.c_ij),
            ]
        })
        .collect();
    out.csv(
        names::PAIRS_CSV,
        &["eigenvector_rank", "label_a", "label_b", "sign_a", "sign_b", "c_ij"],
        rows,
    )?;
    out.json(names::PAIRS_JSON, to_json(rep))?;

    let sd = &mr.residual_spectrum;
    for (pos, e) in rep.entries.iter().enumerate() {
        let u: Vec<f64> = sd.eigenvector(e.rank).expect("rank from report").to_vec();
        let chart = Chart::new(
            &format!(
                "Residual eigenvector u^{}: pair {} / {} (c = {})",
                e.rank,
                e.label_a,
                e.label_b,
                crate::format::general(e.c_ij, 3)
            ),
            "instrument position",
            "component",
        )
        .stems(&u, if e.dominant { GREEN } else { GREY }, "");
        out.svg(&names::pair_svg(pos + 1), &chart)?;
    }
    Ok(())
}
