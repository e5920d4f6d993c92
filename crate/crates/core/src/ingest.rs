//! Loading, aligning and filling panels of daily closing prices.
//!
//! The input is a column-per-instrument CSV (`date,<label1>,<label2>,...`)
//! where an empty field marks a missing price. Lines starting with `#` are
//! comments. Filling follows two rules, applied per instrument:
//!
//! - cells before the first observation take the first observed price
//!   (the listing-day close) and are flagged [`FillFlag::BackfilledFromListing`];
//! - any later gap takes the most recent earlier price, walking back as many
//!   days as needed, and is flagged [`FillFlag::ForwardFilled`].
//!
//! Exclusion dates remove whole date columns from the panel for every
//! instrument at once.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Descriptive metadata for one instrument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentMeta {
    pub label: u32,
    pub name: String,
    pub exchange: String,
    pub country: String,
    pub listing_date: NaiveDate,
    /// Free-form commodity tag (e.g. "wheat"), used to group sector participants.
    #[serde(default)]
    pub commodity: Option<String>,
}

impl InstrumentMeta {
    /// Metadata placeholder for an instrument known only by its label.
    pub fn bare(label: u32, listing_date: NaiveDate) -> Self {
        InstrumentMeta {
            label,
            name: label.to_string(),
            exchange: String::new(),
            country: String::new(),
            listing_date,
            commodity: None,
        }
    }
}

/// Provenance of a single price cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillFlag {
    /// No value yet; only present in raw panels.
    Missing,
    Observed,
    BackfilledFromListing,
    ForwardFilled,
}

impl FillFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FillFlag::Missing => "missing",
            FillFlag::Observed => "observed",
            FillFlag::BackfilledFromListing => "backfilled_from_listing",
            FillFlag::ForwardFilled => "forward_filled",
        }
    }
}

/// An N x T panel of daily prices, one row per instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    instruments: Vec<InstrumentMeta>,
    dates: Vec<NaiveDate>,
    prices: Array2<f64>,
    flags: Array2<FillFlag>,
}

impl PricePanel {
    /// Builds a panel, checking shapes, label uniqueness and date order.
    ///
    /// Missing cells must be flagged [`FillFlag::Missing`] and hold `NaN`;
    /// every other cell must be finite.
    pub fn new(
        instruments: Vec<InstrumentMeta>,
        dates: Vec<NaiveDate>,
        prices: Array2<f64>,
        flags: Array2<FillFlag>,
    ) -> Result<Self> {
        let (n, t) = (instruments.len(), dates.len());
        if prices.dim() != (n, t) || flags.dim() != (n, t) {
            return Err(Error::Integrity(format!(
                "panel shape mismatch: {n} instruments x {t} dates, prices {:?}, flags {:?}",
                prices.dim(),
                flags.dim()
            )));
        }
        let mut seen = HashSet::new();
        for meta in &instruments {
            if meta.label == 0 {
                return Err(Error::Integrity("instrument label 0 is not positive".into()));
            }
            if !seen.insert(meta.label) {
                return Err(Error::Integrity(format!(
                    "duplicate instrument label {}",
                    meta.label
                )));
            }
        }
        for pair in dates.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Integrity(format!(
                    "dates not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        for ((i, j), &flag) in flags.indexed_iter() {
            let p = prices[[i, j]];
            let ok = match flag {
                FillFlag::Missing => p.is_nan(),
                _ => p.is_finite(),
            };
            if !ok {
                return Err(Error::Integrity(format!(
                    "instrument {} on {}: value {p} inconsistent with flag {}",
                    instruments[i].label,
                    dates[j],
                    flag.as_str()
                )));
            }
        }
        Ok(PricePanel {
            instruments,
            dates,
            prices,
            flags,
        })
    }

    /// A fully observed panel.
    pub fn from_observed(
        instruments: Vec<InstrumentMeta>,
        dates: Vec<NaiveDate>,
        prices: Array2<f64>,
    ) -> Result<Self> {
        let flags = Array2::from_elem(prices.dim(), FillFlag::Observed);
        Self::new(instruments, dates, prices, flags)
    }

    pub fn instruments(&self) -> &[InstrumentMeta] {
        &self.instruments
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn flags(&self) -> &Array2<FillFlag> {
        &self.flags
    }

    pub fn n_instruments(&self) -> usize {
        self.instruments.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn has_missing(&self) -> bool {
        self.flags.iter().any(|&f| f == FillFlag::Missing)
    }

    pub fn count_flag(&self, flag: FillFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    /// Cross-sectional average price on each date.
    pub fn mean_price(&self) -> Vec<f64> {
        let n = self.n_instruments() as f64;
        self.prices.columns().into_iter().map(|c| c.sum() / n).collect()
    }

    /// Replaces the placeholder metadata with records from a sidecar, matched
    /// by label. Every instrument in the panel must have a record.
    pub fn with_metadata(mut self, metadata: &[InstrumentMeta]) -> Result<Self> {
        let by_label: HashMap<u32, &InstrumentMeta> =
            metadata.iter().map(|m| (m.label, m)).collect();
        let last = self.dates.last().copied();
        for slot in &mut self.instruments {
            let meta = by_label.get(&slot.label).ok_or_else(|| {
                Error::Integrity(format!("no metadata record for instrument {}", slot.label))
            })?;
            if let Some(last) = last {
                if meta.listing_date > last {
                    return Err(Error::Integrity(format!(
                        "instrument {} listed on {} after the panel ends ({last})",
                        meta.label, meta.listing_date
                    )));
                }
            }
            *slot = (*meta).clone();
        }
        Ok(self)
    }
}

/// Dates whose returns are discarded for every instrument.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl ExclusionCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        ExclusionCalendar {
            dates: dates.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn dates(&self) -> &BTreeSet<NaiveDate> {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn contains(&self, date: &NaiveDate) -> bool {
        self.dates.contains(date)
    }

    /// One ISO-8601 date per line; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dates = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let date = parse_date(content)
                .map_err(|msg| Error::parse(format!("line {}", lineno + 1), msg))?;
            dates.insert(date);
        }
        Ok(ExclusionCalendar { dates })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Result of [`apply_exclusions`].
#[derive(Debug, Clone)]
pub struct Excluded {
    pub panel: PricePanel,
    /// Calendar dates that were not in the panel and were therefore ignored.
    pub ignored: Vec<NaiveDate>,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| format!("invalid date {:?}: {e}", s.trim()))
}

/// Reads a raw panel from a file. See [`read_panel`].
pub fn load_panel(path: impl AsRef<Path>) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel(file)
}

/// Reads a raw, possibly gappy panel. Rows are sorted by date; instrument
/// order follows column order. Placeholder metadata lists each instrument
/// as listed on its first observation.
pub fn read_panel<R: Read>(reader: R) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::parse(
            "header",
            "expected `date` followed by at least one instrument column",
        ));
    }
    let mut labels = Vec::with_capacity(headers.len() - 1);
    for h in headers.iter().skip(1) {
        let label: u32 = h
            .parse()
            .ok()
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::parse("header", format!("label {h:?} is not a positive integer")))?;
        labels.push(label);
    }
    let n = labels.len();

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(&record[0]).map_err(|m| Error::parse(format!("row at line {line}"), m))?;
        let mut cells = Vec::with_capacity(n);
        for (col, field) in record.iter().skip(1).enumerate() {
            if field.is_empty() {
                cells.push(None);
                continue;
            }
            let value: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(
                        format!("line {line}, column {} (instrument {})", col + 2, labels[col]),
                        format!("non-numeric value {field:?}"),
                    )
                })?;
            cells.push(Some(value));
        }
        rows.push((date, cells));
    }

    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Integrity(format!("duplicate date {}", pair[0].0)));
        }
    }

    let t = rows.len();
    let mut prices = Array2::from_elem((n, t), f64::NAN);
    let mut flags = Array2::from_elem((n, t), FillFlag::Missing);
    for (j, (_, cells)) in rows.iter().enumerate() {
        for (i, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                prices[[i, j]] = *v;
                flags[[i, j]] = FillFlag::Observed;
            }
        }
    }
    let dates: Vec<NaiveDate> = rows.into_iter().map(|(d, _)| d).collect();
    let instruments = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let first = (0..t)
                .find(|&j| flags[[i, j]] == FillFlag::Observed)
                .or(if t > 0 { Some(0) } else { None });
            let listed = first.map(|j| dates[j]).unwrap_or(NaiveDate::MIN);
            InstrumentMeta::bare(label, listed)
        })
        .collect();
    PricePanel::new(instruments, dates, prices, flags)
}

#[derive(Debug, Deserialize)]
struct MetaRecord {
    label: u32,
    name: String,
    exchange: String,
    country: String,
    listing_date: String,
    #[serde(default)]
    commodity: Option<String>,
}

/// Reads the `label,name,exchange,country,listing_date[,commodity]` sidecar.
pub fn read_metadata<R: Read>(reader: R) -> Result<Vec<InstrumentMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.deserialize::<MetaRecord>() {
        let rec = record?;
        if rec.label == 0 || !seen.insert(rec.label) {
            return Err(Error::Integrity(format!(
                "metadata label {} is zero or duplicated",
                rec.label
            )));
        }
        let listing_date = parse_date(&rec.listing_date)
            .map_err(|m| Error::parse(format!("metadata for instrument {}", rec.label), m))?;
        out.push(InstrumentMeta {
            label: rec.label,
            name: rec.name,
            exchange: rec.exchange,
            country: rec.country,
            listing_date,
            commodity: rec.commodity.filter(|c| !c.is_empty()),
        });
    }
    Ok(out)
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<Vec<InstrumentMeta>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_metadata(file)
}

/// Writes a panel in the same CSV layout [`read_panel`] accepts. Prices use
/// the shortest decimal form that round-trips exactly; missing cells are empty.
pub fn write_panel<W: Write>(panel: &PricePanel, writer: W, comment: Option<&str>) -> Result<()> {
    let mut writer = writer;
    if let Some(comment) = comment {
        for line in comment.lines() {
            writeln!(writer, "# {line}").map_err(|e| Error::io("<panel output>", e))?;
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.instruments.iter().map(|m| m.label.to_string()));
    wtr.write_record(&header)?;
    for (j, date) in panel.dates.iter().enumerate() {
        let mut row = Vec::with_capacity(panel.n_instruments() + 1);
        row.push(date.format(DATE_FORMAT).to_string());
        for i in 0..panel.n_instruments() {
            if panel.flags[[i, j]] == FillFlag::Missing {
                row.push(String::new());
            } else {
                row.push(panel.prices[[i, j]].to_string());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<panel output>", e))?;
    Ok(())
}

pub fn write_metadata<W: Write>(metadata: &[InstrumentMeta], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["label", "name", "exchange", "country", "listing_date", "commodity"])?;
    for m in metadata {
        wtr.write_record([
            m.label.to_string(),
            m.name.clone(),
            m.exchange.clone(),
            m.country.clone(),
            m.listing_date.format(DATE_FORMAT).to_string(),
            m.commodity.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<metadata output>", e))?;
    Ok(())
}

/// Resolves every missing cell. Idempotent: an already filled panel is
/// returned unchanged.
pub fn align_and_fill(raw: &PricePanel) -> Result<PricePanel> {
    let mut prices = raw.prices.clone();
    let mut flags = raw.flags.clone();
    for (i, meta) in raw.instruments.iter().enumerate() {
        let mut row_p = prices.row_mut(i);
        let mut row_f = flags.row_mut(i);
        let first = row_f
            .iter()
            .position(|&f| f != FillFlag::Missing)
            .ok_or_else(|| {
                Error::Integrity(format!("instrument {} has no observed prices", meta.label))
            })?;
        let listing_price = row_p[first];
        for j in 0..first {
            row_p[j] = listing_price;
            row_f[j] = FillFlag::BackfilledFromListing;
        }
        for j in first + 1..row_p.len() {
            if row_f[j] == FillFlag::Missing {
                row_p[j] = row_p[j - 1];
                row_f[j] = FillFlag::ForwardFilled;
            }
        }
    }
    PricePanel::new(raw.instruments.clone(), raw.dates.clone(), prices, flags)
}

/// Removes the calendar's dates from the panel for all instruments.
/// Dates absent from the panel are reported in [`Excluded::ignored`].
pub fn apply_exclusions(panel: &PricePanel, cal: &ExclusionCalendar) -> Excluded {
    let present: HashSet<NaiveDate> = panel.dates.iter().copied().collect();
    let ignored: Vec<NaiveDate> = cal.dates.iter().filter(|d| !present.contains(d)).copied().collect();
    let keep: Vec<usize> = (0..panel.n_dates())
        .filter(|&j| !cal.contains(&panel.dates[j]))
        .collect();
    if keep.len() == panel.n_dates() {
        return Excluded {
            panel: panel.clone(),
            ignored,
        };
    }
    let dates = keep.iter().map(|&j| panel.dates[j]).collect();
    let prices = panel.prices.select(ndarray::Axis(1), &keep);
    let flags = panel.flags.select(ndarray::Axis(1), &keep);
    Excluded {
        panel: PricePanel {
            instruments: panel.instruments.clone(),
            dates,
            prices,
            flags,
        },
        ignored,
    }
}
