//! HICP index and ZCIIS quote files, the inflation state derived from them,
//! and per-date quote panels.
//!
//! File formats (UTF-8, ISO dates, header row required):
//!
//! * HICP: `date,index`
//! * quotes: `date,maturity_years,rate_percent`
//! * ECB official rate (optional): `date,rate_percent`

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default trailing window for `σ_Π`, in monthly increments.
pub const DEFAULT_SIGMA_WINDOW: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct HicpSeries {
    dates: Vec<NaiveDate>,
    index: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct HicpRow {
    date: NaiveDate,
    index: f64,
}

impl HicpSeries {
    /// Sorts by date; rejects duplicates and non-positive levels, warns on
    /// gaps between consecutive months.
    pub fn new(mut rows: Vec<(NaiveDate, f64)>) -> Result<Self> {
        rows.sort_by_key(|r| r.0);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Data(format!("duplicate HICP date {}", w[0].0)));
            }
            if months_between(w[0].0, w[1].0) != 1 {
                warn!("HICP gap between {} and {}", w[0].0, w[1].0);
            }
        }
        if let Some(&(d, v)) = rows.iter().find(|r| !(r.1 > 0.0 && r.1.is_finite())) {
            return Err(Error::Data(format!("HICP level {v} on {d} must be positive")));
        }
        let (dates, index) = rows.into_iter().unzip();
        Ok(Self { dates, index })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn levels(&self) -> &[f64] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn read<R: Read>(rdr: R) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr).deserialize() {
            let r: HicpRow = rec?;
            rows.push((r.date, r.index));
        }
        Self::new(rows)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (&date, &index) in self.dates.iter().zip(&self.index) {
            w.serialize(HicpRow { date, index })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn months_between(a: NaiveDate, b: NaiveDate) -> i32 {
    (b.year() - a.year()) * 12 + b.month() as i32 - a.month() as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub date: NaiveDate,
    pub maturity_years: f64,
    pub rate_percent: f64,
}

/// Reads a quote file; rows come back sorted by date then maturity.
/// Maturities outside `[1, 30]` years are kept but warned about.
pub fn read_quotes<R: Read>(rdr: R) -> Result<Vec<QuoteRow>> {
    let mut rows = Vec::new();
    for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr).deserialize() {
        let q: QuoteRow = rec?;
        if !(q.maturity_years.is_finite() && q.rate_percent.is_finite()) {
            return Err(Error::Data(format!("non-finite quote on {}", q.date)));
        }
        if q.maturity_years <= 0.0 {
            return Err(Error::Data(format!(
                "maturity {} on {} must be positive",
                q.maturity_years, q.date
            )));
        }
        if !(1.0..=30.0).contains(&q.maturity_years) {
            warn!("maturity {} years on {} outside [1, 30]", q.maturity_years, q.date);
        }
        rows.push(q);
    }
    rows.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then(a.maturity_years.total_cmp(&b.maturity_years))
    });
    Ok(rows)
}

pub fn read_quotes_path(path: impl AsRef<Path>) -> Result<Vec<QuoteRow>> {
    read_quotes(std::fs::File::open(path)?)
}

pub fn write_quotes<W: Write>(rows: &[QuoteRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Step function of the ECB official rate, in decimals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EcbRateSeries {
    points: BTreeMap<NaiveDate, f64>,
}

#[derive(Debug, Deserialize)]
struct EcbRow {
    date: NaiveDate,
    rate_percent: f64,
}

impl EcbRateSeries {
    pub fn from_points(points: impl IntoIterator<Item = (NaiveDate, f64)>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    pub fn read<R: Read>(rdr: R) -> Result<Self> {
        let mut points = BTreeMap::new();
        for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr).deserialize() {
            let r: EcbRow = rec?;
            if !r.rate_percent.is_finite() {
                return Err(Error::Data(format!("non-finite ECB rate on {}", r.date)));
            }
            points.insert(r.date, r.rate_percent / 100.0);
        }
        Ok(Self { points })
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    /// Rate in force on `date` (last change on or before it).
    pub fn at(&self, date: NaiveDate) -> Option<f64> {
        self.points.range(..=date).next_back().map(|(_, &r)| r)
    }
}

/// `Π(t_i) = 12 ln(I_i / I_{i−1})` for `i ≥ 1`, dated at `t_i`.
pub fn derive_inflation(h: &HicpSeries) -> Result<Vec<(NaiveDate, f64)>> {
    if h.len() < 2 {
        return Err(Error::Data("need at least two HICP observations".into()));
    }
    Ok(h.index
        .windows(2)
        .zip(&h.dates[1..])
        .map(|(w, &d)| (d, 12.0 * (w[1] / w[0]).ln()))
        .collect())
}

/// Sample standard deviation of the last `window` increments of `series`.
pub fn sigma_pi(series: &[f64], window: usize) -> Result<f64> {
    if window < 2 {
        return Err(Error::Data("sigma window must hold at least 2 increments".into()));
    }
    if series.len() < window + 1 {
        return Err(Error::Data(format!(
            "{} inflation values give fewer than {window} increments",
            series.len()
        )));
    }
    let tail = &series[series.len() - window - 1..];
    let inc: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len() as f64;
    let mean = inc.iter().sum::<f64>() / n;
    let var = inc.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// One observation date's quotes and inflation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotePanel {
    pub date: NaiveDate,
    pub maturities: Vec<f64>,
    pub rates_percent: Vec<f64>,
    /// Current annualized log-inflation `Π(t_j)`.
    pub pi: f64,
    pub sigma_pi: f64,
    /// ECB official rate (decimal) when known from data.
    pub ecb_rate: Option<f64>,
}

impl QuotePanel {
    pub fn validate(&self) -> Result<()> {
        if self.maturities.is_empty() {
            return Err(Error::Data(format!("panel {} holds no quotes", self.date)));
        }
        if self.maturities.len() != self.rates_percent.len() {
            return Err(Error::Data("maturity and rate counts differ".into()));
        }
        if self.maturities.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "maturities on {} must be strictly increasing",
                self.date
            )));
        }
        if self.rates_percent.iter().any(|x| !x.is_finite()) || !self.pi.is_finite() {
            return Err(Error::Data(format!("non-finite values on {}", self.date)));
        }
        if !(self.sigma_pi > 0.0 && self.sigma_pi.is_finite()) {
            return Err(Error::Data(format!(
                "sigma_pi = {} on {} must be positive",
                self.sigma_pi, self.date
            )));
        }
        Ok(())
    }
}

/// Groups quotes by date and attaches `Π(t_j)` and `σ_Π` from the HICP
/// history up to that date. Dates without an HICP observation are skipped
/// with a warning; when fewer than `window` increments are available the
/// whole history is used (at least 2 increments).
pub fn build_panels(
    quotes: &[QuoteRow],
    hicp: &HicpSeries,
    window: usize,
    ecb: Option<&EcbRateSeries>,
) -> Result<Vec<QuotePanel>> {
    let mut by_date: BTreeMap<NaiveDate, Vec<(f64, f64)>> = BTreeMap::new();
    for q in quotes {
        by_date
            .entry(q.date)
            .or_default()
            .push((q.maturity_years, q.rate_percent));
    }
    if by_date.is_empty() {
        return Ok(Vec::new());
    }
    let infl = derive_inflation(hicp)?;
    let mut panels = Vec::new();
    for (date, mut rows) in by_date {
        let Some(pos) = infl.iter().position(|&(d, _)| d == date) else {
            warn!("quotes on {date} have no HICP observation; skipped");
            continue;
        };
        let history: Vec<f64> = infl[..=pos].iter().map(|&(_, p)| p).collect();
        let avail = history.len().saturating_sub(1);
        let w = if avail >= window {
            window
        } else if avail >= 2 {
            warn!("{date}: only {avail} inflation increments for sigma (window {window})");
            avail
        } else {
            warn!("{date}: too little HICP history for sigma; skipped");
            continue;
        };
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::Data(format!("duplicate maturity on {date}")));
        }
        let panel = QuotePanel {
            date,
            maturities: rows.iter().map(|r| r.0).collect(),
            rates_percent: rows.iter().map(|r| r.1).collect(),
            pi: history[pos],
            sigma_pi: sigma_pi(&history, w)?,
            ecb_rate: ecb.and_then(|e| e.at(date)),
        };
        panel.validate()?;
        panels.push(panel);
    }
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn inflation_from_index() {
        let h = HicpSeries::new(vec![
            (d(2008, 1, 31), 100.0),
            (d(2008, 2, 29), 100.5),
            (d(2008, 3, 31), 100.2),
        ])
        .unwrap();
        let p = derive_inflation(&h).unwrap();
        assert_eq!(p[0].1, 12.0 * (100.5f64 / 100.0).ln());
        assert_eq!(p[1].1, 12.0 * (100.2f64 / 100.5).ln());
        let flat = HicpSeries::new(vec![(d(2008, 1, 31), 50.0), (d(2008, 2, 29), 50.0)]).unwrap();
        assert_eq!(derive_inflation(&flat).unwrap()[0].1, 0.0);
    }

    #[test]
    fn sigma_of_alternating_increments() {
        let a = 0.01;
        // Π alternates 0, a, 0, a, ... so increments alternate ±a
        let series: Vec<f64> = (0..11).map(|i| if i % 2 == 0 { 0.0 } else { a }).collect();
        let s = sigma_pi(&series, 10).unwrap();
        // mean of increments is 0 for an even count
        assert!((s - a * (10.0f64 / 9.0).sqrt()).abs() < 1e-15);
        assert_eq!(sigma_pi(&[0.02; 8], 5).unwrap(), 0.0);
        assert!(sigma_pi(&series, 11).is_err());
    }

    #[test]
    fn ecb_rate_is_a_step_function() {
        let e = EcbRateSeries::from_points([(d(2008, 7, 9), 0.0425), (d(2008, 10, 15), 0.0375)]);
        assert_eq!(e.at(d(2008, 7, 1)), None);
        assert_eq!(e.at(d(2008, 9, 30)), Some(0.0425));
        assert_eq!(e.at(d(2008, 10, 15)), Some(0.0375));
    }

    #[test]
    fn rejects_bad_index() {
        assert!(HicpSeries::new(vec![(d(2008, 1, 31), 0.0), (d(2008, 2, 29), 1.0)]).is_err());
        assert!(HicpSeries::new(vec![(d(2008, 1, 31), 1.0), (d(2008, 1, 31), 1.0)]).is_err());
    }
}
