//! Synthetic HICP and quote files generated from known parameters.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::{Months, NaiveDate};
use ecb_inflation::calibration::{model_rates, CalibSpec, ModelKind};
use ecb_inflation::data_io::{
    build_panels, write_quotes, HicpSeries, QuoteRow, DEFAULT_SIGMA_WINDOW,
};

pub const TRUTH_OURS: [f64; 8] = [0.2, 0.3, 1.5, 0.8, 0.05, 0.004, 0.9, 0.015];
pub const MATURITIES: [f64; 8] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];

pub fn ecbinfl() -> &'static str {
    env!("CARGO_BIN_EXE_ecbinfl")
}

/// Monthly HICP levels whose annualized log changes alternate around
/// `π* + 0.6%`, over `months + 1` observations starting January 2007.
pub fn synthetic_hicp(months: usize) -> HicpSeries {
    let start = NaiveDate::from_ymd_opt(2007, 1, 1).unwrap();
    let centre = 1.02f64.ln() + 0.006;
    let mut level = 100.0;
    let mut rows = vec![(start, level)];
    for i in 1..=months {
        let pi = centre + if i % 2 == 0 { 0.004 } else { -0.004 };
        level *= (pi / 12.0).exp();
        rows.push((start + Months::new(i as u32), level));
    }
    HicpSeries::new(rows).unwrap()
}

/// Writes `hicp.csv` and `quotes.csv` into `dir`: quotes on the last
/// `dates` HICP dates, priced by our model at [`TRUTH_OURS`] on `spec`'s
/// grid. Returns the two paths.
pub fn write_synthetic(dir: &Path, dates: usize, spec: &CalibSpec) -> (PathBuf, PathBuf) {
    assert_eq!(spec.model, ModelKind::Ours);
    let hicp = synthetic_hicp(72);
    let n = hicp.len();
    let placeholder: Vec<QuoteRow> = hicp.dates()[n - dates..]
        .iter()
        .flat_map(|&date| {
            MATURITIES.iter().map(move |&t| QuoteRow {
                date,
                maturity_years: t,
                rate_percent: 0.0,
            })
        })
        .collect();
    let panels = build_panels(&placeholder, &hicp, DEFAULT_SIGMA_WINDOW, None).unwrap();
    assert_eq!(panels.len(), dates);
    let mut quotes = Vec::new();
    for p in &panels {
        let rates = model_rates(&TRUTH_OURS, p, spec).unwrap();
        for (&t, &k) in p.maturities.iter().zip(&rates) {
            quotes.push(QuoteRow {
                date: p.date,
                maturity_years: t,
                rate_percent: k,
            });
        }
    }
    let hicp_path = dir.join("hicp.csv");
    let quotes_path = dir.join("quotes.csv");
    hicp.write(std::fs::File::create(&hicp_path).unwrap()).unwrap();
    write_quotes(&quotes, std::fs::File::create(&quotes_path).unwrap()).unwrap();
    (quotes_path, hicp_path)
}
