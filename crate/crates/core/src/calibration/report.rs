use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{average_metrics, CalibResult, ModelKind};
use crate::error::Result;

/// Date-averaged errors of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub rmse_bar: f64,
    pub arpe_bar: f64,
}

impl SummaryRow {
    pub fn from_results(model: ModelKind, results: &[CalibResult]) -> Result<Self> {
        let m: Vec<_> = results.iter().map(CalibResult::metrics).collect();
        let (rmse_bar, arpe_bar) = average_metrics(&m)?;
        Ok(Self {
            model,
            rmse_bar,
            arpe_bar,
        })
    }
}

/// Per-date CSV: `date,model,rmse,arpe,params`.
pub fn write_per_date<W: Write>(results: &[CalibResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "model", "rmse", "arpe", "params"])?;
    for r in results {
        w.write_record(&[
            r.date.to_string(),
            r.model.label().to_string(),
            r.rmse.to_string(),
            r.arpe.to_string(),
            r.params_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary CSV: `model,rmse_bar,arpe_bar`.
pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "rmse_bar", "arpe_bar"])?;
    for r in rows {
        w.write_record(&[
            r.model.label().to_string(),
            r.rmse_bar.to_string(),
            r.arpe_bar.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column error table; RMSE is in percentage points like the quotes,
/// ARPE is a plain ratio.
pub fn format_table(rows: &[SummaryRow], period: &str) -> String {
    let name_w = rows
        .iter()
        .map(|r| r.model.display_name().len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut s = String::new();
    s.push_str(&format!(
        "{:<name_w$}  {:>10}  {:>10}\n",
        "", "RMSE_bar", "ARPE_bar"
    ));
    s.push_str(&format!("{}\n", "-".repeat(name_w + 24)));
    for r in rows {
        s.push_str(&format!(
            "{:<name_w$}  {:>10}  {:>10}\n",
            r.model.display_name(),
            sig4(r.rmse_bar),
            sig4(r.arpe_bar)
        ));
    }
    s.push_str(&format!("{}\n", "-".repeat(name_w + 24)));
    s.push_str(&format!(
        "Error measures ARPE_bar and RMSE_bar for {period}. \
         The inflation swap rates are expressed in percentage.\n"
    ));
    s
}

/// Four significant digits, plain notation for table-sized values.
fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-6..=6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}
