use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-sectional fit errors for one date, in the units of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub arpe: f64,
    /// Maturities left out of ARPE because the market rate was zero.
    pub excluded: usize,
}

/// RMSE over all maturities; ARPE over those with a nonzero market rate.
pub fn error_metrics(model: &[f64], market: &[f64]) -> Result<Metrics> {
    if model.len() != market.len() {
        return Err(Error::Calibration(format!(
            "{} model rates against {} market rates",
            model.len(),
            market.len()
        )));
    }
    if model.is_empty() {
        return Err(Error::Calibration("no rates to compare".into()));
    }
    let n = model.len() as f64;
    let sq: f64 = model.iter().zip(market).map(|(k, m)| (k - m) * (k - m)).sum();
    let mut rel = 0.0;
    let mut used = 0usize;
    for (k, m) in model.iter().zip(market) {
        if *m == 0.0 {
            continue;
        }
        rel += ((k - m) / m).abs();
        used += 1;
    }
    let excluded = model.len() - used;
    if excluded > 0 {
        warn!("{excluded} zero market rate(s) excluded from ARPE");
    }
    let arpe = if used > 0 { rel / used as f64 } else { f64::NAN };
    Ok(Metrics {
        rmse: (sq / n).sqrt(),
        arpe,
        excluded,
    })
}

/// Date averages `(RMSĒ, ARPĒ)`.
pub fn average_metrics(per_date: &[Metrics]) -> Result<(f64, f64)> {
    if per_date.is_empty() {
        return Err(Error::Calibration("no dates to average".into()));
    }
    let n = per_date.len() as f64;
    let rmse = per_date.iter().map(|m| m.rmse).sum::<f64>() / n;
    let arpe = per_date.iter().map(|m| m.arpe).sum::<f64>() / n;
    Ok((rmse, arpe))
}
