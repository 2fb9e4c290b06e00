//! Cross-sectional calibration of the jump model and of the affine
//! benchmark to one date's ZCIIS quotes.
//!
//! The objective is the RMSE in percent between model and market rates.
//! Candidates outside the admissible set are projected onto it, priced
//! there, and charged a quadratic penalty in the distance moved, so the
//! penalty vanishes on the admissible set and an infeasible point always
//! scores worse than its projection.

mod metrics;
mod nelder_mead;
mod report;

pub use metrics::{average_metrics, error_metrics, Metrics};
pub use nelder_mead::{minimize, NmOptions, NmOutcome};
pub use report::{format_table, write_per_date, write_summary, SummaryRow};

use chrono::NaiveDate;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::affine::{self, AffineParams, SIGMA_DIAG};
use crate::claims::zciis_curve;
use crate::data_io::QuotePanel;
use crate::error::{Error, Result};
use crate::model::{
    EcbParams, InflationParams, JumpSpec, ModelParams, ShortRateParams, SigmaSpec, State,
};
use crate::pide::{Grid, GridSpec};

/// Objective value reported when pricing fails at a candidate.
pub const FAILURE_OBJECTIVE: f64 = 1e3;

/// Weight of the squared (scaled) projection distance.
pub const PENALTY_WEIGHT: f64 = 10.0;

/// Relative safety margin kept inside strict inequality constraints.
const MARGIN: f64 = 1e-6;

/// Upper end of the search box for `b0`.
const B0_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ours,
    Affine,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ours => "ours",
            ModelKind::Affine => "affine",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Ours => "Our model",
            ModelKind::Affine => "Affine benchmark",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ours => &OURS_NAMES,
            ModelKind::Affine => &AFFINE_NAMES,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ours" => Ok(Self::Ours),
            "affine" | "hhy" => Ok(Self::Affine),
            _ => Err(Error::Calibration(format!("unknown model '{s}'"))),
        }
    }
}

pub const OURS_NAMES: [&str; 8] = ["beta", "k_pi", "lambda_bar", "k_sh", "sigma0", "b0", "b1", "z0"];

pub const AFFINE_NAMES: [&str; 20] = [
    "kappa1", "kappa2", "kappa3", "sigma21", "sigma31", "sigma32", "rho0_n", "rho0_r", "rho1_n1",
    "rho1_n2", "rho1_n3", "rho1_r1", "rho1_r2", "rho1_r3", "lambda0_1", "lambda0_2", "lambda0_3",
    "x1", "x2", "x3",
];

/// Fixed part of the jump model during calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OursSetup {
    pub alpha: f64,
    pub pi_star: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub delta: f64,
    pub m: usize,
    pub t1: f64,
    /// ECB rate used when the panel carries none (decimal).
    pub ecb_rate: f64,
    pub grid: GridSpec,
    /// Optional finer grid used to re-price the final fit.
    pub verification_grid: Option<GridSpec>,
    /// Coarse-grid search run before the main one.
    pub presolve: Option<Presolve>,
}

/// A cheap first search on a coarse grid whose result seeds the search on
/// the calibration grid with a smaller simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presolve {
    pub grid: GridSpec,
    /// Objective value (percent) at which the coarse search stops.
    pub target: f64,
    pub restarts: usize,
    pub max_evals: usize,
    /// Simplex edges of the main search relative to the default scales.
    pub step_factor: f64,
}

impl Default for Presolve {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                n_steps: 12,
                n_z: 60,
                z_max: Some(0.18),
                n_pi: 31,
                pi_range: None,
            },
            target: 1e-3,
            restarts: 2,
            max_evals: 600,
            step_factor: 0.1,
        }
    }
}

impl Default for OursSetup {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            pi_star: 1.02f64.ln(),
            r_min: 0.0005,
            r_max: 0.045,
            delta: 0.0025,
            m: 1,
            t1: 1.0 / 12.0,
            ecb_rate: 0.01,
            grid: GridSpec::calibration(),
            verification_grid: None,
            presolve: Some(Presolve::default()),
        }
    }
}

impl OursSetup {
    /// Model for the free vector `[β, kΠ, λ̄, k_sh, σ0, b0, b1, z0]` with
    /// `v = σ_Π` and the threshold jump law.
    pub fn model(&self, theta: &[f64], sigma_pi: f64) -> Result<ModelParams> {
        check_len(theta, 8)?;
        let [beta, k_pi, lambda_bar, k_sh, sigma0, b0, b1, _] = theta[..8] else {
            unreachable!()
        };
        let inflation = InflationParams::new(self.alpha, beta, k_pi, self.pi_star, sigma_pi)?;
        let ecb = EcbParams::new(
            self.r_min,
            self.r_max,
            self.delta,
            self.m,
            lambda_bar,
            JumpSpec::threshold(self.pi_star, sigma_pi),
        )?;
        let short = ShortRateParams::new(k_sh, b0, b1, SigmaSpec::Constant(sigma0))?;
        ModelParams::new(inflation, ecb, short, self.t1)
    }

    /// ECB rate of the panel snapped onto the interior rate lattice.
    pub fn state_rate(&self, panel: &QuotePanel) -> f64 {
        let r = panel.ecb_rate.unwrap_or(self.ecb_rate);
        let levels = crate::pide::rate_levels(self.r_min, self.r_max, self.delta);
        let h = ((r - self.r_min) / self.delta).round().clamp(1.0, (levels - 1) as f64);
        let snapped = self.r_min + h * self.delta;
        if (snapped - r).abs() > 0.5 * self.delta + 1e-12 {
            warn!("ECB rate {r} outside the lattice; using {snapped}");
        }
        snapped
    }

    /// Projection onto the admissible set (plus the search box).
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut p = theta.to_vec();
        p[0] = p[0].clamp(-2.0, 2.0);
        p[1] = p[1].clamp(1e-3, 1.0 - 1e-3);
        p[2] = p[2].clamp(0.0, 50.0);
        p[3] = p[3].clamp(1e-4, 20.0);
        p[6] = p[6].clamp(-5.0, 5.0);
        let z_cap = 0.5 * self.grid.z_max.unwrap_or(4.0 * self.r_max);
        p[7] = p[7].clamp(1e-5, z_cap);
        // k (b0 + b1 r) > ½σ0² at both band ends: raise b0 if needed, and
        // lower σ0 first when even the largest b0 could not compensate
        let b1_min = (p[6] * self.r_min).min(p[6] * self.r_max);
        let s_max = (2.0 * p[3] * (B0_MAX + b1_min) / (1.0 + MARGIN)).sqrt() * (1.0 - 1e-9);
        p[4] = p[4].clamp(1e-4, s_max.min(1.0));
        let need = 0.5 * p[4] * p[4] / p[3] * (1.0 + MARGIN) + 1e-12;
        p[5] = p[5].max(need - b1_min).min(B0_MAX);
        p
    }
}

fn check_len(theta: &[f64], n: usize) -> Result<()> {
    if theta.len() != n {
        return Err(Error::Calibration(format!(
            "expected {n} parameters, got {}",
            theta.len()
        )));
    }
    Ok(())
}

/// Typical magnitudes used for the initial simplex and penalty scaling.
pub fn default_scales(kind: ModelKind) -> Vec<f64> {
    match kind {
        ModelKind::Ours => vec![0.05, 0.05, 0.3, 0.1, 0.01, 0.003, 0.1, 0.003],
        ModelKind::Affine => {
            let mut s = vec![0.05, 0.1, 0.2, 0.002, 0.002, 0.002, 0.005, 0.005];
            s.extend([0.1; 6]);
            s.extend([0.1; 3]);
            s.extend([0.005; 3]);
            s
        }
    }
}

/// Default starting point.
pub fn default_start(kind: ModelKind) -> Vec<f64> {
    match kind {
        ModelKind::Ours => vec![0.1, 0.2, 1.0, 0.5, 0.03, 0.01, 0.5, 0.01],
        ModelKind::Affine => {
            let p = AffineParams::default();
            affine_to_theta(&p, &[0.0; 3])
        }
    }
}

/// Free vector for the affine model, see [`AFFINE_NAMES`].
pub fn affine_to_theta(p: &AffineParams, x: &[f64; 3]) -> Vec<f64> {
    let mut v = Vec::with_capacity(20);
    v.extend(p.kappa);
    v.extend(p.sigma_lower);
    v.extend(p.extra_scalars());
    v.extend(x);
    v
}

pub fn theta_to_affine(theta: &[f64]) -> Result<(AffineParams, [f64; 3])> {
    check_len(theta, 20)?;
    let t = |i: usize| [theta[i], theta[i + 1], theta[i + 2]];
    let p = AffineParams {
        kappa: t(0),
        sigma_diag: [SIGMA_DIAG; 3],
        sigma_lower: t(3),
        rho0_n: theta[6],
        rho0_r: theta[7],
        rho1_n: t(8),
        rho1_r: t(11),
        lambda0: t(14),
    };
    Ok((p, t(17)))
}

fn project_affine(theta: &[f64]) -> Vec<f64> {
    let mut p = theta.to_vec();
    for k in &mut p[0..3] {
        *k = k.clamp(1e-3, 10.0);
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibSpec {
    pub model: ModelKind,
    pub ours: OursSetup,
    pub optimizer: NmOptions,
    /// Starting point; model default when absent.
    pub start: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
    /// ODE step for the affine model.
    pub ode_step: f64,
}

impl CalibSpec {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            ours: OursSetup::default(),
            optimizer: NmOptions::default(),
            start: None,
            scales: None,
            ode_step: affine::DEFAULT_ODE_STEP,
        }
    }

    fn scales(&self) -> Vec<f64> {
        self.scales
            .clone()
            .unwrap_or_else(|| default_scales(self.model))
    }

    fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self.model {
            ModelKind::Ours => self.ours.project(theta),
            ModelKind::Affine => project_affine(theta),
        }
    }
}

/// Model rates in percent at a free vector (assumed admissible).
pub fn model_rates(theta: &[f64], panel: &QuotePanel, spec: &CalibSpec) -> Result<Vec<f64>> {
    model_rates_on(theta, panel, spec, &spec.ours.grid)
}

fn model_rates_on(
    theta: &[f64],
    panel: &QuotePanel,
    spec: &CalibSpec,
    grid_spec: &GridSpec,
) -> Result<Vec<f64>> {
    let rates = match spec.model {
        ModelKind::Ours => {
            let mp = spec.ours.model(theta, panel.sigma_pi)?;
            let state = State::new(panel.pi, spec.ours.state_rate(panel), theta[7]);
            let horizon = panel.maturities.iter().cloned().fold(0.0, f64::max);
            let grid = Grid::build(grid_spec, &mp, horizon, Some(state))?;
            zciis_curve(&mp, &grid, 0.0, &panel.maturities, state)?
        }
        ModelKind::Affine => {
            let (p, x) = theta_to_affine(theta)?;
            affine::zciis_curve_affine(&p, &x, &panel.maturities, spec.ode_step)?
        }
    };
    Ok(rates.into_iter().map(|k| 100.0 * k).collect())
}

/// RMSE (percent) at the projection of `theta` plus the projection penalty.
pub fn objective(theta: &[f64], panel: &QuotePanel, spec: &CalibSpec) -> f64 {
    let proj = spec.project(theta);
    let scales = spec.scales();
    let dist2: f64 = theta
        .iter()
        .zip(&proj)
        .zip(&scales)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum();
    let fit = match model_rates(&proj, panel, spec)
        .and_then(|k| error_metrics(&k, &panel.rates_percent))
    {
        Ok(m) if m.rmse.is_finite() => m.rmse,
        Ok(_) => FAILURE_OBJECTIVE,
        Err(e) => {
            debug!("pricing failed at {proj:?}: {e}");
            FAILURE_OBJECTIVE
        }
    };
    fit + PENALTY_WEIGHT * dist2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    pub date: NaiveDate,
    pub model: ModelKind,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub maturities: Vec<f64>,
    pub market_percent: Vec<f64>,
    pub fitted_percent: Vec<f64>,
    pub rmse: f64,
    pub arpe: f64,
    /// Fit re-priced on the verification grid, when one is configured.
    pub verification: Option<Metrics>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl CalibResult {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            rmse: self.rmse,
            arpe: self.arpe,
            excluded: 0,
        }
    }

    /// `name=value;…` rendering of the fitted parameters.
    pub fn params_string(&self) -> String {
        self.names
            .iter()
            .zip(&self.params)
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Calibrates one panel. The returned parameters are admissible and the
/// stored errors are recomputed from the stored fitted rates.
pub fn calibrate(panel: &QuotePanel, spec: &CalibSpec) -> Result<CalibResult> {
    calibrate_from(panel, spec, None)
}

/// As [`calibrate`], starting from `warm` when given.
pub fn calibrate_from(
    panel: &QuotePanel,
    spec: &CalibSpec,
    warm: Option<&[f64]>,
) -> Result<CalibResult> {
    panel.validate()?;
    let names = spec.model.param_names();
    let start = warm
        .map(<[f64]>::to_vec)
        .or_else(|| spec.start.clone())
        .unwrap_or_else(|| default_start(spec.model));
    check_len(&start, names.len())?;
    let scales = spec.scales();
    check_len(&scales, names.len())?;
    let (mut start, mut steps, mut evals, mut iters) = (start, scales.clone(), 0, 0);
    if let (ModelKind::Ours, Some(pre)) = (spec.model, &spec.ours.presolve) {
        let mut coarse = spec.clone();
        coarse.ours.grid = pre.grid.clone();
        let opts = NmOptions {
            target: Some(pre.target),
            restarts: pre.restarts,
            max_evals: Some(pre.max_evals),
            ..spec.optimizer.clone()
        };
        let out = minimize(|x| objective(x, panel, &coarse), &start, &scales, &opts);
        debug!(
            "{}: coarse search reached {:.3e} after {} evaluations",
            panel.date, out.f, out.evaluations
        );
        start = coarse.project(&out.x);
        steps = scales.iter().map(|s| s * pre.step_factor).collect();
        evals += out.evaluations;
        iters += out.iterations;
    }
    let out = minimize(
        |x| objective(x, panel, spec),
        &start,
        &steps,
        &spec.optimizer,
    );
    let params = spec.project(&out.x);
    let fitted = model_rates(&params, panel, spec)
        .map_err(|e| Error::Calibration(format!("no admissible fit on {}: {e}", panel.date)))?;
    let m = error_metrics(&fitted, &panel.rates_percent)?;
    let verification = match (spec.model, &spec.ours.verification_grid) {
        (ModelKind::Ours, Some(g)) => {
            let k = model_rates_on(&params, panel, spec, g)?;
            Some(error_metrics(&k, &panel.rates_percent)?)
        }
        _ => None,
    };
    Ok(CalibResult {
        date: panel.date,
        model: spec.model,
        names: names.iter().map(|s| s.to_string()).collect(),
        params,
        maturities: panel.maturities.clone(),
        market_percent: panel.rates_percent.clone(),
        fitted_percent: fitted,
        rmse: m.rmse,
        arpe: m.arpe,
        verification,
        iterations: iters + out.iterations,
        evaluations: evals + out.evaluations,
        converged: out.converged,
    })
}

/// Calibrates every panel in date order; with `warm_start` each date
/// starts from the previous date's fit.
pub fn calibrate_panels(
    panels: &[QuotePanel],
    spec: &CalibSpec,
    warm_start: bool,
) -> Result<Vec<CalibResult>> {
    let mut out: Vec<CalibResult> = Vec::with_capacity(panels.len());
    for p in panels {
        let warm = if warm_start {
            out.last().map(|r| r.params.clone())
        } else {
            None
        };
        out.push(calibrate_from(p, spec, warm.as_deref())?);
    }
    Ok(out)
}
