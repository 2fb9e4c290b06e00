//! Run configuration: a TOML file with `[model]`, `[grid]`, `[state]`,
//! `[affine]`, `[optimizer]`, `[data]` and `[simulate]` sections, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ecb_inflation::affine::AffineParams;
use ecb_inflation::calibration::{CalibSpec, ModelKind, OursSetup};
use ecb_inflation::pide::{rate_levels, GridSpec};
use ecb_inflation::simulator::Scheme;
use ecb_inflation::{EcbParams, InflationParams, JumpSpec, ModelParams, ShortRateParams, SigmaSpec, State};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub affine: AffineSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k_pi: Option<f64>,
    pub pi_star: Option<f64>,
    /// Standard deviation of the monthly inflation shock; also scales the
    /// jump-law thresholds.
    pub sigma_pi: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub delta: Option<f64>,
    pub m: Option<usize>,
    pub lambda_bar: Option<f64>,
    pub k_sh: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub sigma0: Option<f64>,
    /// `"constant"` (default) or `"quartic_root"`.
    pub sigma: Option<String>,
    pub t1: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_steps: Option<usize>,
    pub n_z: Option<usize>,
    pub z_max: Option<f64>,
    pub n_pi: Option<usize>,
    /// Expected number of rate levels; checked against the model band.
    pub levels: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub pi: Option<f64>,
    pub r: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSection {
    pub kappa: Option<[f64; 3]>,
    pub sigma_diag: Option<[f64; 3]>,
    pub sigma_lower: Option<[f64; 3]>,
    pub rho0_n: Option<f64>,
    pub rho0_r: Option<f64>,
    pub rho1_n: Option<[f64; 3]>,
    pub rho1_r: Option<[f64; 3]>,
    pub lambda0: Option<[f64; 3]>,
    pub x: Option<[f64; 3]>,
    pub ode_step: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub jitter: Option<f64>,
    pub target: Option<f64>,
    pub max_evals: Option<usize>,
    /// Coarse-grid search before the main one (our model only).
    pub presolve: Option<bool>,
    pub presolve_max_evals: Option<usize>,
    pub warm_start: Option<bool>,
    pub ours_start: Option<Vec<f64>>,
    pub affine_start: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub quotes: Option<PathBuf>,
    pub hicp: Option<PathBuf>,
    pub ecb_rates: Option<PathBuf>,
    /// ECB rate used when no rate series is given (decimal).
    pub ecb_rate: Option<f64>,
    pub sigma_window: Option<usize>,
    pub period: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    /// `"full_truncation"` (default) or `"reflection"`.
    pub scheme: Option<String>,
}

/// `--grid N,H,J,zmax`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOverride {
    pub n_steps: usize,
    pub levels: usize,
    pub n_z: usize,
    pub z_max: f64,
}

impl std::str::FromStr for GridOverride {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected N,H,J,zmax, got `{s}`"));
        }
        let int = |x: &str, what: &str| {
            x.parse::<usize>()
                .map_err(|_| format!("{what} must be a positive integer, got `{x}`"))
        };
        let z_max: f64 = parts[3]
            .parse()
            .map_err(|_| format!("zmax must be a number, got `{}`", parts[3]))?;
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(format!("zmax must be positive, got {z_max}"));
        }
        Ok(Self {
            n_steps: int(parts[0], "N")?,
            levels: int(parts[1], "H")?,
            n_z: int(parts[2], "J")?,
            z_max,
        })
    }
}

/// `key=value` list such as `pi=0.02,r=0.03,z=0.025`.
pub fn parse_assignments(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .with_context(|| format!("expected key=value, got `{p}`"))?;
            let v: f64 = v
                .trim()
                .parse()
                .with_context(|| format!("`{}` is not a number", v.trim()))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        // data paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.quotes, &mut cfg.data.hicp, &mut cfg.data.ecb_rates]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Model parameters: the reference set with the configured overrides.
    pub fn model_params(&self) -> Result<ModelParams> {
        let base = ModelParams::reference();
        let m = &self.model;
        let inf = base.inflation();
        let sigma_pi = m.sigma_pi.unwrap_or(inf.v);
        let pi_star = m.pi_star.unwrap_or(inf.pi_star);
        let inflation = InflationParams::new(
            m.alpha.unwrap_or(inf.alpha),
            m.beta.unwrap_or(inf.beta),
            m.k_pi.unwrap_or(inf.k_pi),
            pi_star,
            sigma_pi,
        )?;
        let band = &base.ecb().band;
        let ecb = EcbParams::new(
            m.r_min.unwrap_or(band.r_min),
            m.r_max.unwrap_or(band.r_max),
            m.delta.unwrap_or(band.delta),
            m.m.unwrap_or(band.m),
            m.lambda_bar.unwrap_or(base.ecb().lambda_bar),
            JumpSpec::threshold(pi_star, sigma_pi),
        )?;
        let sh = base.short();
        let sigma = match m.sigma.as_deref().unwrap_or("constant") {
            "constant" => {
                let s0 = match (&sh.sigma, m.sigma0) {
                    (_, Some(s)) => s,
                    (SigmaSpec::Constant(s), None) => *s,
                    _ => bail!("sigma0 is required for a constant volatility"),
                };
                SigmaSpec::Constant(s0)
            }
            "quartic_root" => SigmaSpec::QuarticRoot,
            other => bail!("unknown volatility `{other}` (constant, quartic_root)"),
        };
        let short = ShortRateParams::new(
            m.k_sh.unwrap_or(sh.k_sh),
            m.b0.unwrap_or(sh.b0),
            m.b1.unwrap_or(sh.b1),
            sigma,
        )?;
        Ok(ModelParams::new(inflation, ecb, short, m.t1.unwrap_or(base.t1()))?)
    }

    /// Grid for pricing, with `--grid` taking precedence over the file.
    pub fn grid_spec(&self, flag: Option<GridOverride>, mp: &ModelParams) -> Result<GridSpec> {
        let mut spec = GridSpec::default();
        self.apply_grid(&mut spec, flag, mp)?;
        Ok(spec)
    }

    fn apply_grid(
        &self,
        spec: &mut GridSpec,
        flag: Option<GridOverride>,
        mp: &ModelParams,
    ) -> Result<()> {
        let g = &self.grid;
        if let Some(n) = g.n_steps {
            spec.n_steps = n;
        }
        if let Some(n) = g.n_z {
            spec.n_z = n;
        }
        if g.z_max.is_some() {
            spec.z_max = g.z_max;
        }
        if let Some(n) = g.n_pi {
            spec.n_pi = n;
        }
        let mut levels = g.levels;
        if let Some(f) = flag {
            spec.n_steps = f.n_steps;
            spec.n_z = f.n_z;
            spec.z_max = Some(f.z_max);
            levels = Some(f.levels);
        }
        let band = mp.band();
        let actual = rate_levels(band.r_min, band.r_max, band.delta);
        if let Some(h) = levels {
            if h != actual {
                bail!(
                    "grid asks for H = {h} rate levels but the band ({}, {}) with step {} has {actual}",
                    band.r_min,
                    band.r_max,
                    band.delta
                );
            }
        }
        spec.validate()?;
        Ok(())
    }

    /// Initial state for our model; flags override the `[state]` section.
    pub fn state(&self, mp: &ModelParams, flag: Option<&str>) -> Result<State> {
        let mut s = State::new(
            self.state.pi.unwrap_or(mp.inflation().pi_star),
            self.state.r.unwrap_or(0.01),
            self.state.z.unwrap_or(0.01),
        );
        if let Some(text) = flag {
            for (k, v) in parse_assignments(text)? {
                match k.as_str() {
                    "pi" => s.pi = v,
                    "r" => s.r = v,
                    "z" => s.z = v,
                    _ => bail!("unknown state variable `{k}` (pi, r, z)"),
                }
            }
        }
        Ok(s)
    }

    pub fn affine(&self, flag: Option<&str>) -> Result<(AffineParams, [f64; 3])> {
        let a = &self.affine;
        let d = AffineParams::default();
        let p = AffineParams {
            kappa: a.kappa.unwrap_or(d.kappa),
            sigma_diag: a.sigma_diag.unwrap_or(d.sigma_diag),
            sigma_lower: a.sigma_lower.unwrap_or(d.sigma_lower),
            rho0_n: a.rho0_n.unwrap_or(d.rho0_n),
            rho0_r: a.rho0_r.unwrap_or(d.rho0_r),
            rho1_n: a.rho1_n.unwrap_or(d.rho1_n),
            rho1_r: a.rho1_r.unwrap_or(d.rho1_r),
            lambda0: a.lambda0.unwrap_or(d.lambda0),
        };
        p.validate()?;
        let mut x = a.x.unwrap_or([0.0; 3]);
        if let Some(text) = flag {
            for (k, v) in parse_assignments(text)? {
                match k.as_str() {
                    "x1" => x[0] = v,
                    "x2" => x[1] = v,
                    "x3" => x[2] = v,
                    _ => bail!("unknown affine state `{k}` (x1, x2, x3)"),
                }
            }
        }
        Ok((p, x))
    }

    pub fn ode_step(&self) -> f64 {
        self.affine
            .ode_step
            .unwrap_or(ecb_inflation::affine::DEFAULT_ODE_STEP)
    }

    pub fn scheme(&self) -> Result<Scheme> {
        Ok(match self.simulate.scheme.as_deref().unwrap_or("full_truncation") {
            "full_truncation" => Scheme::FullTruncation,
            "reflection" => Scheme::Reflection,
            other => bail!("unknown scheme `{other}` (full_truncation, reflection)"),
        })
    }

    /// Calibration setup for `kind`. The fixed quantities of our model
    /// (α, π*, band, t1) come from `[model]`; the calibration grid is the
    /// library default unless `[grid]` or `--grid` says otherwise.
    pub fn calib_spec(
        &self,
        kind: ModelKind,
        flag: Option<GridOverride>,
        seed: u64,
    ) -> Result<CalibSpec> {
        let mp = self.model_params()?;
        let mut spec = CalibSpec::new(kind);
        let d = OursSetup::default();
        let band = &mp.ecb().band;
        spec.ours = OursSetup {
            alpha: self.model.alpha.unwrap_or(d.alpha),
            pi_star: self.model.pi_star.unwrap_or(d.pi_star),
            r_min: band.r_min,
            r_max: band.r_max,
            delta: band.delta,
            m: band.m,
            t1: mp.t1(),
            ecb_rate: self.data.ecb_rate.unwrap_or(d.ecb_rate),
            ..d
        };
        let mut grid = spec.ours.grid.clone();
        self.apply_grid(&mut grid, flag, &mp)?;
        spec.ours.grid = grid;
        let o = &self.optimizer;
        if o.presolve == Some(false) {
            spec.ours.presolve = None;
        }
        if let (Some(n), Some(pre)) = (o.presolve_max_evals, spec.ours.presolve.as_mut()) {
            pre.max_evals = n;
        }
        let opt = &mut spec.optimizer;
        opt.seed = seed;
        if let Some(v) = o.rel_tol {
            opt.rel_tol = v;
        }
        if let Some(v) = o.abs_tol {
            opt.abs_tol = v;
        }
        if let Some(v) = o.max_iter {
            opt.max_iter = v;
        }
        if let Some(v) = o.restarts {
            opt.restarts = v;
        }
        if let Some(v) = o.jitter {
            opt.jitter = v;
        }
        opt.target = o.target.or(opt.target);
        opt.max_evals = o.max_evals.or(opt.max_evals);
        spec.start = match kind {
            ModelKind::Ours => o.ours_start.clone(),
            ModelKind::Affine => o.affine_start.clone(),
        };
        spec.ode_step = self.ode_step();
        Ok(spec)
    }
}
