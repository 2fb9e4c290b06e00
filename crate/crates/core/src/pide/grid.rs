use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

/// User-facing discretization knobs. Everything else (`H`, `Δπ`, the π
/// range when not given) is derived from the model in [`Grid::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Time steps per observation period (`N`).
    pub n_steps: usize,
    /// Number of z intervals (`J`); nodes are `j = 0..=J`.
    pub n_z: usize,
    /// Upper z boundary. Defaults to `4·max(r_max, z0)`.
    pub z_max: Option<f64>,
    /// Number of inflation nodes.
    pub n_pi: usize,
    /// Explicit inflation range; derived from the model when absent.
    pub pi_range: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_steps: 24,
            n_z: 120,
            z_max: None,
            n_pi: 101,
            pi_range: None,
        }
    }
}

impl GridSpec {
    /// Speed/accuracy compromise used inside calibration loops.
    pub fn calibration() -> Self {
        Self {
            n_steps: 24,
            n_z: 120,
            z_max: Some(0.18),
            n_pi: 61,
            pi_range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::Grid("need at least 2 time steps per period".into()));
        }
        if self.n_z < 3 {
            return Err(Error::Grid("need at least 3 z intervals".into()));
        }
        if self.n_pi < 1 {
            return Err(Error::Grid("need at least one inflation node".into()));
        }
        if let Some(z) = self.z_max {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::Grid(format!("z_max = {z} must be positive")));
            }
        }
        if let Some((lo, hi)) = self.pi_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Grid(format!("bad inflation range [{lo}, {hi}]")));
            }
            if lo == hi && self.n_pi > 1 {
                return Err(Error::Grid("degenerate inflation range".into()));
            }
        }
        Ok(())
    }
}

/// Number of rate levels `H` with `H ≥ (r_max − r_min)/δ > H − 1`.
pub fn rate_levels(r_min: f64, r_max: f64, delta: f64) -> usize {
    let x = (r_max - r_min) / delta;
    // guard against x = 17.000000000000004 style rounding of exact ratios
    (x - 1e-9).ceil().max(1.0) as usize
}

/// The `(π, r, z)` lattice geometry for one pricing problem.
///
/// Rate rows are indexed from 0: row `i` carries `r = r_min + (i + 1)·δ`,
/// i.e. the interior levels `h = 1..H−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_steps: usize,
    levels: usize,
    n_z: usize,
    z_max: f64,
    t1: f64,
    r_min: f64,
    delta: f64,
    pi: Vec<f64>,
}

impl Grid {
    /// Builds the grid for claims up to `horizon` years.
    ///
    /// Without an explicit range the inflation axis spans the initial level,
    /// `π*` and the reversion levels over the rate band, widened by six
    /// standard deviations of the accumulated monthly shocks. When `anchor`
    /// is given the axis is shifted so that `anchor.pi` is a node.
    pub fn build(
        spec: &GridSpec,
        mp: &ModelParams,
        horizon: f64,
        anchor: Option<State>,
    ) -> Result<Self> {
        spec.validate()?;
        let band = mp.band();
        let levels = rate_levels(band.r_min, band.r_max, band.delta);
        if levels < 2 {
            return Err(Error::Grid("rate band holds no interior level".into()));
        }
        let z_max = spec
            .z_max
            .unwrap_or_else(|| 4.0 * band.r_max.max(anchor.map_or(0.0, |s| s.z)));
        if !(z_max > 0.0) {
            return Err(Error::Grid("z_max must be positive".into()));
        }

        let (lo, hi) = match spec.pi_range {
            Some(r) => r,
            None => default_pi_range(mp, horizon, anchor.map(|s| s.pi)),
        };
        let n = spec.n_pi;
        let pi = if n == 1 {
            vec![anchor.map_or(0.5 * (lo + hi), |s| s.pi)]
        } else {
            let d = (hi - lo) / (n - 1) as f64;
            let start = match anchor {
                Some(s) if d > 0.0 => s.pi - ((s.pi - lo) / d).round() * d,
                _ => lo,
            };
            (0..n).map(|i| start + i as f64 * d).collect()
        };
        Ok(Self {
            n_steps: spec.n_steps,
            levels,
            n_z: spec.n_z,
            z_max,
            t1: mp.t1(),
            r_min: band.r_min,
            delta: band.delta,
            pi,
        })
    }

    /// Time steps per full observation period.
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// `H`.
    #[inline]
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Number of interior rate rows, `H − 1`.
    #[inline]
    pub fn rows(&self) -> usize {
        self.levels - 1
    }

    /// `J`.
    #[inline]
    pub fn n_z(&self) -> usize {
        self.n_z
    }

    #[inline]
    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        self.z_max / self.n_z as f64
    }

    #[inline]
    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Time step on a full observation period.
    #[inline]
    pub fn dtau(&self) -> f64 {
        self.t1 / self.n_steps as f64
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dz()
    }

    #[inline]
    pub fn rate(&self, row: usize) -> f64 {
        self.r_min + (row + 1) as f64 * self.delta
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.rows()).map(|i| self.rate(i)).collect()
    }

    #[inline]
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    #[inline]
    pub fn n_pi(&self) -> usize {
        self.pi.len()
    }

    pub fn dpi(&self) -> f64 {
        if self.pi.len() < 2 {
            f64::INFINITY
        } else {
            self.pi[1] - self.pi[0]
        }
    }

    /// Row whose rate is nearest to `r`.
    pub fn rate_row(&self, r: f64) -> Result<usize> {
        let h = ((r - self.r_min) / self.delta).round();
        if !(h >= 1.0 && h <= self.rows() as f64) {
            return Err(Error::Domain {
                what: "r",
                value: r,
                domain: format!(
                    "rate lattice [{}, {}]",
                    self.rate(0),
                    self.rate(self.rows() - 1)
                ),
            });
        }
        Ok(h as usize - 1)
    }

    /// Same geometry with a different step count.
    pub fn with_steps(&self, n_steps: usize) -> Self {
        Self {
            n_steps,
            ..self.clone()
        }
    }
}

fn default_pi_range(mp: &ModelParams, horizon: f64, pi0: Option<f64>) -> (f64, f64) {
    let inf = mp.inflation();
    let band = mp.band();
    let a = inf.persistence();
    let months = (horizon / mp.t1()).ceil().max(1.0);
    // variance multiplier of M accumulated AR(1) shocks
    let var_factor = if (1.0 - a * a).abs() < 1e-12 {
        months
    } else {
        (1.0 - a.powf(2.0 * months)) / (1.0 - a * a)
    };
    let half = 6.0 * inf.v * var_factor.sqrt();
    let mut lo = inf.pi_star;
    let mut hi = inf.pi_star;
    for x in [
        inf.reversion_level(band.r_min),
        inf.reversion_level(band.r_max),
    ]
    .into_iter()
    .chain(pi0)
    {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo - half, hi + half)
}
