//! Monte Carlo engine for the joint process `(Π, R, R^sh)`.
//!
//! Paths are event driven: the Euler grid `k·dt`, the inflation observation
//! dates `i·t1` and the Poisson clock's ring times are merged into one node
//! sequence, so every observation and every jump falls exactly on a node.
//! The ECB rate is simulated by thinning a constant-rate clock `λ̄`: at each
//! ring the increment is drawn from `q(Π, R, ·)`, which may be zero.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claims::ClaimSpec;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

/// Nodes closer than this are merged.
const MERGE_TOL: f64 = 1e-12;

/// Treatment of `√z` when an Euler step lands below zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    /// Drift and diffusion use `max(z, 0)`; the node value is floored.
    #[default]
    FullTruncation,
    /// Every node value is replaced by its absolute value.
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl PathConfig {
    pub fn new(horizon: f64, dt: f64, seed: u64) -> Self {
        Self {
            horizon,
            dt,
            seed,
            scheme: Scheme::FullTruncation,
        }
    }

    pub fn validate(&self, t1: f64) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= t1 * (1.0 + 1e-12)) {
            return Err(Error::param(
                "dt",
                format!("Euler step {} must lie in (0, t1 = {t1}]", self.dt),
            ));
        }
        Ok(())
    }
}

/// One simulated trajectory sampled at every node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointPath {
    pub times: Vec<f64>,
    pub pi: Vec<f64>,
    pub r: Vec<f64>,
    /// Short rate after flooring (full truncation) or reflection.
    pub rsh: Vec<f64>,
    /// Ring times of the Poisson clock, including zero-size jumps.
    pub jump_times: Vec<f64>,
    /// `∫ R^sh dt` by the trapezoidal rule on the stored node values.
    pub int_rsh: f64,
    /// `∫ Π dt`, exact since `Π` is piecewise constant.
    pub int_pi: f64,
    /// Nodes at which the raw Euler value was negative.
    pub floored: usize,
}

impl JointPath {
    pub fn terminal(&self) -> State {
        let n = self.times.len() - 1;
        State::new(self.pi[n], self.r[n], self.rsh[n])
    }

    /// Fraction of Euler nodes (excluding the initial one) that were floored.
    pub fn floored_fraction(&self) -> f64 {
        self.floored as f64 / (self.times.len().saturating_sub(1)).max(1) as f64
    }

    /// CSV with columns `time,pi,r,rsh`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "pi", "r", "rsh"])?;
        for i in 0..self.times.len() {
            w.write_record(&[
                self.times[i].to_string(),
                self.pi[i].to_string(),
                self.r[i].to_string(),
                self.rsh[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Path outcome without the node history.
#[derive(Debug, Clone, Copy)]
struct PathEnd {
    terminal: State,
    int_rsh: f64,
    int_pi: f64,
}

fn check_init(mp: &ModelParams, init: State) -> Result<()> {
    let band = mp.band();
    if !band.contains(init.r) {
        return Err(Error::Domain {
            what: "r0",
            value: init.r,
            domain: format!("({}, {})", band.r_min, band.r_max),
        });
    }
    if !(init.z > 0.0 && init.z.is_finite()) {
        return Err(Error::Domain {
            what: "z0",
            value: init.z,
            domain: "(0, ∞)".into(),
        });
    }
    if !init.pi.is_finite() {
        return Err(Error::Domain {
            what: "pi0",
            value: init.pi,
            domain: "finite".into(),
        });
    }
    Ok(())
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn run_path(
    mp: &ModelParams,
    init: State,
    cfg: &PathConfig,
    index: u64,
    mut record: Option<&mut JointPath>,
) -> Result<PathEnd> {
    let inf = mp.inflation();
    let ecb = mp.ecb();
    let sh = mp.short();
    let t1 = mp.t1();
    let band = mp.band();
    let horizon = cfg.horizon;
    let mut rng = path_rng(cfg.seed, index);
    let clock = if ecb.lambda_bar > 0.0 {
        Some(Exp::new(ecb.lambda_bar).map_err(|e| Error::param("lambda_bar", e.to_string()))?)
    } else {
        None
    };

    let (mut pi, mut r, mut z) = (init.pi, init.r, init.z);
    let mut stored = z;
    let (mut int_rsh, mut int_pi) = (0.0, 0.0);
    let mut t = 0.0;
    let mut next_grid = 1usize;
    let mut next_obs = 1usize;
    let mut next_jump = clock.map_or(f64::INFINITY, |c| rng.sample(c));
    if let Some(p) = record.as_deref_mut() {
        *p = JointPath::default();
        p.times.push(0.0);
        p.pi.push(pi);
        p.r.push(r);
        p.rsh.push(stored);
    }
    let mut q = vec![0.0; 2 * ecb.m() + 1];

    while t < horizon - MERGE_TOL {
        let tg = (next_grid as f64 * cfg.dt).min(horizon);
        let to = next_obs as f64 * t1;
        let t_next = tg.min(to).min(next_jump);
        let h = t_next - t;

        // short rate Euler step with pre-event R
        let zp = match cfg.scheme {
            Scheme::FullTruncation => z.max(0.0),
            Scheme::Reflection => z.abs(),
        };
        let vol = sh.sigma_sq_unchecked((r - zp) * (r - zp)).sqrt();
        let dw: f64 = rng.sample(StandardNormal);
        let raw = z + sh.k_sh * (sh.drift_b(r) - zp) * h + vol * zp.sqrt() * h.sqrt() * dw;
        let (z_new, node) = match cfg.scheme {
            Scheme::FullTruncation => (raw, raw.max(0.0)),
            Scheme::Reflection => (raw.abs(), raw.abs()),
        };
        let floored = raw < 0.0;
        int_rsh += 0.5 * (stored + node) * h;
        int_pi += pi * h;
        z = z_new;
        stored = node;
        t = t_next;

        // events at t, both driven by pre-event values
        let (pi_pre, r_pre) = (pi, r);
        if (t - to).abs() <= MERGE_TOL {
            let eps: f64 = rng.sample(StandardNormal);
            pi = inf.gamma(pi_pre, r_pre) + inf.v * eps;
            next_obs += 1;
        }
        if (t - next_jump).abs() <= MERGE_TOL {
            let u: f64 = rng.gen();
            ecb.q_probs_into(pi_pre, r_pre, &mut q)?;
            r = r_pre + crate::model::select_jump(&q, u, ecb.m(), ecb.delta());
            if !band.contains(r) {
                return Err(Error::Numerical(format!(
                    "ECB rate left the band: {r} after a jump from {r_pre}"
                )));
            }
            if let Some(p) = record.as_deref_mut() {
                p.jump_times.push(t);
            }
            next_jump = t + clock.map_or(f64::INFINITY, |c| rng.sample(c));
        }
        if (t - tg).abs() <= MERGE_TOL {
            next_grid += 1;
        }
        if let Some(p) = record.as_deref_mut() {
            p.times.push(t);
            p.pi.push(pi);
            p.r.push(r);
            p.rsh.push(stored);
            p.floored += usize::from(floored);
        }
    }
    if let Some(p) = record {
        p.int_rsh = int_rsh;
        p.int_pi = int_pi;
    }
    Ok(PathEnd {
        terminal: State::new(pi, r, stored),
        int_rsh,
        int_pi,
    })
}

/// Simulates path number `index` of the stream selected by `cfg.seed`.
pub fn simulate_path(
    mp: &ModelParams,
    init: State,
    cfg: &PathConfig,
    index: u64,
) -> Result<JointPath> {
    cfg.validate(mp.t1())?;
    check_init(mp, init)?;
    let mut path = JointPath::default();
    run_path(mp, init, cfg, index, Some(&mut path))?;
    Ok(path)
}

/// Monte Carlo price of `claim` and its standard error.
///
/// Paths run to the claim's maturity; `cfg.horizon` must not be shorter.
/// Results depend only on the seed, not on the thread count.
pub fn mc_price(
    claim: &ClaimSpec,
    mp: &ModelParams,
    init: State,
    n_paths: usize,
    cfg: &PathConfig,
) -> Result<(f64, f64)> {
    cfg.validate(mp.t1())?;
    check_init(mp, init)?;
    if n_paths < 2 {
        return Err(Error::param("n_paths", "need at least 2 paths"));
    }
    if claim.maturity > cfg.horizon + MERGE_TOL {
        return Err(Error::Claim(format!(
            "maturity {} beyond simulation horizon {}",
            claim.maturity, cfg.horizon
        )));
    }
    if claim.maturity == 0.0 {
        return Ok((claim.payoff(init.pi, init.r, init.z), 0.0));
    }
    let run = PathConfig {
        horizon: claim.maturity,
        ..*cfg
    };
    let values = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let end = run_path(mp, init, &run, i, None)?;
            let s = end.terminal;
            let phi = claim.payoff(s.pi, s.r, s.z);
            Ok(if phi == 0.0 {
                0.0
            } else {
                (claim.p * end.int_pi - end.int_rsh).exp() * phi
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_error(&values))
}

/// Sample mean and standard error of the mean, summed in index order.
pub fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Simulates `n_paths` full trajectories in parallel.
pub fn simulate_paths(
    mp: &ModelParams,
    init: State,
    cfg: &PathConfig,
    n_paths: usize,
) -> Result<Vec<JointPath>> {
    cfg.validate(mp.t1())?;
    check_init(mp, init)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut p = JointPath::default();
            run_path(mp, init, cfg, i, Some(&mut p))?;
            Ok(p)
        })
        .collect()
}
