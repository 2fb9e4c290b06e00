//! Model parameters and the pointwise model functions shared by the
//! simulator and the PIDE solver.
//!
//! Three factors are modelled:
//!
//! - `Π`: annualized log-inflation, piecewise constant, resampled every `t1`
//!   years as `γ(Π, R) + ε` with `ε ~ N(0, v²)`;
//! - `R`: the ECB official rate, a pure-jump process on a `δ` lattice inside
//!   `(r_min, r_max)`, driven by a Poisson clock of rate `λ̄` whose marks are
//!   drawn from the jump law `q(π, r, kδ)`, `k = -m..=m` (zero jumps allowed);
//! - `R^sh`: the short rate, a square-root diffusion reverting to `b(R)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on `Σ_k q = 1`.
pub const JUMP_LAW_TOL: f64 = 1e-12;

/// Point in the `(π, r, z)` state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub pi: f64,
    pub r: f64,
    pub z: f64,
}

impl State {
    pub fn new(pi: f64, r: f64, z: f64) -> Self {
        Self { pi, r, z }
    }
}

/// Coefficients of the monthly inflation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationParams {
    pub alpha: f64,
    pub beta: f64,
    pub k_pi: f64,
    pub pi_star: f64,
    /// Standard deviation of the monthly shock.
    pub v: f64,
}

impl InflationParams {
    pub fn new(alpha: f64, beta: f64, k_pi: f64, pi_star: f64, v: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            k_pi,
            pi_star,
            v,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.k_pi, self.pi_star, self.v];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("inflation", "non-finite coefficient"));
        }
        let a = self.persistence();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param(
                "alpha - k_pi",
                format!("{a} must lie in (0, 1) for mean reversion"),
            ));
        }
        if self.k_pi < 0.0 {
            return Err(Error::param("k_pi", "must be nonnegative"));
        }
        if self.pi_star < 0.0 {
            return Err(Error::param("pi_star", "must be nonnegative"));
        }
        if self.v <= 0.0 {
            return Err(Error::param("v", "shock deviation must be positive"));
        }
        Ok(())
    }

    /// `α − k^Π`, the AR(1) coefficient of the monthly update.
    #[inline]
    pub fn persistence(&self) -> f64 {
        self.alpha - self.k_pi
    }

    /// Deterministic part of the monthly inflation update.
    #[inline]
    pub fn gamma(&self, pi: f64, r: f64) -> f64 {
        self.persistence() * pi + self.k_pi * self.pi_star + self.beta * r
    }

    /// Fixed point of `π ↦ γ(π, r)`.
    #[inline]
    pub fn reversion_level(&self, r: f64) -> f64 {
        (self.k_pi * self.pi_star + self.beta * r) / (self.k_pi - self.alpha + 1.0)
    }
}

/// Source of the ECB jump probabilities `q(π, r, kδ)` for `k = -m..=m`.
///
/// Implementations write `2m + 1` probabilities into `out`, ordered from
/// `k = -m` to `k = m`. The result is checked on every call: entries must lie
/// in `[0, 1]`, sum to one within [`JUMP_LAW_TOL`], and vanish whenever
/// `r + kδ` leaves the open band. Rules are never repaired.
pub trait JumpRule: Send + Sync {
    fn fill(&self, pi: f64, r: f64, band: &RateBand, out: &mut [f64]);

    fn name(&self) -> &str {
        "custom"
    }
}

/// The admissible rate band and its lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBand {
    pub r_min: f64,
    pub r_max: f64,
    pub delta: f64,
    pub m: usize,
}

impl RateBand {
    #[inline]
    pub fn contains(&self, r: f64) -> bool {
        r > self.r_min && r < self.r_max
    }

    /// Whether a jump of `k` steps from `r` stays inside the band.
    #[inline]
    pub fn admits(&self, r: f64, k: i64) -> bool {
        self.contains(r + k as f64 * self.delta)
    }
}

/// Jump law of the ECB rate.
#[derive(Clone)]
pub enum JumpSpec {
    /// Dead-zone/ramp rule: upward moves when inflation exceeds
    /// `π* + 0.2σ_Π` (reaching certainty at `π* + 0.5σ_Π`), downward moves
    /// symmetrically below `π* − 0.2σ_Π`. Each side is damped linearly over
    /// three rate steps next to the band edges. Only `k = ±1` are used.
    Threshold { pi_star: f64, sigma_pi: f64 },
    Custom(Arc<dyn JumpRule>),
}

impl fmt::Debug for JumpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpSpec::Threshold { pi_star, sigma_pi } => f
                .debug_struct("Threshold")
                .field("pi_star", pi_star)
                .field("sigma_pi", sigma_pi)
                .finish(),
            JumpSpec::Custom(rule) => write!(f, "Custom({})", rule.name()),
        }
    }
}

#[inline]
fn ramp(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

impl JumpSpec {
    pub fn threshold(pi_star: f64, sigma_pi: f64) -> Self {
        JumpSpec::Threshold { pi_star, sigma_pi }
    }

    fn fill(&self, pi: f64, r: f64, band: &RateBand, out: &mut [f64]) {
        match self {
            JumpSpec::Threshold { pi_star, sigma_pi } => {
                out.iter_mut().for_each(|q| *q = 0.0);
                let m = band.m;
                let d = band.delta;
                let up = if band.admits(r, 1) {
                    ramp((pi - (pi_star + 0.2 * sigma_pi)) / (0.3 * sigma_pi))
                        * ramp(((band.r_max - d) - r) / (3.0 * d))
                } else {
                    0.0
                };
                let down = if band.admits(r, -1) {
                    ramp(((pi_star - 0.2 * sigma_pi) - pi) / (0.3 * sigma_pi))
                        * ramp((r - (band.r_min + d)) / (3.0 * d))
                } else {
                    0.0
                };
                out[m + 1] = up;
                out[m - 1] = down;
                out[m] = 1.0 - up - down;
            }
            JumpSpec::Custom(rule) => rule.fill(pi, r, band, out),
        }
    }
}

/// ECB rate band, lattice step, jump clock and jump law.
#[derive(Debug, Clone)]
pub struct EcbParams {
    pub band: RateBand,
    /// Rate of the Poisson clock; zero switches the ECB rate off.
    pub lambda_bar: f64,
    pub jumps: JumpSpec,
}

impl EcbParams {
    pub fn new(
        r_min: f64,
        r_max: f64,
        delta: f64,
        m: usize,
        lambda_bar: f64,
        jumps: JumpSpec,
    ) -> Result<Self> {
        let p = Self {
            band: RateBand {
                r_min,
                r_max,
                delta,
                m,
            },
            lambda_bar,
            jumps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.band;
        if !(b.r_min.is_finite() && b.r_max.is_finite() && b.delta.is_finite()) {
            return Err(Error::param("ecb band", "non-finite bound"));
        }
        if b.r_min < -1.0 {
            return Err(Error::param("r_min", "rates are bounded below by -1"));
        }
        if b.r_min >= b.r_max {
            return Err(Error::param("r_min", "must be below r_max"));
        }
        if b.delta <= 0.0 {
            return Err(Error::param("delta", "must be positive"));
        }
        if b.m == 0 {
            return Err(Error::param("m", "at least one jump size is required"));
        }
        if b.r_min + b.delta > b.r_max {
            return Err(Error::param("delta", "band admits no rate transition"));
        }
        if !(self.lambda_bar >= 0.0 && self.lambda_bar.is_finite()) {
            return Err(Error::param("lambda_bar", "must be finite and nonnegative"));
        }
        if let JumpSpec::Threshold { sigma_pi, pi_star } = self.jumps {
            if !(sigma_pi > 0.0 && sigma_pi.is_finite() && pi_star.is_finite()) {
                return Err(Error::param("sigma_pi", "threshold rule needs sigma_pi > 0"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.band.m
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.band.delta
    }

    /// Jump probabilities for `k = -m..=m`.
    pub fn q_probs(&self, pi: f64, r: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; 2 * self.band.m + 1];
        self.q_probs_into(pi, r, &mut out)?;
        Ok(out)
    }

    /// Allocation-free [`EcbParams::q_probs`]; `out.len()` must be `2m + 1`.
    pub fn q_probs_into(&self, pi: f64, r: f64, out: &mut [f64]) -> Result<()> {
        let band = &self.band;
        if !band.contains(r) {
            return Err(Error::Domain {
                what: "r",
                value: r,
                domain: format!("({}, {})", band.r_min, band.r_max),
            });
        }
        assert_eq!(out.len(), 2 * band.m + 1, "jump law buffer size");
        self.jumps.fill(pi, r, band, out);
        let m = band.m as i64;
        let mut sum = 0.0;
        for (i, &q) in out.iter().enumerate() {
            let k = i as i64 - m;
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::JumpLaw {
                    pi,
                    r,
                    reason: format!("q(k = {k}) = {q} is not a probability"),
                });
            }
            if q != 0.0 && k != 0 && !band.admits(r, k) {
                return Err(Error::JumpLaw {
                    pi,
                    r,
                    reason: format!("q(k = {k}) = {q} leaves the rate band"),
                });
            }
            sum += q;
        }
        if (sum - 1.0).abs() > JUMP_LAW_TOL {
            return Err(Error::JumpLaw {
                pi,
                r,
                reason: format!("probabilities sum to {sum}"),
            });
        }
        Ok(())
    }

    /// Rate increment for a uniform draw `u`, by inverse transform over the
    /// cumulative law ordered `k = -m, …, 0, …, m`. Zero-probability atoms
    /// are never selected.
    pub fn jump(&self, pi: f64, r: f64, u: f64) -> Result<f64> {
        let mut q = [0.0; 9];
        let n = 2 * self.band.m + 1;
        if n <= q.len() {
            self.q_probs_into(pi, r, &mut q[..n])?;
            Ok(select_jump(&q[..n], u, self.band.m, self.band.delta))
        } else {
            let q = self.q_probs(pi, r)?;
            Ok(select_jump(&q, u, self.band.m, self.band.delta))
        }
    }
}

/// Inverse-transform selection over `q` ordered `k = -m..=m`.
pub fn select_jump(q: &[f64], u: f64, m: usize, delta: f64) -> f64 {
    let mut cum = 0.0;
    let mut last = m;
    for (i, &qi) in q.iter().enumerate() {
        if qi <= 0.0 {
            continue;
        }
        cum += qi;
        last = i;
        if u <= cum {
            return (i as i64 - m as i64) as f64 * delta;
        }
    }
    // u above a cumulative sum that rounded below one
    (last as i64 - m as i64) as f64 * delta
}

/// Squared short-rate volatility as a function of the squared spread
/// `|R − R^sh|²`, with declared bounds `σ0² ≤ σ̄²(q) ≤ σ1 (1 + √q)`.
#[derive(Clone)]
pub enum SigmaSpec {
    /// `σ̄ ≡ σ0`.
    Constant(f64),
    /// `σ̄(q) = (1 + q)^{1/4}`.
    QuarticRoot,
    Custom {
        sigma_sq: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        sigma0_sq: f64,
        sigma1: f64,
    },
}

impl fmt::Debug for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Constant(s) => write!(f, "Constant({s})"),
            SigmaSpec::QuarticRoot => write!(f, "QuarticRoot"),
            SigmaSpec::Custom {
                sigma0_sq, sigma1, ..
            } => write!(f, "Custom {{ sigma0_sq: {sigma0_sq}, sigma1: {sigma1} }}"),
        }
    }
}

impl SigmaSpec {
    /// `(σ0², σ1)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            SigmaSpec::Constant(s) => (s * s, s * s),
            SigmaSpec::QuarticRoot => (1.0, 1.0),
            SigmaSpec::Custom {
                sigma0_sq, sigma1, ..
            } => (*sigma0_sq, *sigma1),
        }
    }

    #[inline]
    fn eval(&self, q: f64) -> f64 {
        match self {
            SigmaSpec::Constant(s) => s * s,
            SigmaSpec::QuarticRoot => (1.0 + q).sqrt(),
            SigmaSpec::Custom { sigma_sq, .. } => sigma_sq(q),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, s1) = self.bounds();
        if !(lo > 0.0 && lo.is_finite() && s1.is_finite()) {
            return Err(Error::param("sigma0", "lower volatility bound must be positive"));
        }
        for i in 0..=1000 {
            let q = i as f64 * 0.1;
            let s = self.eval(q);
            let hi = s1 * (1.0 + q.sqrt());
            if !(s.is_finite() && s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)) {
                return Err(Error::param(
                    "sigma_bar",
                    format!("sigma_bar^2({q}) = {s} outside [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }
}

/// Short-rate mean reversion, drift target `b(r) = b0 + b1·r` and volatility.
#[derive(Debug, Clone)]
pub struct ShortRateParams {
    pub k_sh: f64,
    pub b0: f64,
    pub b1: f64,
    pub sigma: SigmaSpec,
}

impl ShortRateParams {
    pub fn new(k_sh: f64, b0: f64, b1: f64, sigma: SigmaSpec) -> Result<Self> {
        let p = Self { k_sh, b0, b1, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_sh > 0.0 && self.k_sh.is_finite()) {
            return Err(Error::param("k_sh", "must be positive"));
        }
        if !(self.b0.is_finite() && self.b1.is_finite()) {
            return Err(Error::param("b", "non-finite coefficient"));
        }
        self.sigma.validate()
    }

    #[inline]
    pub fn drift_b(&self, r: f64) -> f64 {
        self.b0 + self.b1 * r
    }

    pub fn sigma_bar_sq(&self, spread_sq: f64) -> Result<f64> {
        if !(spread_sq >= 0.0) {
            return Err(Error::Domain {
                what: "spread_sq",
                value: spread_sq,
                domain: "[0, inf)".into(),
            });
        }
        Ok(self.sigma.eval(spread_sq))
    }

    /// Unchecked variant for inner loops; the caller guarantees `spread_sq ≥ 0`.
    #[inline]
    pub(crate) fn sigma_sq_unchecked(&self, spread_sq: f64) -> f64 {
        self.sigma.eval(spread_sq)
    }
}

/// All model coefficients, validated jointly.
#[derive(Debug, Clone)]
pub struct ModelParams {
    inflation: InflationParams,
    ecb: EcbParams,
    short: ShortRateParams,
    t1: f64,
}

impl ModelParams {
    pub fn new(
        inflation: InflationParams,
        ecb: EcbParams,
        short: ShortRateParams,
        t1: f64,
    ) -> Result<Self> {
        inflation.validate()?;
        ecb.validate()?;
        short.validate()?;
        if !(t1 > 0.0 && t1.is_finite()) {
            return Err(Error::param("t1", "observation period must be positive"));
        }
        let band = &ecb.band;
        let b_lo = short.drift_b(band.r_min);
        let b_hi = short.drift_b(band.r_max);
        let b_inf = b_lo.min(b_hi);
        if b_inf <= 0.0 {
            return Err(Error::param(
                "b0, b1",
                format!("b(r) must be positive on the band, got inf b = {b_inf}"),
            ));
        }
        let feller_arg = band.r_max - band.r_min.min(0.0);
        let rhs = 0.5 * short.sigma_bar_sq(feller_arg)?;
        if short.k_sh * b_inf <= rhs {
            return Err(Error::param(
                "k_sh",
                format!(
                    "Feller-type condition k_sh inf b = {} must exceed {rhs}",
                    short.k_sh * b_inf
                ),
            ));
        }
        Ok(Self {
            inflation,
            ecb,
            short,
            t1,
        })
    }

    /// A feasible parameter set in the range of the euro-area calibration:
    /// α = 1, π* = ln 1.02, 25 bp steps on (0.05%, 4.5%), threshold jump law.
    pub fn reference() -> Self {
        let pi_star = 1.02f64.ln();
        let sigma_pi = 0.02;
        let inflation = InflationParams::new(1.0, 0.2, 0.3, pi_star, sigma_pi).unwrap();
        let ecb = EcbParams::new(
            0.0005,
            0.045,
            0.0025,
            1,
            1.5,
            JumpSpec::threshold(pi_star, sigma_pi),
        )
        .unwrap();
        let short = ShortRateParams::new(0.8, 0.004, 0.9, SigmaSpec::Constant(0.05)).unwrap();
        Self::new(inflation, ecb, short, 1.0 / 12.0).unwrap()
    }

    #[inline]
    pub fn inflation(&self) -> &InflationParams {
        &self.inflation
    }

    #[inline]
    pub fn ecb(&self) -> &EcbParams {
        &self.ecb
    }

    #[inline]
    pub fn short(&self) -> &ShortRateParams {
        &self.short
    }

    #[inline]
    pub fn t1(&self) -> f64 {
        self.t1
    }

    #[inline]
    pub fn band(&self) -> &RateBand {
        &self.ecb.band
    }

    /// Copy with a different inflation block, revalidated.
    pub fn with_inflation(&self, inflation: InflationParams) -> Result<Self> {
        Self::new(inflation, self.ecb.clone(), self.short.clone(), self.t1)
    }

    pub fn with_ecb(&self, ecb: EcbParams) -> Result<Self> {
        Self::new(self.inflation, ecb, self.short.clone(), self.t1)
    }

    pub fn with_short(&self, short: ShortRateParams) -> Result<Self> {
        Self::new(self.inflation, self.ecb.clone(), short, self.t1)
    }
}
