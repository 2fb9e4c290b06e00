//! Benchmark three-factor Gaussian affine model for nominal and real bonds.
//!
//! Latent factors follow `dX = −K X dt + Σ dW` with `K` diagonal and `Σ`
//! lower triangular; under the pricing measure the drift gains `Σλ0`. The
//! nominal and real short rates are `ρ0^J + ⟨ρ1^J, X⟩`, so zero-coupon bond
//! prices are `exp(A^J(τ) + ⟨B^J(τ), X⟩)` with
//!
//! ```text
//! dB/dτ = −Kᵀ B − ρ1,      dA/dτ = ⟨B, Σλ0⟩ + ½‖Σᵀ B‖² − ρ0,
//! ```
//!
//! integrated here by classical RK4 from `A(0) = B(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal of `Σ` in the benchmark specification.
pub const SIGMA_DIAG: f64 = 0.01;

/// Default integration step in years.
pub const DEFAULT_ODE_STEP: f64 = 1.0 / 64.0;

/// Agreement required between a step and its half in [`solve_ab`].
pub const HALVING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    Nominal,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    /// Diagonal of the mean-reversion matrix.
    pub kappa: [f64; 3],
    /// Diagonal of `Σ`.
    pub sigma_diag: [f64; 3],
    /// Below-diagonal entries `(σ21, σ31, σ32)`.
    pub sigma_lower: [f64; 3],
    pub rho0_n: f64,
    pub rho0_r: f64,
    pub rho1_n: [f64; 3],
    pub rho1_r: [f64; 3],
    /// Market price of risk intercept.
    pub lambda0: [f64; 3],
}

impl Default for AffineParams {
    fn default() -> Self {
        Self {
            kappa: [0.1, 0.5, 1.5],
            sigma_diag: [SIGMA_DIAG; 3],
            sigma_lower: [0.0; 3],
            rho0_n: 0.03,
            rho0_r: 0.01,
            rho1_n: [1.0, 1.0, 0.0],
            rho1_r: [1.0, 0.0, 1.0],
            lambda0: [0.0; 3],
        }
    }
}

impl AffineParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::param("kappa", "mean reversion must be positive"));
        }
        let all = self
            .sigma_diag
            .iter()
            .chain(&self.sigma_lower)
            .chain(&self.rho1_n)
            .chain(&self.rho1_r)
            .chain(&self.lambda0)
            .chain([&self.rho0_n, &self.rho0_r]);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::param("affine", "all coefficients must be finite"));
        }
        Ok(())
    }

    /// `Σ` as a dense lower-triangular matrix.
    pub fn sigma(&self) -> [[f64; 3]; 3] {
        let [d1, d2, d3] = self.sigma_diag;
        let [s21, s31, s32] = self.sigma_lower;
        [[d1, 0.0, 0.0], [s21, d2, 0.0], [s31, s32, d3]]
    }

    fn loadings(&self, leg: Leg) -> (f64, [f64; 3]) {
        match leg {
            Leg::Nominal => (self.rho0_n, self.rho1_n),
            Leg::Real => (self.rho0_r, self.rho1_r),
        }
    }

    /// The eleven short-rate and risk-price scalars in a fixed order:
    /// `ρ0N, ρ0R, ρ1N(3), ρ1R(3), λ0(3)`.
    pub fn extra_scalars(&self) -> [f64; 11] {
        let mut v = [0.0; 11];
        v[0] = self.rho0_n;
        v[1] = self.rho0_r;
        v[2..5].copy_from_slice(&self.rho1_n);
        v[5..8].copy_from_slice(&self.rho1_r);
        v[8..11].copy_from_slice(&self.lambda0);
        v
    }
}

/// `A(τ)`, `B(τ)` on the uniform grid `τ_k = k·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSolution {
    pub leg: Leg,
    pub step: f64,
    pub a: Vec<f64>,
    pub b: Vec<[f64; 3]>,
}

impl AffineSolution {
    pub fn tau_max(&self) -> f64 {
        (self.a.len() - 1) as f64 * self.step
    }

    /// `(A, B)` at `tau`, linear between grid nodes.
    pub fn at(&self, tau: f64) -> Result<(f64, [f64; 3])> {
        let tmax = self.tau_max();
        if !(tau >= 0.0 && tau <= tmax * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                what: "tau",
                value: tau,
                domain: format!("[0, {tmax}]"),
            });
        }
        let x = (tau / self.step).min((self.a.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.a.len().saturating_sub(2));
        let w = x - k as f64;
        if self.a.len() == 1 || w <= 1e-12 {
            return Ok((self.a[k], self.b[k]));
        }
        let lerp = |u: f64, v: f64| u + w * (v - u);
        let (b0, b1) = (self.b[k], self.b[k + 1]);
        Ok((
            lerp(self.a[k], self.a[k + 1]),
            [lerp(b0[0], b1[0]), lerp(b0[1], b1[1]), lerp(b0[2], b1[2])],
        ))
    }
}

fn rhs(p: &AffineParams, sig: &[[f64; 3]; 3], rho: (f64, [f64; 3]), b: &[f64; 3]) -> (f64, [f64; 3]) {
    let (rho0, rho1) = rho;
    let mut db = [0.0; 3];
    for i in 0..3 {
        db[i] = -p.kappa[i] * b[i] - rho1[i];
    }
    // Σλ0 and Σᵀ B
    let mut sl = 0.0;
    let mut st_b = [0.0; 3];
    for i in 0..3 {
        let mut s = 0.0;
        for j in 0..3 {
            s += sig[i][j] * p.lambda0[j];
            st_b[j] += sig[i][j] * b[i];
        }
        sl += b[i] * s;
    }
    let q: f64 = st_b.iter().map(|x| x * x).sum();
    (sl + 0.5 * q - rho0, db)
}

/// RK4 without the step-halving check.
pub fn integrate(p: &AffineParams, leg: Leg, tau_max: f64, step: f64) -> Result<AffineSolution> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", "ODE step must be positive"));
    }
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(Error::param("tau_max", "must be finite and >= 0"));
    }
    let sig = p.sigma();
    let rho = p.loadings(leg);
    let n = (tau_max / step - 1e-9).ceil().max(0.0) as usize;
    let mut a = Vec::with_capacity(n + 1);
    let mut b = Vec::with_capacity(n + 1);
    let (mut ac, mut bc) = (0.0, [0.0; 3]);
    a.push(ac);
    b.push(bc);
    let add = |x: &[f64; 3], d: &[f64; 3], h: f64| [x[0] + h * d[0], x[1] + h * d[1], x[2] + h * d[2]];
    for _ in 0..n {
        let (ka1, kb1) = rhs(p, &sig, rho, &bc);
        let (ka2, kb2) = rhs(p, &sig, rho, &add(&bc, &kb1, 0.5 * step));
        let (ka3, kb3) = rhs(p, &sig, rho, &add(&bc, &kb2, 0.5 * step));
        let (ka4, kb4) = rhs(p, &sig, rho, &add(&bc, &kb3, step));
        ac += step / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
        for i in 0..3 {
            bc[i] += step / 6.0 * (kb1[i] + 2.0 * kb2[i] + 2.0 * kb3[i] + kb4[i]);
        }
        a.push(ac);
        b.push(bc);
    }
    if !(ac.is_finite() && bc.iter().all(|x| x.is_finite())) {
        return Err(Error::Numerical("affine ODE blew up".into()));
    }
    Ok(AffineSolution { leg, step, a, b })
}

/// RK4 solution on `[0, tau_max]`, rejected if halving the step moves the
/// end values by more than [`HALVING_TOL`] (relative to `1 + |value|`).
pub fn solve_ab(p: &AffineParams, leg: Leg, tau_max: f64, step: f64) -> Result<AffineSolution> {
    p.validate()?;
    let coarse = integrate(p, leg, tau_max, step)?;
    // the coarse grid may overshoot tau_max; halve over the same span
    let fine = integrate(p, leg, coarse.tau_max(), 0.5 * step)?;
    let k = coarse.a.len() - 1;
    let (a, b) = (coarse.a[k], coarse.b[k]);
    let (af, bf) = (fine.a[2 * k], fine.b[2 * k]);
    let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + y.abs());
    let err = (0..3).map(|i| rel(b[i], bf[i])).fold(rel(a, af), f64::max);
    if err > HALVING_TOL {
        return Err(Error::Numerical(format!(
            "ODE step {step} too large: halving changes the solution by {err:e}"
        )));
    }
    Ok(coarse)
}

/// `exp(A(τ) + ⟨B(τ), x⟩)`.
pub fn bond_price_affine(sol: &AffineSolution, x: &[f64; 3], tau: f64) -> Result<f64> {
    let (a, b) = sol.at(tau)?;
    Ok((a + b[0] * x[0] + b[1] * x[1] + b[2] * x[2]).exp())
}

/// ZCIIS rate from the two solutions at tenor `tau > 0`.
pub fn zciis_from_solutions(
    nominal: &AffineSolution,
    real: &AffineSolution,
    x: &[f64; 3],
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Claim(format!("swap tenor {tau} must be positive")));
    }
    let (an, bn) = nominal.at(tau)?;
    let (ar, br) = real.at(tau)?;
    let mut e = (ar - an) / tau;
    for i in 0..3 {
        e += (br[i] - bn[i]) / tau * x[i];
    }
    Ok(e.exp() - 1.0)
}

/// Fair ZCIIS rate for the period `[t0, t]` at state `x`.
pub fn zciis_rate_affine(p: &AffineParams, x: &[f64; 3], t0: f64, t: f64) -> Result<f64> {
    let tau = t - t0;
    let n = solve_ab(p, Leg::Nominal, tau, DEFAULT_ODE_STEP)?;
    let r = solve_ab(p, Leg::Real, tau, DEFAULT_ODE_STEP)?;
    zciis_from_solutions(&n, &r, x, tau)
}

/// ZCIIS rates for several tenors from one integration per leg; `step`
/// should divide the tenors so no interpolation is involved.
pub fn zciis_curve_affine(
    p: &AffineParams,
    x: &[f64; 3],
    tenors: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    p.validate()?;
    let tmax = tenors.iter().cloned().fold(0.0, f64::max);
    let n = integrate(p, Leg::Nominal, tmax, step)?;
    let r = integrate(p, Leg::Real, tmax, step)?;
    tenors
        .iter()
        .map(|&t| zciis_from_solutions(&n, &r, x, t))
        .collect()
}
