//! Model builders and closed-form oracles shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use ecb_inflation::{
    EcbParams, InflationParams, JumpRule, JumpSpec, ModelParams, RateBand, ShortRateParams,
    SigmaSpec,
};

/// Moves up one step with probability `up` whenever that stays inside the
/// band, otherwise stays; ignores inflation.
pub struct UpRule {
    pub up: f64,
}

impl JumpRule for UpRule {
    fn fill(&self, _pi: f64, r: f64, band: &RateBand, out: &mut [f64]) {
        out.iter_mut().for_each(|q| *q = 0.0);
        let m = band.m;
        let up = if band.admits(r, 1) { self.up } else { 0.0 };
        out[m + 1] = up;
        out[m] = 1.0 - up;
    }

    fn name(&self) -> &str {
        "up"
    }
}

/// Symmetric ±1 step rule independent of inflation.
pub struct SymmetricRule {
    pub p: f64,
}

impl JumpRule for SymmetricRule {
    fn fill(&self, _pi: f64, r: f64, band: &RateBand, out: &mut [f64]) {
        out.iter_mut().for_each(|q| *q = 0.0);
        let m = band.m;
        let up = if band.admits(r, 1) { self.p } else { 0.0 };
        let down = if band.admits(r, -1) { self.p } else { 0.0 };
        out[m + 1] = up;
        out[m - 1] = down;
        out[m] = 1.0 - up - down;
    }
}

/// Reference model with its ECB clock replaced.
pub fn with_jumps(lambda_bar: f64, jumps: JumpSpec) -> ModelParams {
    let base = ModelParams::reference();
    let ecb = EcbParams {
        lambda_bar,
        jumps,
        ..base.ecb().clone()
    };
    base.with_ecb(ecb).unwrap()
}

pub fn custom(rule: impl JumpRule + 'static) -> JumpSpec {
    JumpSpec::Custom(Arc::new(rule))
}

/// Reference model without ECB moves and with `b(r) ≡ b0`, constant `σ0`.
pub fn cir_model(k_sh: f64, b0: f64, sigma0: f64) -> ModelParams {
    with_jumps(0.0, JumpSpec::threshold(1.02f64.ln(), 0.02))
        .with_short(ShortRateParams::new(k_sh, b0, 0.0, SigmaSpec::Constant(sigma0)).unwrap())
        .unwrap()
}

/// Reference model with the given inflation block.
pub fn with_inflation(alpha: f64, beta: f64, k_pi: f64, pi_star: f64, v: f64) -> ModelParams {
    ModelParams::reference()
        .with_inflation(InflationParams::new(alpha, beta, k_pi, pi_star, v).unwrap())
        .unwrap()
}

/// Zero-coupon price for `dz = k(θ − z)dt + σ√z dW` discounted at `z`.
pub fn cir_price(k: f64, theta: f64, sigma: f64, tau: f64, z: f64) -> f64 {
    let g = (k * k + 2.0 * sigma * sigma).sqrt();
    let e = (g * tau).exp() - 1.0;
    let den = (g + k) * e + 2.0 * g;
    let b = 2.0 * e / den;
    let a = (2.0 * g * ((k + g) * tau / 2.0).exp() / den).powf(2.0 * k * theta / (sigma * sigma));
    a * (-b * z).exp()
}
