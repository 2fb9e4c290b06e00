//! Joint model of euro-area inflation, the ECB policy rate and the short
//! rate, with PIDE and Monte Carlo pricing of inflation-linked claims,
//! an affine benchmark and calibration to zero-coupon inflation swaps.

pub mod affine;
pub mod calibration;
pub mod claims;
pub mod data_io;
pub mod error;
pub mod model;
pub mod pide;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    EcbParams, InflationParams, JumpRule, JumpSpec, ModelParams, RateBand, ShortRateParams,
    SigmaSpec, State,
};
