//! Futures on mean-reverting spot prices: pricing, calibration, roll yield
//! and optimal entry/exit boundaries.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod models;
pub mod premium;
pub mod pricing;
pub mod rollyield;
pub mod vi_solver;

pub use error::{Error, Result};
pub use models::{Measure, ModelKind, PathRequest, PathSet, SpotModel, SpotPath};
pub use pricing::{futures_price, ContractSpec, FuturesCurve};
