//! Finite-difference solver for the optimal stopping problems behind the
//! trading boundaries: Crank-Nicolson in time, projected SOR per step.

mod boundary;
mod crank_nicolson;
mod psor;
mod surface;
mod trading;
mod tridiag;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, SpotModel};

pub use boundary::{extract_boundary, BoundarySet, Side, TradeBoundaries};
pub use crank_nicolson::{assemble_cn, coefficients_for, generator_coefficients, CnSystem};
pub use psor::{complementarity_residual, psor_solve, PsorOutcome, PsorSettings};
pub use surface::{solve_vi, Obstacle, ProblemTag, Sense, ValueSurface};
pub use trading::{
    solve_all, solve_chooser, solve_long_short, solve_short_long, Branch, ChooserSolution, TradingSolution,
};
pub use tridiag::Tridiagonal;

/// Which drift feeds the spatial operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Historical `(mu, theta)` with the SDE drift.
    #[default]
    Historical,
    /// Risk-neutral `(mu~, theta~)` with the SDE drift.
    RiskNeutral,
    /// Risk-neutral parameters, and for XOU the drift `mu~(theta~ - ln s)`
    /// without the factor `s`.
    Printed,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Historical => "historical",
            Generator::RiskNeutral => "risk_neutral",
            Generator::Printed => "printed",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "historical" | "p" => Ok(Generator::Historical),
            "risk_neutral" | "risk-neutral" | "q" => Ok(Generator::RiskNeutral),
            "printed" => Ok(Generator::Printed),
            other => Err(Error::InvalidInput(format!("unknown generator '{other}'"))),
        }
    }
}

/// Treatment of the two spatial edge rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCondition {
    /// Zero curvature: `g_0 = 2 g_1 - g_2` and `g_M = 2 g_{M-1} - g_{M-2}`,
    /// then lifted onto the obstacle where it falls below.
    #[default]
    Linear,
    /// Edge values held on the obstacle.
    Pinned,
}

impl fmt::Display for EdgeCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeCondition::Linear => "linear",
            EdgeCondition::Pinned => "pinned",
        })
    }
}

impl FromStr for EdgeCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(EdgeCondition::Linear),
            "pinned" | "pin" => Ok(EdgeCondition::Pinned),
            other => Err(Error::InvalidInput(format!("unknown edge condition '{other}'"))),
        }
    }
}

/// Uniform space-time grid and PSOR controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_time: usize,
    pub n_space: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub generator: Generator,
    pub edges: EdgeCondition,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_time: 500,
            n_space: 500,
            s_min: 0.0,
            s_max: 1.0,
            omega: 1.2,
            epsilon: 1e-8,
            max_iter: 10_000,
            generator: Generator::Historical,
            edges: EdgeCondition::Linear,
        }
    }
}

impl GridSpec {
    /// Default grid for `model` with `n` steps in both time and space.
    pub fn default_for(model: &SpotModel, n: usize) -> Self {
        let spread = 6.0 * model.sigma / (2.0 * model.mu_q).sqrt();
        let s_max = match model.kind {
            ModelKind::Ou => model.theta_q + spread,
            ModelKind::Cir => 4.0 * model.theta_q,
            ModelKind::Xou => (model.theta_q + spread).exp(),
        };
        let s_min = match model.kind {
            ModelKind::Xou => s_max / (n as f64 + 1.0),
            _ => 0.0,
        };
        GridSpec { n_time: n, n_space: n, s_min, s_max, ..GridSpec::default() }
    }

    /// Same grid with `n_time` and `n_space` replaced, keeping `s_max`; an XOU
    /// lower edge is moved so that it stays one space step above zero.
    pub fn with_resolution(&self, model: &SpotModel, n_time: usize, n_space: usize) -> Self {
        let s_min = match model.kind {
            ModelKind::Xou => self.s_max / (n_space as f64 + 1.0),
            _ => self.s_min,
        };
        GridSpec { n_time, n_space, s_min, ..*self }
    }

    pub fn validate(&self, model: &SpotModel) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n_time < 2 || self.n_space < 2 {
            return bad(format!("grid needs at least 2 steps (got N={}, M={})", self.n_time, self.n_space));
        }
        if self.edges == EdgeCondition::Linear && self.n_space < 3 {
            return bad(format!("linear edges need at least 3 space steps (got M={})", self.n_space));
        }
        if !(self.s_min.is_finite() && self.s_max.is_finite() && self.s_min < self.s_max) {
            return bad(format!("need s_min < s_max (got {}, {})", self.s_min, self.s_max));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return bad(format!("omega must lie in (0, 2) (got {})", self.omega));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0 (got {})", self.epsilon));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        model.check_spot(self.s_min)?;
        Ok(())
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / self.n_space as f64
    }

    pub fn dt(&self, horizon: f64) -> f64 {
        horizon / self.n_time as f64
    }

    pub fn spot(&self, i: usize) -> f64 {
        if i == self.n_space {
            self.s_max
        } else {
            self.s_min + i as f64 * self.ds()
        }
    }

    pub fn spots(&self) -> Vec<f64> {
        (0..=self.n_space).map(|i| self.spot(i)).collect()
    }

    pub(crate) fn psor_settings(&self) -> PsorSettings {
        PsorSettings { omega: self.omega, epsilon: self.epsilon, max_iter: self.max_iter }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let cir = SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33);
        let g = GridSpec::default_for(&cir, 500);
        assert_eq!(g.s_max, 4.0 * 18.16);
        assert_eq!(g.s_min, 0.0);
        assert!(g.validate(&cir).is_ok());
        let xou = SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63);
        let g = GridSpec::default_for(&xou, 500);
        assert!((g.s_min - g.ds()).abs() < 1e-12 * g.s_max);
        assert!(g.validate(&xou).is_ok());
        let ou = SpotModel::ou(2.0, 5.0, 2.0, 5.0, 1.0);
        let g = GridSpec::default_for(&ou, 100);
        assert!((g.s_max - (5.0 + 6.0 / 2.0)).abs() < 1e-12);
        assert_eq!(g.spot(100), g.s_max);
    }

    #[test]
    fn rejects_bad_grids() {
        let ou = SpotModel::ou(2.0, 5.0, 2.0, 5.0, 1.0);
        let g = GridSpec { s_max: 10.0, ..GridSpec::default() };
        assert!(g.validate(&ou).is_ok());
        assert!(GridSpec { n_time: 1, ..g }.validate(&ou).is_err());
        assert!(GridSpec { omega: 2.0, ..g }.validate(&ou).is_err());
        assert!(GridSpec { epsilon: 0.0, ..g }.validate(&ou).is_err());
        assert!(GridSpec { s_min: 10.0, ..g }.validate(&ou).is_err());
        let xou = SpotModel::xou(2.0, 1.0, 2.0, 1.0, 0.3);
        assert!(g.validate(&xou).is_err());
        assert_eq!("printed".parse::<Generator>().unwrap(), Generator::Printed);
    }
}
