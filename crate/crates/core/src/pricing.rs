//! Closed-form futures prices, their drift under the historical measure, and
//! term-structure shape classification.
//!
//! The futures price is the risk-neutral expectation of the spot at maturity.
//! OU and CIR share the affine form `(s - th_q) e^{-mu_q tau} + th_q`; XOU is
//! the lognormal moment of an OU log-price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, SpotModel};

/// Trading-day year used by the `Nd` maturity notation.
pub const DAYS_PER_YEAR: f64 = 252.0;

pub fn days_to_years(days: f64) -> f64 {
    days / DAYS_PER_YEAR
}

/// Futures contract and trading costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    /// Futures maturity `T` (years).
    pub maturity: f64,
    /// Trading deadline `T̂ <= T` (years).
    pub deadline: f64,
    /// Subjective discount rate.
    pub rate: f64,
    /// Cost paid when selling (closing a long or opening a short).
    pub cost: f64,
    /// Cost paid when buying (opening a long or closing a short).
    pub cost_hat: f64,
}

impl ContractSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.maturity, self.deadline, self.rate, self.cost, self.cost_hat].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("contract fields must be finite".into()));
        }
        if !(self.deadline > 0.0 && self.deadline <= self.maturity) {
            return Err(Error::InvalidInput(format!(
                "need 0 < deadline <= maturity (got deadline {}, maturity {})",
                self.deadline, self.maturity
            )));
        }
        if !(self.rate > 0.0) {
            return Err(Error::InvalidInput(format!("rate must be > 0 (got {})", self.rate)));
        }
        if self.cost < 0.0 || self.cost_hat < 0.0 {
            return Err(Error::InvalidInput("transaction costs must be >= 0".into()));
        }
        Ok(())
    }

    /// Same contract with the deadline moved to maturity.
    pub fn hold_to_maturity(self) -> Self {
        ContractSpec { deadline: self.maturity, ..self }
    }

    pub fn without_costs(self) -> Self {
        ContractSpec { cost: 0.0, cost_hat: 0.0, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slope {
    Up,
    Down,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curvature {
    Convex,
    Concave,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermStructureRegime {
    pub slope: Slope,
    pub curvature: Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuturesCurve {
    pub maturities: Vec<f64>,
    pub prices: Vec<f64>,
    pub s0: f64,
}

impl FuturesCurve {
    pub fn new(s0: f64, maturities: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if maturities.len() != prices.len() {
            return Err(Error::InvalidInput("maturities and prices differ in length".into()));
        }
        if maturities.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("maturities must be positive".into()));
        }
        if maturities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("maturities must be strictly increasing".into()));
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("prices must be finite".into()));
        }
        Ok(FuturesCurve { maturities, prices, s0 })
    }

    pub fn len(&self) -> usize {
        self.maturities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maturities.is_empty()
    }
}

/// Futures price with time-to-maturity `tau`; the spot is assumed in domain.
pub(crate) fn price_tau(model: &SpotModel, tau: f64, s: f64) -> f64 {
    let decay = (-model.mu_q * tau).exp();
    match model.kind {
        ModelKind::Ou | ModelKind::Cir => (s - model.theta_q) * decay + model.theta_q,
        ModelKind::Xou => xou_log_price(model, tau, s.ln()).exp(),
    }
}

/// `ln f` for XOU as a function of `ln s`.
pub(crate) fn xou_log_price(model: &SpotModel, tau: f64, ln_s: f64) -> f64 {
    let m = model.mu_q;
    let sig2 = model.sigma * model.sigma;
    let decay = (-m * tau).exp();
    if tau == 0.0 {
        return ln_s;
    }
    decay * ln_s + (1.0 - decay) * (model.theta_q - sig2 / (2.0 * m)) + sig2 / (4.0 * m) * (1.0 - decay * decay)
}

fn check_time(t: f64, maturity: f64) -> Result<()> {
    if !t.is_finite() || !maturity.is_finite() {
        return Err(Error::InvalidInput("times must be finite".into()));
    }
    if t > maturity {
        return Err(Error::PastMaturity { t, maturity });
    }
    Ok(())
}

/// `f(t, s; T)`.
pub fn futures_price(model: &SpotModel, t: f64, s: f64, maturity: f64) -> Result<f64> {
    check_time(t, maturity)?;
    model.check_spot(s)?;
    if t == maturity {
        return Ok(s);
    }
    Ok(price_tau(model, maturity - t, s))
}

/// Drift of `f(t, S_t; T)` under the historical measure, written in terms of
/// the current spot.
pub fn futures_drift_p(model: &SpotModel, t: f64, s: f64, maturity: f64) -> Result<f64> {
    check_time(t, maturity)?;
    model.check_spot(s)?;
    let tau = maturity - t;
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    let decay = (-mq * tau).exp();
    Ok(match model.kind {
        ModelKind::Ou | ModelKind::Cir => decay * (m * (th - s) - mq * (thq - s)),
        ModelKind::Xou => {
            let sig2 = model.sigma * model.sigma;
            let f = price_tau(model, tau, s);
            let bracket =
                (f.ln() + (decay - 1.0) * (thq - sig2 / (2.0 * mq)) + sig2 / (4.0 * mq) * (decay * decay - 1.0))
                    * (mq - m)
                    + decay * (m * th - mq * thq);
            bracket * f
        }
    })
}

/// Spot level where the XOU futures drift changes sign,
/// `exp((mu_q th_q - mu th) / (mu_q - mu))`. `None` when `mu_q == mu`
/// (the drift sign is then the sign of `mu th - mu_q th_q` everywhere).
pub fn xou_drift_sign_threshold(model: &SpotModel) -> Option<f64> {
    let denom = model.mu_q - model.mu;
    if denom == 0.0 {
        return None;
    }
    Some(((model.mu_q * model.theta_q - model.mu * model.theta) / denom).exp())
}

/// Log-spot thresholds that separate the four XOU term-structure regimes at
/// maturity `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XouThresholds {
    /// `ln s0` above which the curve slopes down.
    pub slope: f64,
    /// `ln s0` above which a downward curve is convex.
    pub upper: f64,
    /// `ln s0` below which an upward curve is convex.
    pub lower: f64,
}

pub fn xou_thresholds(model: &SpotModel, maturity: f64) -> XouThresholds {
    let m = model.mu_q;
    let sig2 = model.sigma * model.sigma;
    let grow = (m * maturity).exp();
    let slope = model.theta_q - sig2 / (2.0 * m) * (1.0 - (-m * maturity).exp());
    let root = (grow * grow / 4.0 + sig2 / (2.0 * m)).sqrt();
    XouThresholds { slope, upper: slope + root - grow / 2.0, lower: slope - root - grow / 2.0 }
}

const REGIME_TOL: f64 = 1e-12;

fn at_threshold(x: f64, threshold: f64) -> bool {
    (x - threshold).abs() <= REGIME_TOL * threshold.abs().max(1.0)
}

/// Shape of the futures curve `T -> f(0, s0; T)` at maturity `T`.
pub fn classify_term_structure(model: &SpotModel, s0: f64, maturity: f64) -> Result<TermStructureRegime> {
    model.check_spot(s0)?;
    match model.kind {
        ModelKind::Ou | ModelKind::Cir => {
            let thq = model.theta_q;
            Ok(if at_threshold(s0, thq) {
                TermStructureRegime { slope: Slope::Flat, curvature: Curvature::Flat }
            } else if s0 < thq {
                TermStructureRegime { slope: Slope::Up, curvature: Curvature::Concave }
            } else {
                TermStructureRegime { slope: Slope::Down, curvature: Curvature::Convex }
            })
        }
        ModelKind::Xou => {
            let x = s0.ln();
            let th = xou_thresholds(model, maturity);
            let slope = if at_threshold(x, th.slope) {
                Slope::Flat
            } else if x > th.slope {
                Slope::Down
            } else {
                Slope::Up
            };
            let curvature = if at_threshold(x, th.upper) || at_threshold(x, th.lower) {
                Curvature::Flat
            } else if x > th.upper || x < th.lower {
                Curvature::Convex
            } else {
                Curvature::Concave
            };
            Ok(TermStructureRegime { slope, curvature })
        }
    }
}

/// Futures curve at `t = 0` for the given maturities.
pub fn term_structure(model: &SpotModel, s0: f64, maturities: &[f64]) -> Result<FuturesCurve> {
    let prices = maturities
        .iter()
        .map(|&m| {
            if !(m > 0.0) {
                return Err(Error::InvalidInput(format!("maturity must be positive (got {m})")));
            }
            futures_price(model, 0.0, s0, m)
        })
        .collect::<Result<Vec<_>>>()?;
    FuturesCurve::new(s0, maturities.to_vec(), prices)
}
