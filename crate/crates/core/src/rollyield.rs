//! Roll yield: the part of a futures price change not explained by the spot.
//!
//! For a single contract over `[t1, t2]`:
//! `R(t1, t2, T) = (f_{t2} - f_{t1}) - (S_{t2} - S_{t1})`.
//!
//! Rolling through a schedule `T_1 < T_2 < ...` (contract `j` held on
//! `(T_{j-1}, T_j]`), the cumulative roll yield splits into a basis return and
//! a cumulative roll adjustment:
//!
//! `R(0, t) = [(f^{T_i}_t - S_t) - (f^{T_1}_0 - S_0)] + sum_{j<i} (S_{T_j} - f^{T_{j+1}}_{T_j})`
//!
//! with `i = i(t)` the contract live at `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{map_paths, Measure, ModelKind, PathRequest, SpotModel, SpotPath};
use crate::pricing::{futures_price, price_tau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollSchedule {
    maturities: Vec<f64>,
}

impl RollSchedule {
    pub fn new(maturities: Vec<f64>) -> Result<Self> {
        if maturities.is_empty() {
            return Err(Error::InvalidInput("roll schedule is empty".into()));
        }
        if maturities.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("roll maturities must be positive".into()));
        }
        if maturities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("roll maturities must be strictly increasing".into()));
        }
        Ok(RollSchedule { maturities })
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    /// Zero-based index of the contract held at `t`: the first `j` with
    /// `t <= T_j`. Time 0 maps to the front contract.
    pub fn contract_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("time must be >= 0 (got {t})")));
        }
        self.maturities.iter().position(|&m| t <= m).ok_or(Error::ScheduleExhausted(t))
    }

    /// Maturity of the contract held at `t`.
    pub fn live_maturity(&self, t: f64) -> Result<f64> {
        Ok(self.maturities[self.contract_index(t)?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollDecomposition {
    pub basis_return: f64,
    pub cumulative_roll_adjustment: f64,
    pub total: f64,
}

impl RollDecomposition {
    fn new(basis_return: f64, cumulative_roll_adjustment: f64) -> Self {
        RollDecomposition { basis_return, cumulative_roll_adjustment, total: basis_return + cumulative_roll_adjustment }
    }
}

/// Single-contract roll yield over `[t1, t2]` along a realised path.
pub fn roll_yield(model: &SpotModel, path: SpotPath<'_>, t1: f64, t2: f64, maturity: f64) -> Result<f64> {
    if !(t1 < t2) || t2 > maturity {
        return Err(Error::InvalidInput(format!("need t1 < t2 <= T (got t1 = {t1}, t2 = {t2}, T = {maturity})")));
    }
    let s1 = path.at(t1)?;
    let s2 = path.at(t2)?;
    let f1 = futures_price(model, t1, s1, maturity)?;
    let f2 = futures_price(model, t2, s2, maturity)?;
    Ok((f2 - f1) - (s2 - s1))
}

/// Cumulative roll yield up to `t` with its basis/adjustment split. Before
/// the first roll the adjustment is zero and the total is the front-contract
/// roll yield.
pub fn cumulative_roll_yield(
    model: &SpotModel,
    path: SpotPath<'_>,
    schedule: &RollSchedule,
    t: f64,
) -> Result<RollDecomposition> {
    let live = schedule.contract_index(t)?;
    let mats = schedule.maturities();
    let s0 = path.at(0.0)?;
    let st = path.at(t)?;
    let basis = (futures_price(model, t, st, mats[live])? - st) - (futures_price(model, 0.0, s0, mats[0])? - s0);
    let mut adjustment = 0.0;
    for j in 0..live {
        let tj = mats[j];
        let s = path.at(tj)?;
        adjustment += s - futures_price(model, tj, s, mats[j + 1])?;
    }
    Ok(RollDecomposition::new(basis, adjustment))
}

/// Which variance term enters `E[S_t]` inside the XOU expected roll yield.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XouRollForm {
    /// Lognormal moment with `sigma^2/(4 mu) (1 - e^{-2 mu t})`.
    #[default]
    Exact,
    /// The variant with `sigma^2/(4 mu) (1 - e^{-mu t})` in the spot terms.
    AsPrinted,
}

/// `E[f(t, S_t; t + tau)]` under the historical XOU dynamics.
fn xou_expected_futures(model: &SpotModel, s0: f64, t: f64, tau: f64) -> f64 {
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    let sig2 = model.sigma * model.sigma;
    let dq = (-mq * tau).exp();
    let dp = (-m * t).exp();
    (dq * dp * s0.ln()
        + (th - sig2 / (2.0 * m)) * (1.0 - dp) * dq
        + sig2 / (4.0 * m) * dq * dq * (1.0 - dp * dp)
        + (1.0 - dq) * (thq - sig2 / (2.0 * mq))
        + sig2 / (4.0 * mq) * (1.0 - dq * dq))
        .exp()
}

fn xou_expected_spot(model: &SpotModel, s0: f64, t: f64, form: XouRollForm) -> f64 {
    let (m, th) = (model.mu, model.theta);
    let sig2 = model.sigma * model.sigma;
    let dp = (-m * t).exp();
    let var_term = match form {
        XouRollForm::Exact => 1.0 - dp * dp,
        XouRollForm::AsPrinted => 1.0 - dp,
    };
    (dp * s0.ln() + (1.0 - dp) * (th - sig2 / (2.0 * m)) + sig2 / (4.0 * m) * var_term).exp()
}

/// Closed-form `E[R(0, t)]` under the historical measure.
pub fn expected_roll_yield(model: &SpotModel, s0: f64, schedule: &RollSchedule, t: f64) -> Result<f64> {
    expected_roll_yield_with(model, s0, schedule, t, XouRollForm::Exact)
}

pub fn expected_roll_yield_with(
    model: &SpotModel,
    s0: f64,
    schedule: &RollSchedule,
    t: f64,
    form: XouRollForm,
) -> Result<f64> {
    model.check_spot(s0)?;
    let live = schedule.contract_index(t)?;
    let mats = schedule.maturities();
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    match model.kind {
        ModelKind::Ou | ModelKind::Cir => {
            let mean_at = |u: f64| (s0 - th) * (-m * u).exp() + th - thq;
            let mut out =
                mean_at(t) * ((-mq * (mats[live] - t)).exp() - 1.0) - (s0 - thq) * ((-mq * mats[0]).exp() - 1.0);
            for j in 0..live {
                out += mean_at(mats[j]) * (1.0 - (-mq * (mats[j + 1] - mats[j])).exp());
            }
            Ok(out)
        }
        ModelKind::Xou => {
            let y1 = xou_expected_futures(model, s0, t, mats[live] - t) - xou_expected_spot(model, s0, t, form);
            let y2: f64 = (0..live)
                .map(|j| {
                    let tj = mats[j];
                    xou_expected_spot(model, s0, tj, form) - xou_expected_futures(model, s0, tj, mats[j + 1] - tj)
                })
                .sum();
            let front = price_tau(model, mats[0], s0) - s0;
            Ok(y1 + y2 - front)
        }
    }
}

/// Drift of `R(0, t)` under the historical measure at spot `s`.
pub fn roll_yield_drift(model: &SpotModel, t: f64, s: f64, schedule: &RollSchedule) -> Result<f64> {
    model.check_spot(s)?;
    let tau = schedule.live_maturity(t)? - t;
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    let decay = (-mq * tau).exp();
    Ok(match model.kind {
        ModelKind::Ou | ModelKind::Cir => decay * (m * (th - s) - mq * (thq - s)) - m * (th - s),
        ModelKind::Xou => {
            let ln_s = s.ln();
            (ln_s * (mq - m) + (m * th - mq * thq)) * price_tau(model, tau, s) * decay - m * (th - ln_s) * s
        }
    })
}

/// Spot level above which the OU/CIR roll-yield drift is positive. `None`
/// for XOU, where no closed form exists, or when the denominator vanishes.
pub fn roll_yield_drift_threshold(model: &SpotModel, t: f64, schedule: &RollSchedule) -> Result<Option<f64>> {
    if model.kind == ModelKind::Xou {
        return Ok(None);
    }
    let tau = schedule.live_maturity(t)? - t;
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    let decay = (-mq * tau).exp();
    let denom = decay * (mq - m) + m;
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((decay * (mq * thq - m * th) + m * th) / denom))
}

/// Instantaneous covariation rate `d<R, S>_t / dt` for a contract maturing at `T`.
pub fn covariation_rate(model: &SpotModel, t: f64, s: f64, maturity: f64) -> Result<f64> {
    if t > maturity {
        return Err(Error::PastMaturity { t, maturity });
    }
    model.check_spot(s)?;
    let tau = maturity - t;
    let decay = (-model.mu_q * tau).exp();
    let sig2 = model.sigma * model.sigma;
    Ok(match model.kind {
        ModelKind::Ou => sig2 * (decay - 1.0),
        ModelKind::Cir => sig2 * (decay - 1.0) * s,
        ModelKind::Xou => sig2 * (decay * price_tau(model, tau, s) - s) * s,
    })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MonteCarloEstimate {
    /// Sequential summation so the result does not depend on thread count.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
        MonteCarloEstimate { mean, std_err: (var / nf).sqrt(), n }
    }
}

/// Simulation setup for Monte-Carlo roll yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollSimulation {
    pub s0: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Per-path decompositions at each of `times` (historical measure).
pub fn simulate_roll_yields(
    model: &SpotModel,
    schedule: &RollSchedule,
    times: &[f64],
    sim: &RollSimulation,
) -> Result<Vec<Vec<RollDecomposition>>> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    for &t in times {
        schedule.contract_index(t)?;
    }
    let n_steps = ((horizon / sim.dt) * (1.0 + 1e-9)).floor() as usize + 1;
    let req = PathRequest { s0: sim.s0, dt: sim.dt, n_steps, n_paths: sim.n_paths, seed: sim.seed };
    let rows = map_paths(model, Measure::Historical, &req, |path| {
        times.iter().map(|&t| cumulative_roll_yield(model, path, schedule, t)).collect::<Result<Vec<_>>>()
    })?;
    rows.into_iter().collect()
}

/// Monte-Carlo estimate of `E[R(0, t)]`.
pub fn monte_carlo_roll_yield(
    model: &SpotModel,
    schedule: &RollSchedule,
    t: f64,
    sim: &RollSimulation,
) -> Result<MonteCarloEstimate> {
    let rows = simulate_roll_yields(model, schedule, &[t], sim)?;
    let totals: Vec<f64> = rows.iter().map(|r| r[0].total).collect();
    Ok(MonteCarloEstimate::from_samples(&totals))
}
