//! Delayed liquidation premium: the integrand whose sign decides between
//! holding to maturity and closing now, a sign scan over a finite box, and
//! the premium itself from the optimal stopping solver.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelKind, SpotModel};
use crate::pricing::{futures_price, price_tau, ContractSpec};
use crate::vi_solver::{solve_vi, GridSpec, Obstacle, ProblemTag, Sense, ValueSurface};

/// Which algebraic form of the integrand to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandForm {
    /// Drift of `e^{-r(u-t)} (f(u, S_u; T) - c)` under the historical
    /// measure, undiscounted. Its exponents run over the time left to
    /// maturity, `T - u`.
    #[default]
    Consistent,
    /// The textbook expressions with the exponent `u - t`, and for XOU the
    /// `+r` / `-rc` signs and the price evaluated at time-to-maturity `u - t`.
    AsPrinted,
}

fn check_times(contract: &ContractSpec, t: f64, u: f64) -> Result<()> {
    if !(t.is_finite() && u.is_finite()) {
        return Err(Error::InvalidInput("times must be finite".into()));
    }
    if t > u {
        return Err(Error::InvalidInput(format!("need t <= u (got t={t}, u={u})")));
    }
    if u > contract.maturity {
        return Err(Error::PastMaturity { t: u, maturity: contract.maturity });
    }
    Ok(())
}

/// Integrand `G(u, s)` for an analysis started at time `t`:
///
/// * OU/CIR: `e^{-mu~(T-u)} (mu(theta - s) + (r - mu~)(theta~ - s)) + r(c - theta~)`
/// * XOU: `{-r + [mu(theta - ln s) - mu~(theta~ - ln s)] e^{-mu~(T-u)}} f(u, s; T) + r c`
///
/// Both are `(d/du + L - r)(f - c)` with `L` the historical generator.
/// `t` only enters through the domain check `t <= u`.
pub fn premium_integrand(model: &SpotModel, contract: &ContractSpec, t: f64, u: f64, s: f64) -> Result<f64> {
    integrand(model, contract, t, u, s, IntegrandForm::Consistent)
}

/// Same as [`premium_integrand`] in the as-printed form: the OU/CIR exponent
/// is `e^{-mu~(u-t)}` and the XOU expression is
/// `{r + [mu(theta - ln s) - mu~(theta~ - ln s)] e^{-mu~(u-t)}} f_{u-t}(s) - r c`.
pub fn premium_integrand_as_printed(model: &SpotModel, contract: &ContractSpec, t: f64, u: f64, s: f64) -> Result<f64> {
    integrand(model, contract, t, u, s, IntegrandForm::AsPrinted)
}

pub fn integrand(
    model: &SpotModel,
    contract: &ContractSpec,
    t: f64,
    u: f64,
    s: f64,
    form: IntegrandForm,
) -> Result<f64> {
    check_times(contract, t, u)?;
    model.check_spot(s)?;
    let (m, th, mq, thq) = (model.mu, model.theta, model.mu_q, model.theta_q);
    let (r, c) = (contract.rate, contract.cost);
    let tau = match form {
        IntegrandForm::Consistent => contract.maturity - u,
        IntegrandForm::AsPrinted => u - t,
    };
    let decay = (-mq * tau).exp();
    Ok(match model.kind {
        ModelKind::Ou | ModelKind::Cir => decay * (m * (th - s) + (r - mq) * (thq - s)) + r * (c - thq),
        ModelKind::Xou => {
            let ln_s = s.ln();
            let drift_gap = (m * (th - ln_s) - mq * (thq - ln_s)) * decay;
            let f = price_tau(model, tau, s);
            match form {
                IntegrandForm::Consistent => (drift_gap - r) * f + r * c,
                IntegrandForm::AsPrinted => (drift_gap + r) * f - r * c,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    HoldToMaturity,
    LiquidateNow,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HoldToMaturity => "hold_to_maturity",
            Verdict::LiquidateNow => "liquidate_now",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Closed spot interval sampled by [`classify_liquidation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotBox {
    pub lo: f64,
    pub hi: f64,
    /// Sample `ln s` uniformly instead of `s`.
    pub log_spaced: bool,
}

impl SpotBox {
    /// `[0, 3 max(s0, theta~)]` for OU/CIR. For XOU, with `m = max(s0, e^theta~)`,
    /// the log-spaced box `[m / 20, 3 m]`.
    pub fn default_for(model: &SpotModel, s0: f64) -> Self {
        match model.kind {
            ModelKind::Ou | ModelKind::Cir => SpotBox { lo: 0.0, hi: 3.0 * s0.max(model.theta_q), log_spaced: false },
            ModelKind::Xou => {
                let m = s0.max(model.theta_q.exp());
                SpotBox { lo: m / 20.0, hi: 3.0 * m, log_spaced: true }
            }
        }
    }

    fn sample(&self, k: usize, n: usize) -> f64 {
        if k + 1 == n {
            return self.hi;
        }
        let w = k as f64 / (n - 1) as f64;
        if self.log_spaced {
            (self.lo.ln() + w * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + w * (self.hi - self.lo)
        }
    }
}

/// Summary of the sampled `(u, s)` sign grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignEvidence {
    pub t: f64,
    pub maturity: f64,
    pub spots: SpotBox,
    pub n_u: usize,
    pub n_s: usize,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub min: f64,
    pub max: f64,
}

/// Verdict on the sampled box only. A sign that holds for every spot level
/// cannot be established by a finite scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiquidationAdvice {
    pub verdict: Verdict,
    pub evidence: SignEvidence,
}

/// Evaluates the consistent integrand on an `n_u x n_s` grid over
/// `[t, T] x s_box` and classifies by sign: `HoldToMaturity` when no sample is
/// negative and one is positive, `LiquidateNow` for the mirror case, and
/// `Indeterminate` otherwise (both signs, or identically zero).
pub fn classify_liquidation(
    model: &SpotModel,
    contract: &ContractSpec,
    t: f64,
    s_box: SpotBox,
    n_samples: (usize, usize),
) -> Result<LiquidationAdvice> {
    let (n_u, n_s) = n_samples;
    if n_u < 2 || n_s < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples per axis (got {n_u} x {n_s})")));
    }
    if !(s_box.lo <= s_box.hi) || (s_box.log_spaced && !(s_box.lo > 0.0)) {
        return Err(Error::InvalidInput(format!("bad spot box [{}, {}]", s_box.lo, s_box.hi)));
    }
    model.check_spot(s_box.lo)?;
    model.check_spot(s_box.hi)?;
    check_times(contract, t, contract.maturity)?;
    let span = contract.maturity - t;
    let rows: Vec<Vec<f64>> = (0..n_u)
        .into_par_iter()
        .map(|ku| {
            let u = if ku + 1 == n_u { contract.maturity } else { t + span * ku as f64 / (n_u - 1) as f64 };
            (0..n_s).map(|ks| premium_integrand(model, contract, t, u, s_box.sample(ks, n_s))).collect()
        })
        .collect::<Result<_>>()?;
    let mut ev = SignEvidence {
        t,
        maturity: contract.maturity,
        spots: s_box,
        n_u,
        n_s,
        positive: 0,
        negative: 0,
        zero: 0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    for g in rows.into_iter().flatten() {
        if g > 0.0 {
            ev.positive += 1;
        } else if g < 0.0 {
            ev.negative += 1;
        } else {
            ev.zero += 1;
        }
        ev.min = ev.min.min(g);
        ev.max = ev.max.max(g);
    }
    let verdict = match (ev.positive > 0, ev.negative > 0) {
        (true, false) => Verdict::HoldToMaturity,
        (false, true) => Verdict::LiquidateNow,
        _ => Verdict::Indeterminate,
    };
    Ok(LiquidationAdvice { verdict, evidence: ev })
}

/// Liquidation value `V` with the deadline moved to maturity, on a grid
/// spanning `[0, T]`.
pub fn liquidation_surface(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec) -> Result<ValueSurface> {
    let contract = contract.hold_to_maturity();
    contract.validate()?;
    grid.validate(model)?;
    let obstacle = Obstacle::from_fn(grid, contract.maturity, |t, s| {
        Ok(futures_price(model, t, s, contract.maturity)? - contract.cost)
    })?;
    solve_vi(model, grid, contract.rate, contract.maturity, &obstacle, Sense::Max, ProblemTag::V)
}

/// Premium `V - (f - c)` read off a liquidation surface, linearly
/// interpolated in time and space between node gaps (so it stays `>= 0`).
pub fn premium_at(surface: &ValueSurface, t: f64, s: f64) -> Result<f64> {
    let grid = &surface.grid;
    if !(0.0..=surface.horizon).contains(&t) || !(grid.s_min..=grid.s_max).contains(&s) {
        return Err(Error::InvalidInput(format!("({t}, {s}) lies outside the grid")));
    }
    let dt = grid.dt(surface.horizon);
    let jf = (t / dt).min(grid.n_time as f64);
    let j0 = (jf.floor() as usize).min(grid.n_time - 1);
    let wt = (jf - j0 as f64).clamp(0.0, 1.0);
    let xf = ((s - grid.s_min) / grid.ds()).min(grid.n_space as f64);
    let i0 = (xf.floor() as usize).min(grid.n_space - 1);
    let ws = (xf - i0 as f64).clamp(0.0, 1.0);
    let gap = |j: usize, i: usize| (surface.value(j, i) - surface.obstacle_at(j, i)).max(0.0);
    let at = |j: usize| (1.0 - ws) * gap(j, i0) + ws * gap(j, i0 + 1);
    Ok((1.0 - wt) * at(j0) + wt * at(j0 + 1))
}

/// `L(t, s) = V(t, s) - (f(t, s; T) - c)` with `V` solved up to maturity.
pub fn delayed_liquidation_premium(
    model: &SpotModel,
    contract: &ContractSpec,
    grid: &GridSpec,
    t: f64,
    s: f64,
) -> Result<f64> {
    let surface = liquidation_surface(model, contract, grid)?;
    premium_at(&surface, t, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Measure;

    fn contract(cost: f64) -> ContractSpec {
        ContractSpec { maturity: 66.0 / 252.0, deadline: 22.0 / 252.0, rate: 0.05, cost, cost_hat: cost }
    }

    fn trading_cir() -> SpotModel {
        SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33)
    }

    /// `theta = theta~` and `r = mu~ - mu` cancel the spot terms, leaving
    /// `G = r (c - theta~)`.
    fn flat_ou() -> (SpotModel, f64) {
        (SpotModel::ou(2.0, 10.0, 2.05, 10.0, 1.0), 0.05)
    }

    #[test]
    fn ou_at_the_mean_reduces_to_the_cost_term() {
        let model = SpotModel::ou(3.0, 10.0, 2.0, 10.0, 1.0);
        let c = contract(0.4);
        for form in [IntegrandForm::Consistent, IntegrandForm::AsPrinted] {
            let g = integrand(&model, &c, 0.0, 0.0, 10.0, form).unwrap();
            assert!((g - 0.05 * (0.4 - 10.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn printed_xou_collapses_at_u_equal_t() {
        let model = SpotModel::xou(3.0, 1.2, 2.5, 1.0, 0.4);
        let c = contract(0.005);
        let s = 2.7;
        let g = premium_integrand_as_printed(&model, &c, 0.1, 0.1, s).unwrap();
        let by_hand = (0.05 + (3.0 * 1.2 - 2.5 * 1.0) + (2.5 - 3.0) * s.ln()) * s - 0.05 * 0.005;
        assert!((g - by_hand).abs() < 1e-12, "{g} vs {by_hand}");
    }

    #[test]
    fn forms_agree_for_ou_when_exponents_coincide() {
        // u - t = T - u
        let model = trading_cir();
        let c = contract(0.005);
        let (t, u) = (0.0, c.maturity / 2.0);
        let a = premium_integrand(&model, &c, t, u, 15.0).unwrap();
        let b = premium_integrand_as_printed(&model, &c, t, u, 15.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    /// `d/dh E[e^{-r h}(f(t+h, S_{t+h}; T) - c)]` at `h = 0`, by central
    /// differences of the closed-form historical expectation.
    fn drift_by_differencing(model: &SpotModel, c: &ContractSpec, t: f64, s: f64) -> f64 {
        let value = |h: f64| {
            let tau = c.maturity - t - h;
            let mean = match model.kind {
                ModelKind::Ou | ModelKind::Cir => {
                    let es = model.expected_spot(Measure::Historical, s, h).unwrap();
                    (es - model.theta_q) * (-model.mu_q * tau).exp() + model.theta_q
                }
                ModelKind::Xou => {
                    // ln S_{t+h} is Gaussian; ln f is affine in it with slope a.
                    let (m, th, sig) = (model.mu, model.theta, model.sigma);
                    let d = (-m * h).exp();
                    let mean_x = d * s.ln() + (1.0 - d) * (th - sig * sig / (2.0 * m));
                    let var_x = sig * sig * (1.0 - d * d) / (2.0 * m);
                    let a = (-model.mu_q * tau).exp();
                    let intercept = crate::pricing::xou_log_price(model, tau, 0.0);
                    (intercept + a * mean_x + 0.5 * a * a * var_x).exp()
                }
            };
            (-c.rate * h).exp() * (mean - c.cost)
        };
        let h = 1e-5;
        (value(h) - value(-h)) / (2.0 * h)
    }

    #[test]
    fn integrand_is_the_drift_of_discounted_liquidation_value() {
        let c = contract(0.005);
        let cases = [
            (trading_cir(), 12.12),
            (SpotModel::ou(3.0, 9.0, 5.0, 11.0, 2.0), 7.5),
            (SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63), 18.0),
            (SpotModel::xou(2.0, 2.5, 3.25, 3.65, 0.15), 30.0),
        ];
        for (model, s) in cases {
            for t in [0.02, 0.1, 0.2] {
                let g = premium_integrand(&model, &c, t, t, s).unwrap();
                let fd = drift_by_differencing(&model, &c, t, s);
                assert!((g - fd).abs() < 1e-5 * (1.0 + g.abs()), "{:?} t={t}: {g} vs {fd}", model.kind);
            }
        }
    }

    #[test]
    fn ou_integrand_changes_sign_at_its_root() {
        let model = trading_cir();
        let c = contract(0.005);
        let u = 0.1;
        let decay = (-model.mu_q * (c.maturity - u)).exp();
        let slope = -(model.mu + c.rate - model.mu_q) * decay;
        let g0 = premium_integrand(&model, &c, 0.0, u, 0.0).unwrap();
        let root = -g0 / slope;
        assert!(premium_integrand(&model, &c, 0.0, u, root).unwrap().abs() < 1e-10);
        assert!(premium_integrand(&model, &c, 0.0, u, root - 0.1).unwrap() > 0.0);
        assert!(premium_integrand(&model, &c, 0.0, u, root + 0.1).unwrap() < 0.0);
    }

    #[test]
    fn constant_sign_constructions() {
        let (model, r) = flat_ou();
        let box_ = SpotBox::default_for(&model, 10.0);
        for (cost, want) in [(8.0, Verdict::LiquidateNow), (12.0, Verdict::HoldToMaturity)] {
            let c = ContractSpec { rate: r, ..contract(cost) };
            let advice = classify_liquidation(&model, &c, 0.0, box_, (21, 31)).unwrap();
            assert_eq!(advice.verdict, want);
            assert!((advice.evidence.min - r * (cost - 10.0)).abs() < 1e-12);
            assert!((advice.evidence.max - r * (cost - 10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn trading_cir_is_indeterminate_on_0_40() {
        let advice = classify_liquidation(
            &trading_cir(),
            &contract(0.005),
            0.0,
            SpotBox { lo: 0.0, hi: 40.0, log_spaced: false },
            (201, 201),
        )
        .unwrap();
        assert_eq!(advice.verdict, Verdict::Indeterminate);
        assert_eq!(advice.evidence.positive + advice.evidence.negative + advice.evidence.zero, 201 * 201);
    }

    #[test]
    fn classify_rejects_thin_grids_and_bad_boxes() {
        let c = contract(0.005);
        let b = SpotBox { lo: 0.0, hi: 40.0, log_spaced: false };
        assert!(classify_liquidation(&trading_cir(), &c, 0.0, b, (1, 10)).is_err());
        let xou = SpotModel::xou(2.0, 1.0, 2.0, 1.0, 0.3);
        assert!(classify_liquidation(&xou, &c, 0.0, b, (10, 10)).is_err());
    }

    #[test]
    fn premium_is_zero_where_liquidation_is_immediate() {
        let (model, r) = flat_ou();
        let c = ContractSpec { rate: r, ..contract(8.0) };
        let grid = GridSpec { n_time: 100, n_space: 100, ..GridSpec::default_for(&model, 100) };
        let surface = liquidation_surface(&model, &c, &grid).unwrap();
        for s in [6.0, 10.0, 12.9] {
            assert!(premium_at(&surface, 0.05, s).unwrap().abs() < 1e-12);
        }
        let far = premium_at(&surface, 0.0, 10.0).unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn hold_to_maturity_premium_matches_the_constant_rate_integral() {
        // G = r (c - theta~) everywhere, so L(t, s) = (c - theta~)(1 - e^{-r(T - t)}).
        let (model, r) = flat_ou();
        let c = ContractSpec { rate: r, ..contract(12.0) };
        let grid = GridSpec::default_for(&model, 200);
        let surface = liquidation_surface(&model, &c, &grid).unwrap();
        for (t, s) in [(0.0, 10.0), (0.1, 8.0), (0.2, 12.5)] {
            let l = premium_at(&surface, t, s).unwrap();
            let exact = 2.0 * (1.0 - (-r * (c.maturity - t)).exp());
            assert!((l - exact).abs() < 1e-4 * exact, "t={t} s={s}: {l} vs {exact}");
        }
    }
}
