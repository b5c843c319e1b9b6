//! Least-squares fit of risk-neutral parameters to an observed futures curve.
//!
//! The objective is the sum of squared price errors at `t = 0`. Positivity is
//! enforced by optimising over logs (`mu_q = e^x`), so the simplex search runs
//! unconstrained. OU/CIR prices do not depend on `sigma`, which therefore
//! only enters the XOU fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, SpotModel};
use crate::pricing::{price_tau, FuturesCurve};

/// Number of quasi-random starting points.
pub const N_STARTS: usize = 8;
/// Simplex iterations allowed per start.
pub const MAX_ITER_PER_START: usize = 2000;
/// Relative simplex diameter that counts as converged.
pub const SIMPLEX_TOL: f64 = 1e-10;
/// Placeholder volatility attached to OU/CIR results when none is supplied.
pub const PLACEHOLDER_SIGMA: f64 = 1.0;

const MU_RANGE: (f64, f64) = (0.1, 20.0);
const SIGMA_RANGE: (f64, f64) = (0.05, 2.0);
const MAX_RESTARTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Calibrated,
    Fixed,
    /// OU/CIR without a supplied value: `sigma` is [`PLACEHOLDER_SIGMA`] and
    /// does not affect any price.
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Fitted model. Historical fields mirror the risk-neutral ones.
    pub params: SpotModel,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sigma_source: SigmaSource,
}

/// Minimal Nelder-Mead state for small dimensions.
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Downhill simplex with standard coefficients (reflect 1, expand 2,
/// contract 1/2, shrink 1/2). Stops when every vertex lies within
/// `tol * (1 + |x_best|)` of the best vertex, or after `max_iter` iterations.
pub fn nelder_mead<F>(f: &F, x0: &[f64], steps: &[f64], tol: f64, max_iter: usize) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let scale = 1.0 + pts[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if diameter <= tol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + coef * (c - w)).collect() };

        let xr = along(1.0);
        let fr = sanitize(f(&xr));
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = sanitize(f(&xe));
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                let best = pts[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        pts[i][j] = best[j] + 0.5 * (pts[i][j] - best[j]);
                    }
                    vals[i] = sanitize(f(&pts[i]));
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexOutcome { x: pts[best].clone(), fx: vals[best], iterations, converged }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Radical-inverse (van der Corput) of `i` in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// Halton point `i` (1-based to skip the origin) in dimension `dim`.
fn halton(i: usize, dim: usize) -> f64 {
    const PRIMES: [usize; 3] = [2, 3, 5];
    radical_inverse(i + 1, PRIMES[dim])
}

struct Layout {
    kind: ModelKind,
    sigma_fixed: Option<f64>,
}

impl Layout {
    fn dims(&self) -> usize {
        if self.kind == ModelKind::Xou && self.sigma_fixed.is_none() {
            3
        } else {
            2
        }
    }

    /// Unpacks `(mu_q, theta_q, sigma)` from optimiser coordinates.
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        let mu_q = x[0].exp();
        let theta_q = match self.kind {
            ModelKind::Cir => x[1].exp(),
            _ => x[1],
        };
        let sigma = match (self.kind, self.sigma_fixed) {
            (_, Some(s)) => s,
            (ModelKind::Xou, None) => x[2].exp(),
            _ => PLACEHOLDER_SIGMA,
        };
        (mu_q, theta_q, sigma)
    }

    fn model(&self, x: &[f64]) -> SpotModel {
        let (mu_q, theta_q, sigma) = self.unpack(x);
        SpotModel::new(self.kind, mu_q, theta_q, mu_q, theta_q, sigma)
    }
}

fn sse(model: &SpotModel, curve: &FuturesCurve) -> f64 {
    curve
        .maturities
        .iter()
        .zip(&curve.prices)
        .map(|(&m, &p)| {
            let e = price_tau(model, m, curve.s0) - p;
            e * e
        })
        .sum()
}

/// Fits `(mu_q, theta_q)` (plus `sigma` for XOU unless `sigma_fixed` is
/// given) to `curve` by multi-start simplex search.
pub fn calibrate(kind: ModelKind, curve: &FuturesCurve, sigma_fixed: Option<f64>) -> Result<CalibrationResult> {
    if curve.len() < 2 || curve.maturities.len() != curve.prices.len() {
        return Err(Error::InsufficientData(format!("calibration needs at least 2 quotes (got {})", curve.len())));
    }
    if curve.maturities.iter().any(|m| !(*m > 0.0)) || curve.prices.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("maturities must be positive and prices finite".into()));
    }
    let first = curve.maturities[0];
    if curve.maturities.iter().all(|&m| m == first) {
        return Err(Error::InvalidInput("degenerate curve: all maturities are equal".into()));
    }
    match kind {
        ModelKind::Ou => {}
        _ if !(curve.s0 > 0.0) => {
            return Err(Error::Domain { model: kind.name(), spot: curve.s0 });
        }
        ModelKind::Xou if curve.prices.iter().any(|&p| p <= 0.0) => {
            return Err(Error::InvalidInput("XOU calibration needs positive prices".into()));
        }
        _ => {}
    }
    if let Some(s) = sigma_fixed {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be > 0 (got {s})")));
        }
    }

    let layout = Layout { kind, sigma_fixed };
    let dims = layout.dims();
    let objective = |x: &[f64]| sse(&layout.model(x), curve);

    let (p_lo, p_hi) =
        curve.prices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let level_range = match kind {
        ModelKind::Ou => (p_lo, p_hi),
        ModelKind::Cir => (p_lo.max(1e-8).ln(), p_hi.max(1e-8).ln()),
        ModelKind::Xou => (p_lo.ln(), p_hi.ln()),
    };
    let level_step = ((level_range.1 - level_range.0).abs() * 0.1).max(0.05 * level_range.1.abs().max(1.0));

    let mut best: Option<SimplexOutcome> = None;
    let mut total_iter = 0;
    for i in 0..N_STARTS {
        let lerp = |(a, b): (f64, f64), u: f64| a + (b - a) * u;
        let mut x0 = vec![lerp((MU_RANGE.0.ln(), MU_RANGE.1.ln()), halton(i, 0)), lerp(level_range, halton(i, 1))];
        let mut steps = vec![0.3, level_step];
        if dims == 3 {
            x0.push(lerp((SIGMA_RANGE.0.ln(), SIGMA_RANGE.1.ln()), halton(i, 2)));
            steps.push(0.3);
        }

        let mut run = nelder_mead(&objective, &x0, &steps, SIMPLEX_TOL, MAX_ITER_PER_START);
        total_iter += run.iterations;
        // restart from the incumbent until a fresh simplex stops improving it
        for _ in 0..MAX_RESTARTS {
            let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
            let next = nelder_mead(&objective, &run.x, &small, SIMPLEX_TOL, MAX_ITER_PER_START);
            total_iter += next.iterations;
            let improved = next.fx < run.fx;
            if next.fx <= run.fx {
                run = SimplexOutcome { converged: next.converged, ..next };
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| run.fx < b.fx) {
            best = Some(run);
        }
    }

    let best = best.expect("at least one start");
    let params = layout.model(&best.x);
    let sigma_source = match (kind, sigma_fixed) {
        (_, Some(_)) => SigmaSource::Fixed,
        (ModelKind::Xou, None) => SigmaSource::Calibrated,
        _ => SigmaSource::Placeholder,
    };
    if !best.converged {
        log::warn!("calibration did not converge; best sse {:e}", best.fx);
    }
    Ok(CalibrationResult { params, sse: best.fx, iterations: total_iter, converged: best.converged, sigma_source })
}
