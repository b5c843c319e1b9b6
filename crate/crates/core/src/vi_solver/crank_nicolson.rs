use crate::error::Result;
use crate::models::{Measure, ModelKind, SpotModel};

use super::tridiag::Tridiagonal;
use super::{EdgeCondition, Generator, GridSpec};

/// Drift `phi(s)` and squared diffusion `sigma^2(s)` of the generator
/// `phi d/ds + sigma^2/2 d^2/ds^2`, written as in the spot SDE.
pub fn generator_coefficients(model: &SpotModel, measure: Measure, s: f64) -> Result<(f64, f64)> {
    let drift = model.drift(measure, s)?;
    let vol = model.diffusion(s)?;
    Ok((drift, vol * vol))
}

/// Coefficients for a [`Generator`] choice. `Printed` uses the risk-neutral
/// drift with the XOU drift written without the trailing factor `s`.
pub fn coefficients_for(model: &SpotModel, generator: Generator, s: f64) -> Result<(f64, f64)> {
    match generator {
        Generator::Historical => generator_coefficients(model, Measure::Historical, s),
        Generator::RiskNeutral => generator_coefficients(model, Measure::RiskNeutral, s),
        Generator::Printed => {
            let (phi, diff2) = generator_coefficients(model, Measure::RiskNeutral, s)?;
            if model.kind == ModelKind::Xou {
                Ok((model.mu_q * (model.theta_q - s.ln()), diff2))
            } else {
                Ok((phi, diff2))
            }
        }
    }
}

/// Crank-Nicolson weights for nodes `0..=M`; entries at the two pinned
/// boundary nodes are left at zero.
///
/// `alpha_i = dt/(4 ds) (sig2_i/ds - phi_i)`,
/// `beta_i = -dt/2 (r + sig2_i/ds^2)`,
/// `gamma_i = dt/(4 ds) (sig2_i/ds + phi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnSystem {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub dt: f64,
    pub ds: f64,
}

impl CnSystem {
    /// Implicit matrix on the interior: diagonal `1 - beta_i`, off-diagonals
    /// `-alpha_i` (below) and `-gamma_i` (above).
    pub fn m1(&self) -> Tridiagonal {
        let m = self.alpha.len() - 1;
        let lower = (1..m).map(|i| -self.alpha[i]).collect();
        let diag = (1..m).map(|i| 1.0 - self.beta[i]).collect();
        let upper = (1..m).map(|i| -self.gamma[i]).collect();
        Tridiagonal::new(lower, diag, upper)
    }

    /// Explicit matrix on the interior: diagonal `1 + beta_i`, off-diagonals
    /// `alpha_i` and `gamma_i`.
    pub fn m2(&self) -> Tridiagonal {
        let m = self.alpha.len() - 1;
        let lower = (1..m).map(|i| self.alpha[i]).collect();
        let diag = (1..m).map(|i| 1.0 + self.beta[i]).collect();
        let upper = (1..m).map(|i| self.gamma[i]).collect();
        Tridiagonal::new(lower, diag, upper)
    }

    /// Right-hand side for stepping from layer `j` (full vector, nodes
    /// `0..=M`) to layer `j-1`, whose boundary values are `lo_prev`, `hi_prev`.
    pub fn rhs(&self, m2: &Tridiagonal, g_next: &[f64], lo_prev: f64, hi_prev: f64, out: &mut [f64]) {
        let m = g_next.len() - 1;
        let interior = &g_next[1..m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m2.row_dot(i, interior);
        }
        out[0] += self.alpha[1] * (lo_prev + g_next[0]);
        out[m - 2] += self.gamma[m - 1] * (hi_prev + g_next[m]);
    }

    /// Implicit matrix with the edge unknowns eliminated. Under
    /// [`EdgeCondition::Linear`] the first and last rows absorb
    /// `g_0 = 2 g_1 - g_2` and `g_M = 2 g_{M-1} - g_{M-2}`.
    pub fn implicit(&self, edges: EdgeCondition) -> Tridiagonal {
        let mut m1 = self.m1();
        if edges == EdgeCondition::Linear {
            let m = self.alpha.len() - 1;
            let last = m - 2;
            m1.diag[0] -= 2.0 * self.alpha[1];
            m1.upper[0] += self.alpha[1];
            m1.diag[last] -= 2.0 * self.gamma[m - 1];
            m1.lower[last] += self.gamma[m - 1];
        }
        m1
    }

    /// Right-hand side for the step `j -> j-1` under `edges`; pinned edges
    /// take the layer `j-1` edge values `lo_prev`, `hi_prev`.
    pub fn rhs_with(
        &self,
        edges: EdgeCondition,
        m2: &Tridiagonal,
        g_next: &[f64],
        lo_prev: f64,
        hi_prev: f64,
        out: &mut [f64],
    ) {
        match edges {
            EdgeCondition::Pinned => self.rhs(m2, g_next, lo_prev, hi_prev, out),
            EdgeCondition::Linear => {
                let m = g_next.len() - 1;
                let interior = &g_next[1..m];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m2.row_dot(i, interior);
                }
                let lo_next = 2.0 * g_next[1] - g_next[2];
                let hi_next = 2.0 * g_next[m - 1] - g_next[m - 2];
                out[0] += self.alpha[1] * lo_next;
                out[m - 2] += self.gamma[m - 1] * hi_next;
            }
        }
    }
}

/// Builds the Crank-Nicolson weights on `grid` for a problem with deadline
/// `horizon` and discount `rate`.
pub fn assemble_cn(model: &SpotModel, grid: &GridSpec, rate: f64, horizon: f64) -> Result<CnSystem> {
    let m = grid.n_space;
    let dt = horizon / grid.n_time as f64;
    let ds = grid.ds();
    let mut alpha = vec![0.0; m + 1];
    let mut beta = vec![0.0; m + 1];
    let mut gamma = vec![0.0; m + 1];
    for i in 1..m {
        let (phi, sig2) = coefficients_for(model, grid.generator, grid.spot(i))?;
        alpha[i] = dt / (4.0 * ds) * (sig2 / ds - phi);
        beta[i] = -dt / 2.0 * (rate + sig2 / (ds * ds));
        gamma[i] = dt / (4.0 * ds) * (sig2 / ds + phi);
    }
    Ok(CnSystem { alpha, beta, gamma, dt, ds })
}
