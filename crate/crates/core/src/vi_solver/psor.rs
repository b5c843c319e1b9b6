use log::warn;

use crate::error::{Error, Result};

use super::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorSettings {
    pub omega: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for PsorSettings {
    fn default() -> Self {
        PsorSettings { omega: 1.2, epsilon: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsorOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the last sweep's update.
    pub last_update: f64,
}

/// Solves the linear complementarity problem
/// `a x >= rhs, x >= obstacle, (a x - rhs)·(x - obstacle) = 0`
/// by projected SOR, starting from `initial` (or the obstacle).
///
/// Stops once a full sweep moves no component by more than `epsilon`.
pub fn psor_solve(
    a: &Tridiagonal,
    rhs: &[f64],
    obstacle: &[f64],
    settings: &PsorSettings,
    initial: Option<&[f64]>,
) -> Result<PsorOutcome> {
    let n = a.len();
    if rhs.len() != n || obstacle.len() != n || initial.is_some_and(|x| x.len() != n) {
        return Err(Error::InvalidInput("psor: vector lengths differ from the matrix size".into()));
    }
    let weak = a.non_dominant_rows();
    if !weak.is_empty() {
        warn!("psor: {} row(s) not strictly diagonally dominant (first {})", weak.len(), weak[0]);
    }
    let mut x: Vec<f64> = match initial {
        Some(x0) => x0.iter().zip(obstacle).map(|(&v, &o)| v.max(o)).collect(),
        None => obstacle.to_vec(),
    };
    let omega = settings.omega;
    let mut last_update = f64::INFINITY;
    for iter in 1..=settings.max_iter {
        let mut max_delta: f64 = 0.0;
        for i in 0..n {
            let residual = rhs[i] - a.row_dot(i, &x);
            let updated = (x[i] + omega * residual / a.diag[i]).max(obstacle[i]);
            max_delta = max_delta.max((updated - x[i]).abs());
            x[i] = updated;
        }
        last_update = max_delta;
        if max_delta < settings.epsilon {
            return Ok(PsorOutcome { solution: x, iterations: iter, last_update });
        }
    }
    Err(Error::NonConvergence { step: 0, residual: last_update })
}

/// Largest diagonal-scaled complementarity residual
/// `|min((a x - rhs)_i / a_ii, x_i - obstacle_i)|`.
pub fn complementarity_residual(a: &Tridiagonal, rhs: &[f64], obstacle: &[f64], x: &[f64]) -> f64 {
    (0..a.len())
        .map(|i| {
            let lin = (a.row_dot(i, x) - rhs[i]) / a.diag[i];
            lin.min(x[i] - obstacle[i]).abs()
        })
        .fold(0.0, f64::max)
}
