use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::SpotModel;

use super::crank_nicolson::assemble_cn;
use super::psor::{complementarity_residual, psor_solve};
use super::{EdgeCondition, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProblemTag {
    V,
    J,
    U,
    K,
    P,
}

impl fmt::Display for ProblemTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// `Max`: value is a supremum over stopping times (`g >= obstacle`).
/// `Min`: value is an infimum (`g <= obstacle`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Max,
    Min,
}

/// Obstacle values on the grid, time-major: `values[j * (M+1) + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub values: Vec<f64>,
    pub n_time: usize,
    pub n_space: usize,
}

impl Obstacle {
    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.n_time + 1) * (grid.n_space + 1) {
            return Err(Error::InvalidInput("obstacle size does not match the grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("obstacle must be finite on the grid".into()));
        }
        Ok(Obstacle { values, n_time: grid.n_time, n_space: grid.n_space })
    }

    /// Evaluates `f(t, s)` at every node of a grid spanning `[0, horizon]`.
    pub fn from_fn<F>(grid: &GridSpec, horizon: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let dt = grid.dt(horizon);
        let spots = grid.spots();
        let mut values = Vec::with_capacity((grid.n_time + 1) * spots.len());
        for j in 0..=grid.n_time {
            let t = if j == grid.n_time { horizon } else { j as f64 * dt };
            for &s in &spots {
                values.push(f(t, s)?);
            }
        }
        Obstacle::from_values(grid, values)
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        let w = self.n_space + 1;
        &self.values[j * w..(j + 1) * w]
    }
}

/// Solved value function `g` together with its obstacle, both
/// `(N+1) x (M+1)` and time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub values: Vec<f64>,
    pub obstacle: Vec<f64>,
    pub grid: GridSpec,
    pub horizon: f64,
    pub tag: ProblemTag,
    pub sense: Sense,
    /// Diagonal-scaled slack `(M1 g - rhs)_i / (M1)_ii` of each step's
    /// linear system: positive where the obstacle binds, zero elsewhere, and
    /// zero on the edge columns and the terminal layer.
    pub slack: Vec<f64>,
    /// Largest complementarity residual over all interior nodes and steps.
    pub max_residual: f64,
    pub psor_iterations: usize,
}

impl ValueSurface {
    fn width(&self) -> usize {
        self.grid.n_space + 1
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.grid.n_time {
            self.horizon
        } else {
            j as f64 * self.grid.dt(self.horizon)
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.grid.n_time).map(|j| self.time(j)).collect()
    }

    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.width() + i]
    }

    pub fn obstacle_at(&self, j: usize, i: usize) -> f64 {
        self.obstacle[j * self.width() + i]
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        let w = self.width();
        &self.values[j * w..(j + 1) * w]
    }

    pub fn obstacle_layer(&self, j: usize) -> &[f64] {
        let w = self.width();
        &self.obstacle[j * w..(j + 1) * w]
    }

    /// Distance from the obstacle on the feasible side: `g - xi` for `Max`,
    /// `xi - g` for `Min`.
    pub fn gap(&self, j: usize, i: usize) -> f64 {
        let (g, xi) = (self.value(j, i), self.obstacle_at(j, i));
        match self.sense {
            Sense::Max => g - xi,
            Sense::Min => xi - g,
        }
    }

    /// Signed distance-like indicator: the obstacle gap on continuation nodes,
    /// minus the system slack on exercised ones. Varies continuously as a
    /// node switches between the two regions.
    pub fn contact_indicator(&self, j: usize, i: usize) -> f64 {
        self.gap(j, i) - self.slack[j * self.width() + i]
    }

    /// True when node `(j, i)` sits on the obstacle within `tol * (1 + |xi|)`.
    pub fn is_exercise(&self, j: usize, i: usize, tol: f64) -> bool {
        self.gap(j, i) <= tol * (1.0 + self.obstacle_at(j, i).abs())
    }

    /// Default tolerance for deciding that a node is on the obstacle.
    pub fn exercise_tol(&self) -> f64 {
        10.0 * self.grid.epsilon
    }

    /// Linear interpolation in space at time layer `j`.
    pub fn interpolate(&self, j: usize, s: f64) -> Result<f64> {
        let g = &self.grid;
        if !(s >= g.s_min && s <= g.s_max) {
            return Err(Error::InvalidInput(format!("spot {s} is outside the grid [{}, {}]", g.s_min, g.s_max)));
        }
        let x = (s - g.s_min) / g.ds();
        let i = (x.floor() as usize).min(g.n_space - 1);
        let w = x - i as f64;
        Ok((1.0 - w) * self.value(j, i) + w * self.value(j, i + 1))
    }

    /// Bilinear interpolation at `(t, s)`.
    pub fn value_at(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::InvalidInput(format!("time {t} is outside [0, {}]", self.horizon)));
        }
        let x = t / self.grid.dt(self.horizon);
        let j = (x.floor() as usize).min(self.grid.n_time - 1);
        let w = (x - j as f64).clamp(0.0, 1.0);
        Ok((1.0 - w) * self.interpolate(j, s)? + w * self.interpolate(j + 1, s)?)
    }
}

/// Backward Crank-Nicolson induction with one projected SOR solve per step.
///
/// The grid spans `[0, horizon]`; `rate` discounts. The rows at `s_min` and
/// `s_max` follow `grid.edges`. `Min` problems are solved as the `Max`
/// problem for `-g` with obstacle `-xi`.
pub fn solve_vi(
    model: &SpotModel,
    grid: &GridSpec,
    rate: f64,
    horizon: f64,
    obstacle: &Obstacle,
    sense: Sense,
    tag: ProblemTag,
) -> Result<ValueSurface> {
    grid.validate(model)?;
    if !(horizon > 0.0 && horizon.is_finite()) || !rate.is_finite() {
        return Err(Error::InvalidInput(format!("need a positive horizon and finite rate (got {horizon}, {rate})")));
    }
    if obstacle.n_time != grid.n_time || obstacle.n_space != grid.n_space {
        return Err(Error::InvalidInput("obstacle size does not match the grid".into()));
    }
    let (n, m) = (grid.n_time, grid.n_space);
    let w = m + 1;
    let sign = match sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let xi: Vec<f64> = obstacle.values.iter().map(|v| sign * v).collect();

    let cn = assemble_cn(model, grid, rate, horizon)?;
    let m1 = cn.implicit(grid.edges);
    let m2 = cn.m2();
    let settings = grid.psor_settings();

    let mut g = vec![0.0; (n + 1) * w];
    g[n * w..].copy_from_slice(&xi[n * w..]);
    let mut rhs = vec![0.0; m - 1];
    let mut slack = vec![0.0; (n + 1) * w];
    let mut max_residual: f64 = 0.0;
    let mut iterations = 0;
    for j in (1..=n).rev() {
        let (prev, next) = g.split_at_mut(j * w);
        let next = &next[..w];
        let layer = &mut prev[(j - 1) * w..];
        let xi_prev = &xi[(j - 1) * w..j * w];
        cn.rhs_with(grid.edges, &m2, next, xi_prev[0], xi_prev[m], &mut rhs);
        let inner_obstacle = &xi_prev[1..m];
        let out = psor_solve(&m1, &rhs, inner_obstacle, &settings, Some(&next[1..m])).map_err(|e| match e {
            Error::NonConvergence { residual, .. } => Error::NonConvergence { step: j, residual },
            other => other,
        })?;
        max_residual = max_residual.max(complementarity_residual(&m1, &rhs, inner_obstacle, &out.solution));
        for (k, sl) in slack[(j - 1) * w + 1..(j - 1) * w + m].iter_mut().enumerate() {
            *sl = (m1.row_dot(k, &out.solution) - rhs[k]) / m1.diag[k];
        }
        iterations += out.iterations;
        layer[1..m].copy_from_slice(&out.solution);
        match grid.edges {
            EdgeCondition::Pinned => {
                layer[0] = xi_prev[0];
                layer[m] = xi_prev[m];
            }
            EdgeCondition::Linear => {
                layer[0] = (2.0 * layer[1] - layer[2]).max(xi_prev[0]);
                layer[m] = (2.0 * layer[m - 1] - layer[m - 2]).max(xi_prev[m]);
            }
        }
    }

    if sense == Sense::Min {
        g.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(ValueSurface {
        values: g,
        obstacle: obstacle.values.clone(),
        grid: *grid,
        horizon,
        tag,
        sense,
        slack,
        max_residual,
        psor_iterations: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::futures_price;
    use crate::vi_solver::Generator;

    #[test]
    fn martingale_obstacle_is_reproduced() {
        // Under the risk-neutral generator with r = 0 the futures price is a
        // martingale, so waiting neither helps nor hurts.
        let model = SpotModel::ou(3.0, 10.0, 2.0, 12.0, 2.0);
        let grid = GridSpec {
            n_time: 1000,
            n_space: 100,
            s_min: 0.0,
            s_max: 24.0,
            epsilon: 1e-12,
            generator: Generator::RiskNeutral,
            ..GridSpec::default()
        };
        let horizon = 0.25;
        let obstacle = Obstacle::from_fn(&grid, horizon, |t, s| futures_price(&model, t, s, 0.5)).unwrap();
        let surf = solve_vi(&model, &grid, 0.0, horizon, &obstacle, Sense::Max, ProblemTag::V).unwrap();
        for (g, xi) in surf.values.iter().zip(&surf.obstacle) {
            // only the O(dt^2) time-stepping error remains
            assert!((g - xi).abs() < 1e-7, "{g} vs {xi}");
        }
    }

    #[test]
    fn terminal_layer_and_dominance() {
        let model = SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33);
        let grid = GridSpec { n_time: 60, n_space: 80, ..GridSpec::default_for(&model, 80) };
        let (horizon, maturity, c) = (22.0 / 252.0, 66.0 / 252.0, 0.005);
        let obstacle =
            Obstacle::from_fn(&grid, horizon, |t, s| Ok(futures_price(&model, t, s, maturity)? - c)).unwrap();
        let v = solve_vi(&model, &grid, 0.05, horizon, &obstacle, Sense::Max, ProblemTag::V).unwrap();
        assert_eq!(v.layer(grid.n_time), v.obstacle_layer(grid.n_time));
        assert!(v.values.iter().zip(&v.obstacle).all(|(g, xi)| g - xi >= -1e-12));
        assert!(v.max_residual <= 10.0 * grid.epsilon);

        let neg = Obstacle::from_values(&grid, obstacle.values.iter().map(|x| x + 2.0 * c).collect()).unwrap();
        let u = solve_vi(&model, &grid, 0.05, horizon, &neg, Sense::Min, ProblemTag::U).unwrap();
        assert!(u.values.iter().zip(&u.obstacle).all(|(g, xi)| g - xi <= 1e-12));
        assert_eq!(u.layer(grid.n_time), u.obstacle_layer(grid.n_time));
    }

    #[test]
    fn interpolation_hits_nodes() {
        let model = SpotModel::ou(3.0, 10.0, 2.0, 12.0, 2.0);
        let grid = GridSpec { n_time: 200, n_space: 20, s_max: 20.0, ..GridSpec::default() };
        let obstacle = Obstacle::from_fn(&grid, 1.0, |t, s| Ok(s + t)).unwrap();
        let surf = solve_vi(&model, &grid, 0.05, 1.0, &obstacle, Sense::Max, ProblemTag::V).unwrap();
        assert_eq!(surf.value_at(0.0, 7.0).unwrap(), surf.value(0, 7));
        assert_eq!(surf.value_at(1.0, 20.0).unwrap(), 21.0);
        assert!(surf.value_at(0.0, 25.0).is_err());
    }
}
