use serde::Serialize;

use super::surface::{ProblemTag, ValueSurface};

/// Where the exercise region lies relative to the free boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    ExerciseAbove,
    ExerciseBelow,
}

/// Free boundary of one problem, one entry per time layer `0..N` (the
/// terminal layer, where every node is on the obstacle, is left out).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySet {
    pub times: Vec<f64>,
    pub levels: Vec<Option<f64>>,
    pub side: Side,
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Boundary level with an absent boundary read as the grid edge on the
    /// exercise side (the waiting region then fills the grid).
    pub fn level_or_edge(&self, j: usize, s_min: f64, s_max: f64) -> f64 {
        self.levels[j].unwrap_or(match self.side {
            Side::ExerciseBelow => s_min,
            Side::ExerciseAbove => s_max,
        })
    }
}

/// Boundaries for the six trading decisions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeBoundaries {
    /// Buy to open (J), exercise below.
    pub long_entry: BoundarySet,
    /// Sell to close (V), exercise above.
    pub long_exit: BoundarySet,
    /// Sell to open (K), exercise above.
    pub short_entry: BoundarySet,
    /// Buy to close (U), exercise below.
    pub short_exit: BoundarySet,
    /// Chooser nodes where the long branch binds, exercise below.
    pub chooser_long: BoundarySet,
    /// Chooser nodes where the short branch binds, exercise above.
    pub chooser_short: BoundarySet,
}

/// Ordering violations `(name, time, lower, upper)` at layers where both
/// boundaries exist, with slack `tol`.
pub(crate) fn ordering_violations(b: &TradeBoundaries, tol: f64) -> Vec<(&'static str, f64, f64, f64)> {
    let pairs: [(&str, &BoundarySet, &BoundarySet); 4] = [
        ("long_entry <= long_exit", &b.long_entry, &b.long_exit),
        ("short_exit <= short_entry", &b.short_exit, &b.short_entry),
        ("chooser_long <= long_entry", &b.chooser_long, &b.long_entry),
        ("short_entry <= chooser_short", &b.short_entry, &b.chooser_short),
    ];
    let mut out = Vec::new();
    for (name, lo, hi) in pairs {
        for (j, t) in lo.times.iter().enumerate() {
            if let (Some(a), Some(c)) = (lo.levels[j], hi.levels[j]) {
                if a > c + tol {
                    out.push((name, *t, a, c));
                }
            }
        }
    }
    out
}

impl TradeBoundaries {
    /// Every ordering breach (with slack `tol`) as a readable line.
    pub fn ordering_report(&self, tol: f64) -> Vec<String> {
        ordering_violations(self, tol)
            .into_iter()
            .map(|(name, t, a, c)| format!("{name} fails at t={t:.6}: {a} > {c}"))
            .collect()
    }
}

/// Free boundary of `surface`, scanning each layer from the exercise-side
/// edge. Nodes count as exercised when `g - xi <= tol (1 + |xi|)`; for the
/// entry problems (J, K, P), whose obstacles are positive parts, the obstacle
/// must also be positive, since entering for nothing is no decision.
pub fn extract_boundary(surface: &ValueSurface, side: Side) -> BoundarySet {
    let tol = surface.exercise_tol();
    let entry = matches!(surface.tag, ProblemTag::J | ProblemTag::K | ProblemTag::P);
    extract_with(surface, side, |j, i| surface.is_exercise(j, i, tol) && (!entry || surface.obstacle_at(j, i) > tol))
}

/// Scan interior nodes from the exercise side while `exercised(j, i)` holds.
/// No exercised interior node means no boundary; all of them exercised puts
/// it at the far edge. Otherwise the level is linearly interpolated between
/// the last exercised node and the first continuation node on
/// [`ValueSurface::contact_indicator`], which is negative on the first and
/// positive on the second.
pub(crate) fn extract_with<F>(surface: &ValueSurface, side: Side, exercised: F) -> BoundarySet
where
    F: Fn(usize, usize) -> bool,
{
    let grid = &surface.grid;
    let m = grid.n_space;
    let interior: Vec<usize> = match side {
        Side::ExerciseBelow => (1..m).collect(),
        Side::ExerciseAbove => (1..m).rev().collect(),
    };
    let far_edge = match side {
        Side::ExerciseBelow => grid.s_max,
        Side::ExerciseAbove => grid.s_min,
    };
    let mut times = Vec::with_capacity(grid.n_time);
    let mut levels = Vec::with_capacity(grid.n_time);
    for j in 0..grid.n_time {
        times.push(surface.time(j));
        let depth = interior.iter().take_while(|&&i| exercised(j, i)).count();
        let level = if depth == 0 {
            None
        } else if depth == interior.len() {
            Some(far_edge)
        } else {
            let (ie, ic) = (interior[depth - 1], interior[depth]);
            let he = surface.contact_indicator(j, ie).min(0.0);
            let hc = surface.contact_indicator(j, ic).max(0.0);
            let w = if hc - he > 0.0 { -he / (hc - he) } else { 0.0 };
            let (se, sc) = (grid.spot(ie), grid.spot(ic));
            Some(se + w * (sc - se))
        };
        levels.push(level);
    }
    BoundarySet { times, levels, side }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SpotModel;
    use crate::vi_solver::{solve_vi, GridSpec, Obstacle, ProblemTag, Sense};

    #[test]
    fn fully_binding_obstacle_puts_boundary_at_far_edge() {
        // Discounting a constant payoff makes stopping optimal everywhere.
        let model = SpotModel::ou(1.0, 5.0, 1.0, 5.0, 0.5);
        let grid = GridSpec { n_time: 20, n_space: 40, s_max: 10.0, ..GridSpec::default() };
        let obstacle = Obstacle::from_fn(&grid, 1.0, |_, _| Ok(1.0)).unwrap();
        let surf = solve_vi(&model, &grid, 5.0, 1.0, &obstacle, Sense::Max, ProblemTag::V).unwrap();
        let b = extract_boundary(&surf, Side::ExerciseBelow);
        assert_eq!(b.len(), 20);
        assert!(b.levels.iter().all(|l| *l == Some(10.0)));
        let above = extract_boundary(&surf, Side::ExerciseAbove);
        assert!(above.levels.iter().all(|l| *l == Some(0.0)));
    }

    #[test]
    fn absent_boundary_reads_as_edge() {
        let b = BoundarySet { times: vec![0.0], levels: vec![None], side: Side::ExerciseAbove };
        assert_eq!(b.level_or_edge(0, 1.0, 9.0), 9.0);
        let b = BoundarySet { side: Side::ExerciseBelow, ..b };
        assert_eq!(b.level_or_edge(0, 1.0, 9.0), 1.0);
    }
}
