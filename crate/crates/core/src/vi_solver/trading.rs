use serde::Serialize;

use crate::error::Result;
use crate::models::SpotModel;
use crate::pricing::{futures_price, ContractSpec};

use super::boundary::{extract_boundary, extract_with, Side, TradeBoundaries};
use super::surface::{solve_vi, Obstacle, ProblemTag, Sense, ValueSurface};
use super::GridSpec;

/// Which chooser branch sets the obstacle at an exercise node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `A = (V - (f + c^))+`: open a long position.
    Long,
    /// `B = ((f - c) - U)+`: open a short position.
    Short,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChooserSolution {
    pub surface: ValueSurface,
    /// Per node, time-major: the binding branch on exercise nodes with a
    /// positive obstacle, `None` elsewhere.
    pub branches: Vec<Option<Branch>>,
}

/// All five surfaces and the boundaries read off them.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingSolution {
    pub v: ValueSurface,
    pub j: ValueSurface,
    pub u: ValueSurface,
    pub k: ValueSurface,
    pub p: ChooserSolution,
    pub boundaries: TradeBoundaries,
}

fn futures_obstacle(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec, shift: f64) -> Result<Obstacle> {
    Obstacle::from_fn(grid, contract.deadline, |t, s| Ok(futures_price(model, t, s, contract.maturity)? + shift))
}

fn node_obstacle<F>(grid: &GridSpec, f: F) -> Result<Obstacle>
where
    F: Fn(usize) -> f64,
{
    let n = (grid.n_time + 1) * (grid.n_space + 1);
    Obstacle::from_values(grid, (0..n).map(f).collect())
}

fn solve(
    model: &SpotModel,
    contract: &ContractSpec,
    grid: &GridSpec,
    obstacle: &Obstacle,
    sense: Sense,
    tag: ProblemTag,
) -> Result<ValueSurface> {
    solve_vi(model, grid, contract.rate, contract.deadline, obstacle, sense, tag)
}

fn solve_v(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec) -> Result<ValueSurface> {
    let obstacle = futures_obstacle(model, contract, grid, -contract.cost)?;
    solve(model, contract, grid, &obstacle, Sense::Max, ProblemTag::V)
}

fn solve_u(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec) -> Result<ValueSurface> {
    let obstacle = futures_obstacle(model, contract, grid, contract.cost_hat)?;
    solve(model, contract, grid, &obstacle, Sense::Min, ProblemTag::U)
}

/// Entry value for a long position: `A = (V - (f + c^))+`.
fn long_entry_payoff(v: &ValueSurface, contract: &ContractSpec, idx: usize) -> f64 {
    // V's obstacle is f - c, so f + c^ = xi_V + c + c^.
    (v.values[idx] - (v.obstacle[idx] + contract.cost + contract.cost_hat)).max(0.0)
}

/// Entry value for a short position: `B = ((f - c) - U)+`.
fn short_entry_payoff(u: &ValueSurface, contract: &ContractSpec, idx: usize) -> f64 {
    // U's obstacle is f + c^, so f - c = xi_U - c^ - c.
    ((u.obstacle[idx] - contract.cost_hat - contract.cost) - u.values[idx]).max(0.0)
}

fn solve_j(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec, v: &ValueSurface) -> Result<ValueSurface> {
    let obstacle = node_obstacle(grid, |idx| long_entry_payoff(v, contract, idx))?;
    solve(model, contract, grid, &obstacle, Sense::Max, ProblemTag::J)
}

fn solve_k(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec, u: &ValueSurface) -> Result<ValueSurface> {
    let obstacle = node_obstacle(grid, |idx| short_entry_payoff(u, contract, idx))?;
    solve(model, contract, grid, &obstacle, Sense::Max, ProblemTag::K)
}

fn check_inputs(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec) -> Result<()> {
    contract.validate()?;
    grid.validate(model)
}

/// Long then close: `V` with obstacle `f - c`, then `J` with obstacle
/// `(V - (f + c^))+`.
pub fn solve_long_short(
    model: &SpotModel,
    contract: &ContractSpec,
    grid: &GridSpec,
) -> Result<(ValueSurface, ValueSurface)> {
    check_inputs(model, contract, grid)?;
    let v = solve_v(model, contract, grid)?;
    let j = solve_j(model, contract, grid, &v)?;
    Ok((v, j))
}

/// Short then close: `U` (minimised) with obstacle `f + c^`, then `K` with
/// obstacle `((f - c) - U)+`.
pub fn solve_short_long(
    model: &SpotModel,
    contract: &ContractSpec,
    grid: &GridSpec,
) -> Result<(ValueSurface, ValueSurface)> {
    check_inputs(model, contract, grid)?;
    let u = solve_u(model, contract, grid)?;
    let k = solve_k(model, contract, grid, &u)?;
    Ok((u, k))
}

/// Chooser `P` with obstacle `max(A, B)`. Ties go to `Long`.
pub fn solve_chooser(
    model: &SpotModel,
    contract: &ContractSpec,
    grid: &GridSpec,
    v: &ValueSurface,
    u: &ValueSurface,
) -> Result<ChooserSolution> {
    check_inputs(model, contract, grid)?;
    let obstacle =
        node_obstacle(grid, |idx| long_entry_payoff(v, contract, idx).max(short_entry_payoff(u, contract, idx)))?;
    let surface = solve(model, contract, grid, &obstacle, Sense::Max, ProblemTag::P)?;
    let tol = surface.exercise_tol();
    let w = grid.n_space + 1;
    let branches = (0..obstacle.values.len())
        .map(|idx| {
            let (a, b) = (long_entry_payoff(v, contract, idx), short_entry_payoff(u, contract, idx));
            let on_obstacle = surface.is_exercise(idx / w, idx % w, tol);
            if !on_obstacle || a.max(b) <= 0.0 {
                None
            } else if a >= b {
                Some(Branch::Long)
            } else {
                Some(Branch::Short)
            }
        })
        .collect();
    Ok(ChooserSolution { surface, branches })
}

/// Solves V and U concurrently, then J, K and P, and extracts all six
/// boundaries.
pub fn solve_all(model: &SpotModel, contract: &ContractSpec, grid: &GridSpec) -> Result<TradingSolution> {
    check_inputs(model, contract, grid)?;
    let (v, u) = rayon::join(|| solve_v(model, contract, grid), || solve_u(model, contract, grid));
    let (v, u) = (v?, u?);
    let ((j, k), p) = rayon::join(
        || rayon::join(|| solve_j(model, contract, grid, &v), || solve_k(model, contract, grid, &u)),
        || solve_chooser(model, contract, grid, &v, &u),
    );
    let (j, k, p) = (j?, k?, p?);
    let w = grid.n_space + 1;
    let branches = &p.branches;
    let branch_is = |want: Branch| move |jj: usize, i: usize| branches[jj * w + i] == Some(want);
    let boundaries = TradeBoundaries {
        long_entry: extract_boundary(&j, Side::ExerciseBelow),
        long_exit: extract_boundary(&v, Side::ExerciseAbove),
        short_entry: extract_boundary(&k, Side::ExerciseAbove),
        short_exit: extract_boundary(&u, Side::ExerciseBelow),
        chooser_long: extract_with(&p.surface, Side::ExerciseBelow, branch_is(Branch::Long)),
        chooser_short: extract_with(&p.surface, Side::ExerciseAbove, branch_is(Branch::Short)),
    };
    Ok(TradingSolution { v, j, u, k, p, boundaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trading_contract() -> ContractSpec {
        ContractSpec { maturity: 66.0 / 252.0, deadline: 22.0 / 252.0, rate: 0.05, cost: 0.005, cost_hat: 0.005 }
    }

    #[test]
    fn prohibitive_entry_cost_makes_j_vanish() {
        let model = SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33);
        let grid = GridSpec::default_for(&model, 60);
        let contract = ContractSpec { cost_hat: 1e3, ..trading_contract() };
        let (_, j) = solve_long_short(&model, &contract, &grid).unwrap();
        assert!(j.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn small_grid_cir_sanity() {
        let model = SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33);
        let grid = GridSpec::default_for(&model, 80);
        let sol = solve_all(&model, &trading_contract(), &grid).unwrap();
        let report = sol.boundaries.ordering_report(1e-12);
        assert!(report.is_empty(), "{report:?}");
        for idx in 0..sol.p.surface.values.len() {
            assert!(sol.p.surface.values[idx] >= sol.p.surface.obstacle[idx] - 1e-12);
        }
    }
}
