#![allow(dead_code)]

use meanrev_futures::vi_solver::Tridiagonal;
use meanrev_futures::{ContractSpec, SpotModel};
use rand::Rng;

pub fn boundary_contract() -> ContractSpec {
    ContractSpec { maturity: 66.0 / 252.0, deadline: 22.0 / 252.0, rate: 0.05, cost: 0.005, cost_hat: 0.005 }
}

pub fn cir_trading() -> SpotModel {
    SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33)
}

pub fn ou_trading() -> SpotModel {
    SpotModel::ou(8.57, 17.58, 4.55, 18.16, 18.7)
}

pub fn xou_trading() -> SpotModel {
    SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63)
}

pub fn trading_models() -> [(&'static str, SpotModel); 3] {
    [("CIR", cir_trading()), ("OU", ou_trading()), ("XOU", xou_trading())]
}

/// Random strictly diagonally dominant tridiagonal matrix with positive
/// diagonal; off-diagonal row sums stay below `margin` times the diagonal.
pub fn random_dominant<R: Rng>(rng: &mut R, n: usize, margin: f64) -> Tridiagonal {
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let budget = margin * diag[i];
        let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let scale = budget * rng.random_range(0.0..1.0) / (a + b + 1e-12);
        let sign = |r: &mut R| if r.random_bool(0.8) { -1.0 } else { 1.0 };
        if i > 0 {
            lower[i] = sign(rng) * a * scale;
        }
        if i + 1 < n {
            upper[i] = sign(rng) * b * scale;
        }
    }
    Tridiagonal::new(lower, diag, upper)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Every solution of `a x >= rhs, x >= lo, (a x - rhs)(x - lo) = 0`, found by
/// trying all active sets.
pub fn enumerate_lcp(a: &Tridiagonal, rhs: &[f64], lo: &[f64]) -> Vec<Vec<f64>> {
    let n = rhs.len();
    let mut found = Vec::new();
    for mask in 0..(1u32 << n) {
        let active = |i: usize| mask & (1 << i) != 0;
        let free: Vec<usize> = (0..n).filter(|&i| !active(i)).collect();
        let mut x = lo.to_vec();
        if !free.is_empty() {
            let mat = free.iter().map(|&r| free.iter().map(|&c| a.get(r, c)).collect()).collect();
            let b = free
                .iter()
                .map(|&r| rhs[r] - (0..n).filter(|&c| active(c)).map(|c| a.get(r, c) * lo[c]).sum::<f64>())
                .collect();
            for (k, v) in free.iter().zip(dense_solve(mat, b)) {
                x[*k] = v;
            }
        }
        let ax = a.mul_vec(&x);
        let scale = 1e-12 * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let ok = (0..n).all(|i| if active(i) { ax[i] - rhs[i] >= -scale } else { x[i] - lo[i] >= -scale });
        if ok {
            found.push(x);
        }
    }
    found
}
