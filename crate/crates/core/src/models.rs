//! Mean-reverting spot models under the historical and risk-neutral measures,
//! plus a seeded path simulator used as the Monte-Carlo reference throughout
//! the test suite.
//!
//! All three models share one volatility `sigma`; only the drift changes
//! between measures.
//!
//! | kind | drift                 | diffusion |
//! |------|-----------------------|-----------|
//! | OU   | m (th - s)            | sigma     |
//! | CIR  | m (th - s)            | sigma √s  |
//! | XOU  | m (th - ln s) s       | sigma s   |

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ou,
    Cir,
    Xou,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ou => "OU",
            ModelKind::Cir => "CIR",
            ModelKind::Xou => "XOU",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ou" => Ok(ModelKind::Ou),
            "cir" => Ok(ModelKind::Cir),
            "xou" => Ok(ModelKind::Xou),
            other => Err(Error::InvalidInput(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Historical,
    RiskNeutral,
}

/// Spot model with historical `(mu, theta)` and risk-neutral `(mu_q, theta_q)`
/// drift parameters. For XOU the levels are log-price levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotModel {
    pub kind: ModelKind,
    pub mu: f64,
    pub theta: f64,
    pub mu_q: f64,
    pub theta_q: f64,
    pub sigma: f64,
}

/// A failed model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositive { field: &'static str, value: f64 },
    NonFinite { field: &'static str },
    NonPositiveLevel { field: &'static str, value: f64 },
    Feller { measure: Measure, lhs: f64, sigma_sq: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive { field, value } => {
                write!(f, "positivity: {field} must be > 0 (got {value})")
            }
            Violation::NonFinite { field } => write!(f, "finiteness: {field} must be finite"),
            Violation::NonPositiveLevel { field, value } => {
                write!(f, "level: {field} must be > 0 for this model (got {value})")
            }
            Violation::Feller { measure, lhs, sigma_sq } => {
                let (m, th) = match measure {
                    Measure::Historical => ("mu", "theta"),
                    Measure::RiskNeutral => ("mu_q", "theta_q"),
                };
                write!(f, "feller ({measure:?}): 2*{m}*{th} = {lhs} < sigma^2 = {sigma_sq}")
            }
        }
    }
}

impl SpotModel {
    pub fn new(kind: ModelKind, mu: f64, theta: f64, mu_q: f64, theta_q: f64, sigma: f64) -> Self {
        SpotModel { kind, mu, theta, mu_q, theta_q, sigma }
    }

    pub fn ou(mu: f64, theta: f64, mu_q: f64, theta_q: f64, sigma: f64) -> Self {
        Self::new(ModelKind::Ou, mu, theta, mu_q, theta_q, sigma)
    }

    pub fn cir(mu: f64, theta: f64, mu_q: f64, theta_q: f64, sigma: f64) -> Self {
        Self::new(ModelKind::Cir, mu, theta, mu_q, theta_q, sigma)
    }

    pub fn xou(mu: f64, theta: f64, mu_q: f64, theta_q: f64, sigma: f64) -> Self {
        Self::new(ModelKind::Xou, mu, theta, mu_q, theta_q, sigma)
    }

    /// Returns every violated invariant; empty when the model is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let fields = [
            ("mu", self.mu),
            ("theta", self.theta),
            ("mu_q", self.mu_q),
            ("theta_q", self.theta_q),
            ("sigma", self.sigma),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                out.push(Violation::NonFinite { field });
            }
        }
        for (field, value) in [("mu", self.mu), ("mu_q", self.mu_q), ("sigma", self.sigma)] {
            if value.is_finite() && value <= 0.0 {
                out.push(Violation::NonPositive { field, value });
            }
        }
        if matches!(self.kind, ModelKind::Cir | ModelKind::Xou) {
            for (field, value) in [("theta", self.theta), ("theta_q", self.theta_q)] {
                if value.is_finite() && value <= 0.0 {
                    out.push(Violation::NonPositiveLevel { field, value });
                }
            }
        }
        if self.kind == ModelKind::Cir {
            let sigma_sq = self.sigma * self.sigma;
            for measure in [Measure::Historical, Measure::RiskNeutral] {
                let (m, th) = self.params(measure);
                let lhs = 2.0 * m * th;
                if lhs < sigma_sq {
                    out.push(Violation::Feller { measure, lhs, sigma_sq });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// `(speed, level)` pair selected by the measure.
    pub fn params(&self, measure: Measure) -> (f64, f64) {
        match measure {
            Measure::Historical => (self.mu, self.theta),
            Measure::RiskNeutral => (self.mu_q, self.theta_q),
        }
    }

    /// Spot level at which the drift vanishes.
    pub fn equilibrium(&self, measure: Measure) -> f64 {
        let (_, th) = self.params(measure);
        match self.kind {
            ModelKind::Xou => th.exp(),
            _ => th,
        }
    }

    fn domain_error(&self, s: f64) -> Error {
        Error::Domain { model: self.kind.name(), spot: s }
    }

    /// Checks `s` against the spot domain: any real for OU, `s >= 0` for CIR,
    /// `s > 0` for XOU.
    pub fn check_spot(&self, s: f64) -> Result<()> {
        let ok = match self.kind {
            ModelKind::Ou => s.is_finite(),
            ModelKind::Cir => s.is_finite() && s >= 0.0,
            ModelKind::Xou => s.is_finite() && s > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(self.domain_error(s))
        }
    }

    pub fn drift(&self, measure: Measure, s: f64) -> Result<f64> {
        self.check_spot(s)?;
        let (m, th) = self.params(measure);
        Ok(match self.kind {
            ModelKind::Ou | ModelKind::Cir => m * (th - s),
            ModelKind::Xou => m * (th - s.ln()) * s,
        })
    }

    pub fn diffusion(&self, s: f64) -> Result<f64> {
        self.check_spot(s)?;
        Ok(match self.kind {
            ModelKind::Ou => self.sigma,
            ModelKind::Cir => self.sigma * s.sqrt(),
            ModelKind::Xou => self.sigma * s,
        })
    }

    /// `E[S_t | S_0 = s0]` under the given measure.
    pub fn expected_spot(&self, measure: Measure, s0: f64, t: f64) -> Result<f64> {
        self.check_spot(s0)?;
        let (m, th) = self.params(measure);
        let decay = (-m * t).exp();
        Ok(match self.kind {
            ModelKind::Ou | ModelKind::Cir => th + (s0 - th) * decay,
            ModelKind::Xou => {
                let var = self.sigma * self.sigma * (1.0 - decay * decay) / (2.0 * m);
                let mean = decay * s0.ln() + (1.0 - decay) * (th - self.sigma * self.sigma / (2.0 * m));
                (mean + 0.5 * var).exp()
            }
        })
    }
}

/// Request for a block of simulated paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRequest {
    pub s0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

/// Simulated spot paths, row-major `[path][step]` with `n_steps + 1` columns
/// (column 0 holds `s0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub s0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl PathSet {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_steps + 1)
    }

    pub fn spot_path(&self, i: usize) -> SpotPath<'_> {
        SpotPath::new(self.dt, self.path(i))
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Borrowed view of one uniformly sampled path starting at `t = 0`.
#[derive(Debug, Clone, Copy)]
pub struct SpotPath<'a> {
    pub dt: f64,
    pub values: &'a [f64],
}

impl<'a> SpotPath<'a> {
    pub fn new(dt: f64, values: &'a [f64]) -> Self {
        SpotPath { dt, values }
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Index of the last grid time `<= t`, with a small tolerance so that
    /// times like `22/252` land on their node despite rounding.
    pub fn index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::OutsidePath(t));
        }
        let x = t / self.dt;
        let idx = (x + 1e-9 * x.max(1.0)).floor() as usize;
        if idx >= self.values.len() {
            return Err(Error::OutsidePath(t));
        }
        Ok(idx)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.index(t)?])
    }
}

/// Per-step transition with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    kind: ModelKind,
    dt: f64,
    speed: f64,
    level: f64,
    sigma: f64,
    decay: f64,
    noise: f64,
}

impl Stepper {
    pub fn new(model: &SpotModel, measure: Measure, dt: f64) -> Self {
        let (m, th) = model.params(measure);
        let decay = (-m * dt).exp();
        let noise = model.sigma * ((1.0 - decay * decay) / (2.0 * m)).sqrt();
        let level = match model.kind {
            // log-price is OU with a convexity-shifted mean
            ModelKind::Xou => th - model.sigma * model.sigma / (2.0 * m),
            _ => th,
        };
        Stepper { kind: model.kind, dt, speed: m, level, sigma: model.sigma, decay, noise }
    }

    /// Fills `out` with one path from `s0`; `out[0] = s0`.
    pub fn fill<R: rand::Rng>(&self, s0: f64, rng: &mut R, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = s0;
        match self.kind {
            ModelKind::Ou => {
                let mut x = s0;
                for v in out.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(rng);
                    x = self.level + (x - self.level) * self.decay + self.noise * z;
                    *v = x;
                }
            }
            ModelKind::Cir => {
                // full truncation: the internal state may dip below zero, the
                // drift and diffusion only see its positive part
                let sq_dt = self.dt.sqrt();
                let mut x = s0;
                for v in out.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(rng);
                    let xp = x.max(0.0);
                    x += self.speed * (self.level - xp) * self.dt + self.sigma * xp.sqrt() * sq_dt * z;
                    *v = x.max(0.0);
                }
            }
            ModelKind::Xou => {
                let mut y = s0.ln();
                for v in out.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(rng);
                    y = self.level + (y - self.level) * self.decay + self.noise * z;
                    *v = y.exp();
                }
            }
        }
    }
}

/// Deterministic generator for path `path_id` of stream `seed`.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

fn check_request(model: &SpotModel, req: &PathRequest) -> Result<()> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInput(format!("invalid model: {}", violations[0])));
    }
    if !(req.dt > 0.0) || !req.dt.is_finite() {
        return Err(Error::InvalidInput(format!("dt must be > 0 (got {})", req.dt)));
    }
    if req.n_steps == 0 || req.n_paths == 0 {
        return Err(Error::InvalidInput("n_steps and n_paths must be >= 1".into()));
    }
    model.check_spot(req.s0)
}

/// Simulates `n_paths` independent paths. Path `i` draws from its own
/// substream of `seed`, so the result does not depend on thread scheduling.
pub fn simulate(model: &SpotModel, measure: Measure, req: &PathRequest) -> Result<PathSet> {
    check_request(model, req)?;
    let width = req.n_steps + 1;
    let stepper = Stepper::new(model, measure, req.dt);
    let mut values = vec![0.0; width * req.n_paths];
    values.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
        let mut rng = path_rng(req.seed, i as u64);
        stepper.fill(req.s0, &mut rng, row);
    });
    Ok(PathSet { s0: req.s0, dt: req.dt, n_steps: req.n_steps, n_paths: req.n_paths, seed: req.seed, values })
}

/// Applies `f` to each simulated path without materialising the whole set.
/// Results come back in path order.
pub fn map_paths<T, F>(model: &SpotModel, measure: Measure, req: &PathRequest, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(SpotPath<'_>) -> T + Sync,
{
    check_request(model, req)?;
    let stepper = Stepper::new(model, measure, req.dt);
    let width = req.n_steps + 1;
    Ok((0..req.n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; width],
            |buf, i| {
                let mut rng = path_rng(req.seed, i as u64);
                stepper.fill(req.s0, &mut rng, buf);
                f(SpotPath::new(req.dt, buf))
            },
        )
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trading_cir() -> SpotModel {
        SpotModel::cir(8.57, 17.58, 4.55, 18.16, 5.33)
    }

    #[test]
    fn feller_holds_for_trading_parameters() {
        assert!(trading_cir().validate().is_empty());
        assert!(2.0 * 8.57 * 17.58 >= 5.33f64.powi(2));
    }

    #[test]
    fn feller_violation_is_named() {
        let m = SpotModel::cir(1.0, 1.0, 1.0, 1.0, 2.0);
        let v = m.validate();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.to_string().starts_with("feller")));
    }

    #[test]
    fn zero_sigma_is_a_positivity_violation() {
        let m = SpotModel::ou(1.0, 1.0, 1.0, 1.0, 0.0);
        let v = m.validate();
        assert_eq!(v, vec![Violation::NonPositive { field: "sigma", value: 0.0 }]);
        assert!(v[0].to_string().contains("sigma"));
    }

    #[test]
    fn negative_level_only_rejected_for_positive_models() {
        assert!(SpotModel::ou(1.0, -3.0, 1.0, -2.0, 1.0).is_valid());
        assert!(!SpotModel::xou(1.0, -3.0, 1.0, 2.0, 0.1).is_valid());
    }

    #[test]
    fn drift_examples() {
        let ou = SpotModel::ou(8.57, 17.58, 4.55, 18.16, 18.7);
        assert_eq!(ou.drift(Measure::Historical, 17.58).unwrap(), 0.0);

        let cir = trading_cir();
        let d = cir.drift(Measure::RiskNeutral, 12.12).unwrap();
        assert!((d - 27.482).abs() < 1e-9);

        let xou = SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63);
        let d = xou.drift(Measure::Historical, 3.03f64.exp()).unwrap();
        assert!(d.abs() < 1e-12);

        assert!(cir.drift(Measure::Historical, -1.0).is_err());
        assert!(xou.drift(Measure::Historical, 0.0).is_err());
    }

    #[test]
    fn cir_drift_matches_simulated_one_step_mean() {
        let cir = trading_cir();
        let dt = 1e-4;
        let req = PathRequest { s0: 12.12, dt, n_steps: 1, n_paths: 200_000, seed: 3 };
        let ps = simulate(&cir, Measure::RiskNeutral, &req).unwrap();
        let incs: Vec<f64> = ps.paths().map(|p| (p[1] - p[0]) / dt).collect();
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 27.482).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn diffusion_examples() {
        let ou = SpotModel::ou(8.57, 17.58, 4.55, 18.16, 18.7);
        assert_eq!(ou.diffusion(-40.0).unwrap(), 18.7);
        assert!((trading_cir().diffusion(4.0).unwrap() - 10.66).abs() < 1e-12);
        let xou = SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63);
        assert_eq!(xou.diffusion(1.0).unwrap(), 1.63);
        assert!(xou.diffusion(0.0).is_err());
        assert!(trading_cir().diffusion(-0.1).is_err());
    }

    #[test]
    fn zero_noise_ou_follows_the_ode() {
        let m = SpotModel::ou(2.0, 5.0, 2.0, 5.0, 1e-8);
        let req = PathRequest { s0: 10.0, dt: 0.01, n_steps: 100, n_paths: 4, seed: 9 };
        let ps = simulate(&m, Measure::Historical, &req).unwrap();
        for p in ps.paths() {
            for (k, &x) in p.iter().enumerate() {
                let t = k as f64 * 0.01;
                let ode = 5.0 + 5.0 * (-2.0 * t).exp();
                assert!((x - ode).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let req = PathRequest { s0: 12.12, dt: 1e-3, n_steps: 50, n_paths: 64, seed: 11 };
        let a = simulate(&trading_cir(), Measure::Historical, &req).unwrap();
        let b = simulate(&trading_cir(), Measure::Historical, &req).unwrap();
        assert_eq!(a, b);
        let c = simulate(&trading_cir(), Measure::Historical, &PathRequest { seed: 12, ..req }).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn positive_models_stay_in_domain() {
        let req = PathRequest { s0: 0.5, dt: 1e-3, n_steps: 500, n_paths: 200, seed: 1 };
        // Feller holds only barely
        let cir = SpotModel::cir(2.0, 1.0, 2.0, 1.0, 1.99);
        let ps = simulate(&cir, Measure::Historical, &req).unwrap();
        assert!(ps.values.iter().all(|&x| x >= 0.0));
        let xou = SpotModel::xou(8.57, 3.03, 4.08, 3.06, 1.63);
        let ps = simulate(&xou, Measure::Historical, &req).unwrap();
        assert!(ps.values.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let m = trading_cir();
        let req = PathRequest { s0: 1.0, dt: 0.0, n_steps: 10, n_paths: 1, seed: 0 };
        assert!(simulate(&m, Measure::Historical, &req).is_err());
        let req = PathRequest { dt: 0.1, n_paths: 0, ..req };
        assert!(simulate(&m, Measure::Historical, &req).is_err());
    }

    #[test]
    fn path_index_snaps_to_grid() {
        let v = vec![0.0; 67];
        let p = SpotPath::new(1.0 / 252.0, &v);
        assert_eq!(p.index(22.0 / 252.0).unwrap(), 22);
        assert_eq!(p.index(66.0 / 252.0).unwrap(), 66);
        assert!(p.index(67.0 / 252.0).is_err());
        assert!(p.index(-0.1).is_err());
    }
}
