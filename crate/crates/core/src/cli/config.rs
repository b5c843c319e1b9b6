//! Run configuration: a TOML file with one table per module, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::models::{Measure, ModelKind, SpotModel};
use crate::pricing::{days_to_years, ContractSpec};
use crate::rollyield::{RollSchedule, XouRollForm};
use crate::vi_solver::{EdgeCondition, Generator, GridSpec};

use super::{CliError, Overrides};

/// A time given in years (`0.25`) or in trading days (`"66d"`, N/252).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TimeValue {
    Years(f64),
    Text(String),
}

impl TimeValue {
    pub fn years(&self) -> Result<f64, CliError> {
        match self {
            TimeValue::Years(y) => Ok(*y),
            TimeValue::Text(s) => parse_time(s),
        }
    }
}

/// Parses `"Nd"` as N/252 years; anything else must be a plain number of years.
pub fn parse_time(text: &str) -> Result<f64, CliError> {
    let t = text.trim();
    let parsed = match t.strip_suffix('d') {
        Some(days) => days.trim().parse::<f64>().map(days_to_years),
        None => t.parse::<f64>(),
    };
    match parsed {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Config(format!("cannot read '{text}' as a time (use years or 'Nd')"))),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub mu_q: Option<f64>,
    pub theta_q: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub maturity: Option<TimeValue>,
    pub deadline: Option<TimeValue>,
    pub rate: Option<f64>,
    pub cost: Option<f64>,
    pub cost_hat: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_time: Option<usize>,
    pub n_space: Option<usize>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub generator: Option<Generator>,
    pub edges: Option<EdgeCondition>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub maturities: Vec<TimeValue>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    pub out_dir: Option<PathBuf>,
    pub surfaces: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub s0: Option<f64>,
    pub maturities: Option<Vec<TimeValue>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub quotes: Option<PathBuf>,
    pub s0: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollYieldSection {
    pub s0: Option<f64>,
    pub times: Option<Vec<TimeValue>>,
    pub n_paths: Option<usize>,
    pub dt: Option<TimeValue>,
    pub form: Option<XouRollForm>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiumSection {
    pub t: Option<TimeValue>,
    pub s0: Option<f64>,
    pub box_lo: Option<f64>,
    pub box_hi: Option<f64>,
    pub log_spaced: Option<bool>,
    pub samples_u: Option<usize>,
    pub samples_s: Option<usize>,
    pub values: Option<bool>,
    pub times: Option<Vec<TimeValue>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub s0: Option<f64>,
    pub dt: Option<TimeValue>,
    pub n_steps: Option<usize>,
    pub n_paths: Option<usize>,
    pub measure: Option<Measure>,
}

/// File contents as written, every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub contract: ContractSection,
    #[serde(default)]
    pub grid: GridSection,
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub rollyield: RollYieldSection,
    #[serde(default)]
    pub premium: PremiumSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().replace('\n', " ")))
    }

    /// Folds command-line overrides into the file values.
    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.model.kind, &o.kind);
        set(&mut self.model.mu, &o.mu);
        set(&mut self.model.theta, &o.theta);
        set(&mut self.model.mu_q, &o.mu_q);
        set(&mut self.model.theta_q, &o.theta_q);
        set(&mut self.model.sigma, &o.sigma);
        let text = |v: &Option<String>| v.as_ref().map(|s| TimeValue::Text(s.clone()));
        set(&mut self.contract.maturity, &text(&o.maturity));
        set(&mut self.contract.deadline, &text(&o.deadline));
        set(&mut self.contract.rate, &o.rate);
        set(&mut self.contract.cost, &o.cost);
        set(&mut self.contract.cost_hat, &o.cost_hat);
        set(&mut self.grid.n_time, &o.n_time);
        set(&mut self.grid.n_space, &o.n_space);
        set(&mut self.grid.generator, &o.generator);
        set(&mut self.grid.edges, &o.edges);
        set(&mut self.io.out_dir, &o.out_dir);
        if o.surfaces {
            self.io.surfaces = Some(true);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.io.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn model(&self) -> Result<SpotModel, CliError> {
        let m = &self.model;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| missing("model", key));
        let kind = m.kind.ok_or_else(|| missing("model", "kind"))?;
        let mu_q = need(m.mu_q, "mu_q")?;
        let theta_q = need(m.theta_q, "theta_q")?;
        // Without separate historical values the model is its own
        // risk-neutral version.
        Ok(SpotModel::new(
            kind,
            m.mu.unwrap_or(mu_q),
            m.theta.unwrap_or(theta_q),
            mu_q,
            theta_q,
            need(m.sigma, "sigma")?,
        ))
    }

    pub fn contract(&self) -> Result<ContractSpec, CliError> {
        let c = &self.contract;
        let maturity = c.maturity.as_ref().ok_or_else(|| missing("contract", "maturity"))?.years()?;
        let deadline = match &c.deadline {
            Some(d) => d.years()?,
            None => maturity,
        };
        Ok(ContractSpec {
            maturity,
            deadline,
            rate: c.rate.ok_or_else(|| missing("contract", "rate"))?,
            cost: c.cost.unwrap_or(0.0),
            cost_hat: c.cost_hat.unwrap_or(0.0),
        })
    }

    /// Grid from `[grid]`; the spot range defaults to the model's standard
    /// range for the chosen resolution.
    pub fn grid(&self, model: &SpotModel) -> GridSpec {
        let g = &self.grid;
        let n_time = g.n_time.unwrap_or(500);
        let n_space = g.n_space.unwrap_or(500);
        let base = GridSpec::default_for(model, n_space);
        let mut grid = GridSpec { n_time, ..base };
        if let Some(v) = g.s_max {
            grid.s_max = v;
            grid = grid.with_resolution(model, n_time, n_space);
        }
        if let Some(v) = g.s_min {
            grid.s_min = v;
        }
        grid.omega = g.omega.unwrap_or(grid.omega);
        grid.epsilon = g.epsilon.unwrap_or(grid.epsilon);
        grid.max_iter = g.max_iter.unwrap_or(grid.max_iter);
        grid.generator = g.generator.unwrap_or(grid.generator);
        grid.edges = g.edges.unwrap_or(grid.edges);
        grid
    }

    pub fn schedule(&self) -> Result<RollSchedule, CliError> {
        let s = self.schedule.as_ref().ok_or_else(|| missing("schedule", "maturities"))?;
        let maturities = times(&s.maturities)?;
        RollSchedule::new(maturities).map_err(CliError::from)
    }
}

pub fn times(values: &[TimeValue]) -> Result<Vec<f64>, CliError> {
    values.iter().map(TimeValue::years).collect()
}

fn missing(section: &str, key: &str) -> CliError {
    CliError::Config(format!("missing [{section}] {key}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_counts() {
        assert_eq!(parse_time("66d").unwrap(), 66.0 / 252.0);
        assert_eq!(parse_time(" 0.5 ").unwrap(), 0.5);
        assert!(parse_time("3w").is_err());
        assert!(parse_time("d").is_err());
    }

    #[test]
    fn sections_parse_and_defaults_fill_in() {
        let raw = RawConfig::parse(
            r#"
            seed = 7
            [model]
            kind = "cir"
            mu = 8.57
            theta = 17.58
            mu_q = 4.55
            theta_q = 18.16
            sigma = 5.33
            [contract]
            maturity = "66d"
            deadline = 0.0873
            rate = 0.05
            [grid]
            n_time = 100
            n_space = 120
            edges = "pinned"
            "#,
        )
        .unwrap();
        let model = raw.model().unwrap();
        assert_eq!(model.kind, ModelKind::Cir);
        let c = raw.contract().unwrap();
        assert_eq!(c.maturity, 66.0 / 252.0);
        assert_eq!(c.cost, 0.0);
        let g = raw.grid(&model);
        assert_eq!((g.n_time, g.n_space, g.s_max), (100, 120, 4.0 * 18.16));
        assert_eq!(g.edges, EdgeCondition::Pinned);
        assert_eq!(raw.seed(), 7);
    }

    #[test]
    fn unknown_keys_and_missing_fields_are_config_errors() {
        assert!(matches!(RawConfig::parse("[model]\nspeed = 1.0"), Err(CliError::Config(_))));
        let raw = RawConfig::parse("[model]\nkind = \"ou\"\nmu_q = 1.0").unwrap();
        let err = raw.model().unwrap_err();
        assert!(err.to_string().contains("theta_q"), "{err}");
    }
}
