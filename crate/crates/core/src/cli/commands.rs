use std::path::{Path, PathBuf};

use serde_json::json;

use crate::calibration::calibrate as fit_curve;
use crate::models::{simulate as simulate_paths, Measure, PathRequest, SpotModel};
use crate::premium::{classify_liquidation, liquidation_surface, premium_at, SpotBox};
use crate::pricing::{classify_term_structure, futures_price, term_structure, FuturesCurve};
use crate::rollyield::{expected_roll_yield_with, simulate_roll_yields, MonteCarloEstimate, RollSimulation};
use crate::vi_solver::{solve_all, Branch};

use super::config::{parse_time, times, RawConfig};
use super::output::{cell, write_csv, write_json, write_meta};
use super::CliError;

pub struct Context {
    pub raw: RawConfig,
    pub config_path: Option<PathBuf>,
}

impl Context {
    fn meta(&self, data: &Path, subcommand: &str) -> Result<(), CliError> {
        write_meta(data, subcommand, self.raw.seed(), self.config_path.as_deref())
    }

    fn model(&self) -> Result<SpotModel, CliError> {
        let model = self.raw.model()?;
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(CliError::Validation(format!("{} model: {}", model.kind, list.join("; "))))
        }
    }
}

fn required(v: Option<f64>, what: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing {what}")))
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let mut checked = vec!["model"];
    if ctx.raw.contract.maturity.is_some() {
        ctx.raw.contract()?.validate()?;
        checked.push("contract");
    }
    ctx.raw.grid(&model).validate(&model)?;
    checked.push("grid");
    if ctx.raw.schedule.is_some() {
        ctx.raw.schedule()?;
        checked.push("schedule");
    }
    println!("{}", json!({ "status": "ok", "model": model.kind.name(), "checked": checked }));
    Ok(())
}

pub fn price(ctx: &Context, t: Option<&str>, s: f64, maturity: Option<&str>) -> Result<(), CliError> {
    let model = ctx.model()?;
    let t = t.map(parse_time).transpose()?.unwrap_or(0.0);
    let maturity = match maturity {
        Some(m) => parse_time(m)?,
        None => ctx.raw.contract()?.maturity,
    };
    println!("{}", futures_price(&model, t, s, maturity)?);
    Ok(())
}

pub fn curve(ctx: &Context, s0: Option<f64>) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s0 = required(s0.or(ctx.raw.curve.s0), "[curve] s0")?;
    let maturities = match &ctx.raw.curve.maturities {
        Some(m) => times(m)?,
        None => (1..=12).map(|k| (21 * k) as f64 / 252.0).collect(),
    };
    let curve = term_structure(&model, s0, &maturities)?;
    let rows = curve
        .maturities
        .iter()
        .zip(&curve.prices)
        .map(|(&m, &p)| {
            let regime = classify_term_structure(&model, s0, m)?;
            Ok(vec![
                (m * 252.0).to_string(),
                m.to_string(),
                p.to_string(),
                format!("{:?}", regime.slope),
                format!("{:?}", regime.curvature),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let path = write_csv(
        &ctx.raw.out_dir(),
        "curve.csv",
        &["maturity_days", "maturity_years", "price", "slope", "curvature"],
        rows,
    )?;
    ctx.meta(&path, "curve")?;
    println!("{}", json!({ "rows": curve.len(), "file": path.display().to_string() }));
    Ok(())
}

fn read_quotes(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("quotes file {} does not exist", path.display())));
    }
    let bad = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(bad)?;
    // A `maturity_days` column holds bare day counts; otherwise each cell is
    // years or `Nd`.
    let in_days = reader.headers().map_err(bad)?.get(0) == Some("maturity_days");
    let (mut maturities, mut prices) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(bad)?;
        if record.len() < 2 {
            return Err(CliError::Config(format!("{}: expected maturity,price rows", path.display())));
        }
        let cell = &record[0];
        maturities.push(if in_days && !cell.ends_with('d') {
            parse_time(&format!("{cell}d"))?
        } else {
            parse_time(cell)?
        });
        let p: f64 = record[1]
            .parse()
            .map_err(|_| CliError::Config(format!("{}: bad price '{}'", path.display(), &record[1])))?;
        prices.push(p);
    }
    Ok((maturities, prices))
}

pub fn calibrate(ctx: &Context, quotes: Option<PathBuf>, s0: Option<f64>) -> Result<(), CliError> {
    let section = &ctx.raw.calibrate;
    let kind = ctx.raw.model.kind.ok_or_else(|| CliError::Config("missing [model] kind".into()))?;
    let quotes = quotes
        .or_else(|| section.quotes.clone())
        .ok_or_else(|| CliError::Config("missing [calibrate] quotes".into()))?;
    let s0 = required(s0.or(section.s0), "[calibrate] s0")?;
    let (maturities, prices) = read_quotes(&quotes)?;
    let curve = FuturesCurve::new(s0, maturities, prices)?;
    let result = fit_curve(kind, &curve, section.sigma)?;
    let out = ctx.raw.out_dir();
    let path = write_json(&out, "calibration.json", &result)?;
    ctx.meta(&path, "calibrate")?;
    let m = &result.params;
    let fragment = format!(
        "[model]\nkind = \"{}\"\nmu_q = {}\ntheta_q = {}\nsigma = {}\n",
        format!("{:?}", m.kind).to_lowercase(),
        m.mu_q,
        m.theta_q,
        m.sigma
    );
    let toml_path = out.join("calibration.toml");
    std::fs::write(&toml_path, fragment).map_err(|e| CliError::Io(format!("{}: {e}", toml_path.display())))?;
    println!("{}", serde_json::to_string(&result).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

pub fn rollyield(ctx: &Context, s0: Option<f64>, n_paths: Option<usize>) -> Result<(), CliError> {
    let model = ctx.model()?;
    let schedule = ctx.raw.schedule()?;
    let section = &ctx.raw.rollyield;
    let s0 = required(s0.or(section.s0), "[rollyield] s0")?;
    let at = match &section.times {
        Some(t) => times(t)?,
        None => schedule.maturities().to_vec(),
    };
    let form = section.form.unwrap_or_default();
    let n_paths = n_paths.or(section.n_paths).unwrap_or(0);
    let dt = match &section.dt {
        Some(d) => d.years()?,
        None => 1.0 / 2520.0,
    };
    let sim = RollSimulation { s0, dt, n_paths, seed: ctx.raw.seed() };
    let out = ctx.raw.out_dir();
    let per_path = if n_paths > 0 { simulate_roll_yields(&model, &schedule, &at, &sim)? } else { Vec::new() };
    if !per_path.is_empty() {
        let mut rows = Vec::with_capacity(per_path.len() * at.len());
        for (id, decomps) in per_path.iter().enumerate() {
            for (t, d) in at.iter().zip(decomps) {
                rows.push(vec![
                    id.to_string(),
                    t.to_string(),
                    d.basis_return.to_string(),
                    d.cumulative_roll_adjustment.to_string(),
                    d.total.to_string(),
                ]);
            }
        }
        let header = ["path_id", "time", "basis_return", "roll_adjustment", "total"];
        let path = write_csv(&out, "rollyield_paths.csv", &header, rows)?;
        ctx.meta(&path, "rollyield")?;
    }
    let mut rows = Vec::with_capacity(at.len());
    for (k, &t) in at.iter().enumerate() {
        let expected = expected_roll_yield_with(&model, s0, &schedule, t, form)?;
        let mc = (!per_path.is_empty()).then(|| {
            let totals: Vec<f64> = per_path.iter().map(|d| d[k].total).collect();
            MonteCarloEstimate::from_samples(&totals)
        });
        rows.push(vec![t.to_string(), expected.to_string(), cell(mc.map(|m| m.mean)), cell(mc.map(|m| m.std_err))]);
    }
    let header = ["time", "expected", "mc_mean", "mc_std_err"];
    let path = write_csv(&out, "rollyield.csv", &header, rows)?;
    ctx.meta(&path, "rollyield")?;
    println!("{}", json!({ "rows": at.len(), "file": path.display().to_string() }));
    Ok(())
}

pub fn premium(ctx: &Context, s0: Option<f64>, values: bool) -> Result<(), CliError> {
    let model = ctx.model()?;
    let contract = ctx.raw.contract()?;
    let section = &ctx.raw.premium;
    let t = match &section.t {
        Some(t) => t.years()?,
        None => 0.0,
    };
    let s0 = s0.or(section.s0);
    let s_box = match (section.box_lo, section.box_hi) {
        (Some(lo), Some(hi)) => SpotBox { lo, hi, log_spaced: section.log_spaced.unwrap_or(false) },
        (None, None) => SpotBox::default_for(&model, required(s0, "[premium] s0 (or box_lo and box_hi)")?),
        _ => return Err(CliError::Config("[premium] needs both box_lo and box_hi".into())),
    };
    let samples = (section.samples_u.unwrap_or(201), section.samples_s.unwrap_or(201));
    let advice = classify_liquidation(&model, &contract, t, s_box, samples)?;
    let mut report = json!({
        "verdict": advice.verdict.to_string(),
        "scope": "on sampled box",
        "evidence": advice.evidence,
    });
    if values || section.values.unwrap_or(false) {
        let grid = ctx.raw.grid(&model);
        let surface = liquidation_surface(&model, &contract, &grid)?;
        let at = match &section.times {
            Some(ts) => times(ts)?,
            None => vec![t],
        };
        let mut rows = Vec::with_capacity(at.len() * (grid.n_space + 1));
        for &tt in &at {
            for s in grid.spots() {
                rows.push([tt.to_string(), s.to_string(), premium_at(&surface, tt, s)?.to_string()]);
            }
        }
        let path = write_csv(&ctx.raw.out_dir(), "premium.csv", &["time", "spot", "premium"], rows)?;
        ctx.meta(&path, "premium")?;
        report["file"] = json!(path.display().to_string());
    }
    println!("{report}");
    Ok(())
}

pub fn boundaries(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let contract = ctx.raw.contract()?;
    let grid = ctx.raw.grid(&model);
    let sol = solve_all(&model, &contract, &grid)?;
    let b = &sol.boundaries;
    let sets = [&b.long_entry, &b.long_exit, &b.short_entry, &b.short_exit, &b.chooser_long, &b.chooser_short];
    let rows = (0..b.long_entry.len()).map(|j| {
        let mut row = vec![b.long_entry.times[j].to_string()];
        row.extend(sets.iter().map(|set| cell(set.levels[j])));
        row
    });
    let header = ["time", "long_entry", "long_exit", "short_entry", "short_exit", "chooser_long", "chooser_short"];
    let out = ctx.raw.out_dir();
    let path = write_csv(&out, "boundaries.csv", &header, rows)?;
    ctx.meta(&path, "boundaries")?;
    let mut report = json!({
        "file": path.display().to_string(),
        "time_steps": grid.n_time,
        "ordering_violations": b.ordering_report(1e-4 * grid.ds()).len(),
    });
    if ctx.raw.io.surfaces.unwrap_or(false) {
        let w = grid.n_space + 1;
        let spots = grid.spots();
        let surfaces = [&sol.v, &sol.j, &sol.u, &sol.k, &sol.p.surface];
        let rows = (0..sol.v.values.len()).map(|idx| {
            let (j, i) = (idx / w, idx % w);
            let mut row = vec![sol.v.time(j).to_string(), spots[i].to_string()];
            row.extend(surfaces.iter().map(|s| s.values[idx].to_string()));
            row.push(match sol.p.branches[idx] {
                Some(Branch::Long) => "long".into(),
                Some(Branch::Short) => "short".into(),
                None => String::new(),
            });
            row
        });
        let header = ["time", "spot", "V", "J", "U", "K", "P", "binding_branch"];
        let spath = write_csv(&out, "surfaces.csv", &header, rows)?;
        ctx.meta(&spath, "boundaries")?;
        report["surfaces"] = json!(spath.display().to_string());
    }
    println!("{report}");
    Ok(())
}

pub fn simulate(ctx: &Context, n_paths: Option<usize>) -> Result<(), CliError> {
    let model = ctx.model()?;
    let section = &ctx.raw.simulate;
    let dt = match &section.dt {
        Some(d) => d.years()?,
        None => 1.0 / 252.0,
    };
    let req = PathRequest {
        s0: required(section.s0, "[simulate] s0")?,
        dt,
        n_steps: section.n_steps.unwrap_or(252),
        n_paths: n_paths.or(section.n_paths).unwrap_or(10),
        seed: ctx.raw.seed(),
    };
    let paths = simulate_paths(&model, section.measure.unwrap_or(Measure::Historical), &req)?;
    let rows = paths.paths().enumerate().flat_map(|(p, values)| {
        let dt = paths.dt;
        values
            .iter()
            .enumerate()
            .map(move |(k, s)| [p.to_string(), k.to_string(), (k as f64 * dt).to_string(), s.to_string()])
    });
    let path = write_csv(&ctx.raw.out_dir(), "paths.csv", &["path_id", "step", "time", "spot"], rows)?;
    ctx.meta(&path, "simulate")?;
    println!("{}", json!({ "paths": req.n_paths, "steps": req.n_steps, "file": path.display().to_string() }));
    Ok(())
}
