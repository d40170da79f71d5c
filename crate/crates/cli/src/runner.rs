//! Runs one experiment and writes its report bundle.
//!
//! Every run writes `config.toml` (the resolved configuration) and
//! `verdict.json` into the output directory, plus the tables of the preset.
//! Outputs depend only on the configuration, never on the thread count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rosenau_core::bounds::{self, BoundInputs, LARGE_TIME};
use rosenau_core::evolution::{total_energy, EnergyState};
use rosenau_core::growth::{self, GrowthModel};
use rosenau_core::hardy::{self, BlowupVerdict, WeightFunction, WeightKind};
use rosenau_core::model::plancherel_factor;
use rosenau_core::radial_norm::{fmt17, geometric_times, norm_trace};
use rosenau_core::{grid, wellposed};
use rosenau_core::{
    EnvelopeReport, GridField, ModelParams, MomentDecomposition, NormTrace, RadialFunction,
    RadialInitialData,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DataSpec, ExperimentConfig, Preset};
use crate::plotdata::{export_plotdata, PlotFormat, PlotSource};

/// Version of the `verdict.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Late-to-early maximum ratio allowed for bounded growth.
pub const BOUNDED_DRIFT: f64 = 1.05;
/// Seed of the random dissipativity profiles.
pub const DISSIPATIVITY_SEED: u64 = 0x5eed;

/// One acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Acceptance criterion number this check belongs to.
    pub criterion: u32,
    pub passed: bool,
    pub observed: Value,
    /// `le`, `ge`, `gt`, `within` or `equals`.
    pub comparison: &'static str,
    pub limit: Value,
    /// Centre of a `within` comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl Check {
    pub fn le(name: impl Into<String>, criterion: u32, observed: f64, limit: f64) -> Self {
        Self::cmp(name, criterion, observed, "le", limit, observed <= limit)
    }

    pub fn ge(name: impl Into<String>, criterion: u32, observed: f64, limit: f64) -> Self {
        Self::cmp(name, criterion, observed, "ge", limit, observed >= limit)
    }

    pub fn gt(name: impl Into<String>, criterion: u32, observed: f64, limit: f64) -> Self {
        Self::cmp(name, criterion, observed, "gt", limit, observed > limit)
    }

    /// `|observed − target| <= tol`.
    pub fn within(
        name: impl Into<String>,
        criterion: u32,
        observed: f64,
        target: f64,
        tol: f64,
    ) -> Self {
        let mut c = Self::cmp(
            name,
            criterion,
            observed,
            "within",
            tol,
            (observed - target).abs() <= tol,
        );
        c.target = Some(target);
        c
    }

    pub fn equals(
        name: impl Into<String>,
        criterion: u32,
        observed: impl Serialize,
        expected: impl Serialize,
    ) -> Self {
        let observed = serde_json::to_value(observed).unwrap_or(Value::Null);
        let limit = serde_json::to_value(expected).unwrap_or(Value::Null);
        Check {
            name: name.into(),
            criterion,
            passed: observed == limit,
            observed,
            comparison: "equals",
            limit,
            target: None,
        }
    }

    fn cmp(
        name: impl Into<String>,
        criterion: u32,
        observed: f64,
        comparison: &'static str,
        limit: f64,
        ok: bool,
    ) -> Self {
        Check {
            name: name.into(),
            criterion,
            passed: ok && observed.is_finite(),
            observed: json!(observed),
            comparison,
            limit: json!(limit),
            target: None,
        }
    }
}

/// Contents of `verdict.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub preset: Preset,
    /// All checks passed and the run completed.
    pub passed: bool,
    /// The run stopped early; the files listed are what was written.
    pub partial: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub summary: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
}

impl VerdictReport {
    /// 0 when everything passed, 1 on a failed check, 2 on an error.
    pub fn exit_code(&self) -> i32 {
        if self.partial {
            2
        } else if self.passed {
            0
        } else {
            1
        }
    }
}

/// Collects checks, summary entries and written files during a run.
struct Bundle {
    dir: PathBuf,
    checks: Vec<Check>,
    summary: BTreeMap<String, Value>,
    outputs: Vec<String>,
}

impl Bundle {
    fn check(&mut self, c: Check) {
        log::info!(
            "[{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.observed
        );
        self.checks.push(c);
    }

    fn note(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut out = std::io::BufWriter::new(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        body(&mut out)?;
        out.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn plot(&mut self, source: PlotSource<'_>, curves: &[&str]) -> Result<()> {
        let files = export_plotdata(source, curves, PlotFormat::Csv, &self.dir)?;
        self.outputs.extend(files);
        Ok(())
    }
}

/// Runs `cfg` on a pool of `threads` workers and writes the bundle into
/// `cfg.output_dir`. An invalid configuration or an unwritable directory is
/// an `Err`; numerical failures during the run produce a partial verdict.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<VerdictReport> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut bundle = Bundle {
        dir: dir.clone(),
        checks: Vec::new(),
        summary: BTreeMap::new(),
        outputs: Vec::new(),
    };
    let toml = cfg.to_toml()?;
    bundle.write("config.toml", |w| Ok(w.write_all(toml.as_bytes())?))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()?;
    let result = pool.install(|| run_preset(cfg, &mut bundle));
    if let Err(e) = &result {
        log::error!("run stopped: {e:#}");
    }
    bundle.outputs.push("verdict.json".into());
    bundle.outputs.sort();
    let report = VerdictReport {
        schema_version: SCHEMA_VERSION,
        preset: cfg.preset,
        passed: result.is_ok()
            && !bundle.checks.is_empty()
            && bundle.checks.iter().all(|c| c.passed),
        partial: result.is_err(),
        error: result.err().map(|e| format!("{e:#}")),
        checks: bundle.checks,
        summary: bundle.summary,
        outputs: bundle.outputs,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(dir.join("verdict.json"), text).context("writing verdict.json")?;
    Ok(report)
}

fn run_preset(cfg: &ExperimentConfig, b: &mut Bundle) -> Result<()> {
    match cfg.preset {
        Preset::Theorem11 | Preset::Theorem12 | Preset::Prop41 => growth_run(cfg, b),
        Preset::EnergyConservation => energy_run(cfg, b),
        Preset::HardyFailure => hardy_run(cfg, b),
        Preset::WellposedCheck => wellposed_run(cfg, b),
        Preset::Custom => match cfg.data {
            DataSpec::GridFile { ref path } => grid_file_run(cfg, path, b),
            _ => growth_run(cfg, b),
        },
    }
}

/// The radial initial data of a non-grid data specification.
pub fn build_data(cfg: &ExperimentConfig) -> Result<RadialInitialData> {
    let dim = cfg.params.dim;
    Ok(match cfg.data {
        DataSpec::Gaussian { a, c } => RadialInitialData::gaussian_velocity(dim, a, c)?,
        DataSpec::AnnularBump { r0, width } => RadialInitialData::annular_bump(dim, r0, width)?,
        DataSpec::CompactBand {
            r_lo,
            r_hi,
            amplitude,
        } => RadialInitialData::compact_band(r_lo, r_hi, amplitude)?,
        DataSpec::GridFile { ref path } => {
            bail!("grid-file data {} has no radial form", path.display())
        }
    })
}

/// Physical `‖f‖₂` of a radial profile.
fn l2_norm(f: &RadialFunction, dim: usize) -> Result<f64> {
    let (v, _) = f.integrate_radial(dim, 2, 0.0, 1e-10, |r| f.value(r).powi(2))?;
    Ok(v.sqrt())
}

/// Inputs of the envelopes, when the data has a physical profile.
fn bound_inputs(
    cfg: &ExperimentConfig,
    data: &RadialInitialData,
) -> Result<Option<BoundInputs<f64>>> {
    let dim = cfg.params.dim;
    let Some(u1) = &data.u1_physical else {
        return Ok(None);
    };
    let moments = MomentDecomposition::from_profile(u1, dim, cfg.bounds.gamma)?;
    let u0_l2 = match &data.u0_physical {
        Some(u0) => l2_norm(u0, dim)?,
        None => 0.0,
    };
    Ok(Some(BoundInputs {
        moments,
        u1_l2: l2_norm(u1, dim)?,
        u0_l2,
    }))
}

fn growth_criterion(dim: usize) -> u32 {
    match dim {
        1 => 1,
        2 => 2,
        _ => 3,
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Norm trace, growth fits, sandwich ratio and envelopes.
fn growth_run(cfg: &ExperimentConfig, b: &mut Bundle) -> Result<()> {
    let params = cfg.params.build()?;
    let dim = params.dim;
    let data = build_data(cfg)?;
    let quad = cfg.quadrature.build()?;
    let tw = cfg.time;
    let times = geometric_times(tw.t_min, tw.t_max, tw.points_per_decade)?;
    log::info!(
        "norm trace: {} samples over [{}, {}]",
        times.len(),
        tw.t_min,
        tw.t_max
    );
    let trace = norm_trace(&params, &data, &times, &quad, false)?;
    let rate_curve = match dim {
        1 => "norm_over_sqrt_t",
        2 => "norm_over_sqrt_log_t",
        _ => "norm_sq",
    };
    b.plot(PlotSource::Trace(&trace), &["norm", rate_curve])?;

    let inputs = bound_inputs(cfg, &data)?;
    if let Some(inp) = &inputs {
        b.note("moments", inp.moments)?;
        if dim != 2 || trace.times[0] > 1.0 {
            let sandwich = growth::sandwich_report(&trace, &inp.moments, dim)?;
            b.plot(PlotSource::Sandwich(&sandwich), &[])?;
            b.note(
                "sandwich",
                json!({
                    "rate": sandwich.rate,
                    "lower_const": sandwich.lower_const,
                    "upper_const": sandwich.upper_const,
                    "p_abs": sandwich.p_abs,
                    "lower_vacuous": sandwich.lower_vacuous,
                    "stable": sandwich.stable,
                }),
            )?;
            if cfg.preset == Preset::Theorem11 {
                b.check(Check::le(
                    "sandwich max/min of norm/sqrt(t) over the last decade",
                    1,
                    sandwich.upper_const / sandwich.lower_const,
                    growth::STABILITY_RATIO,
                ));
            }
        }
    }

    let window = (trace.times[0], trace.times[trace.len() - 1]);
    match cfg.preset {
        Preset::Theorem11 => {
            let fit = growth::fit_power(&trace, window)?;
            b.note("power_fit", fit)?;
            b.check(Check::within(
                "power-law exponent of the norm",
                1,
                fit.exponent_or_offset,
                0.5,
                0.05,
            ));
            b.check(Check::ge("power-law fit r^2", 1, fit.r_squared, 0.999));
        }
        Preset::Theorem12 => {
            let log = growth::fit_log(&trace, window)?;
            let pow = growth::fit_power(&trace, window)?;
            b.note("log_fit", log)?;
            b.note("power_fit", pow)?;
            b.check(Check::ge("logarithmic fit r^2", 2, log.r_squared, 0.99));
            b.check(Check::gt("logarithmic fit slope a", 2, log.coeff, 0.0));
            b.check(Check::le(
                "competing power-law exponent",
                2,
                pow.exponent_or_offset,
                growth::MIN_POWER_EXPONENT,
            ));
        }
        Preset::Prop41 => prop41_checks(cfg, &params, &trace, inputs.as_ref(), b)?,
        _ => {
            let class = growth::classify_growth(&trace, dim)?;
            b.note("classification", &class)?;
            b.check(Check::equals(
                "classified growth law",
                growth_criterion(dim),
                class.verdict,
                Some(GrowthModel::expected_for(dim)),
            ));
        }
    }

    if let (Some(inp), true) = (&inputs, dim <= 2 && params.mu > 0.0) {
        envelope_checks(cfg, &params, &trace, data.u1_physical.as_ref(), inp, b)?;
    }
    Ok(())
}

fn prop41_checks(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    trace: &NormTrace,
    inputs: Option<&BoundInputs<f64>>,
    b: &mut Bundle,
) -> Result<()> {
    let inp = inputs.ok_or_else(|| anyhow!("prop-4-1 needs data with a physical profile"))?;
    let sinc = cfg.bounds.sinc()?;
    let t_last = trace.times[trace.len() - 1];
    let up = bounds::upper_envelope(
        params,
        &sinc,
        inp.moments.l1_norm,
        inp.u1_l2,
        inp.u0_l2,
        t_last,
    )?;
    let upper_physical = up.value * plancherel_factor::<f64>(params.dim);
    b.note(
        "upper_envelope",
        json!({ "spectral": up.value, "physical": upper_physical, "components": up.components }),
    )?;
    let peak = max_of(trace.norms_sq.iter().copied());
    b.check(Check::le(
        "trace maximum against the upper envelope constant",
        3,
        peak,
        upper_physical,
    ));
    let (lo, hi) = (cfg.time.t_min, cfg.time.t_max);
    let split = if lo < 1e5 && 1e5 < hi {
        1e5
    } else {
        (lo * hi).sqrt()
    };
    let early = max_of(trace.window(lo, split).norms_sq);
    let late = max_of(trace.window(split, hi).norms_sq);
    b.note("trace_split", split)?;
    b.check(Check::le(
        "late/early trace maximum",
        3,
        late / early,
        BOUNDED_DRIFT,
    ));
    Ok(())
}

/// Trace times at which the envelopes are evaluated: one per
/// `points_per_decade / bounds.points_per_decade` samples, from `1e2` on.
fn envelope_times(cfg: &ExperimentConfig, trace: &NormTrace) -> Vec<(f64, f64)> {
    let stride = ((cfg.time.points_per_decade as f64 / cfg.bounds.points_per_decade as f64).round()
        as usize)
        .max(1);
    let start = trace
        .times
        .iter()
        .position(|&t| t >= LARGE_TIME)
        .unwrap_or(trace.len());
    let last = trace.len() - 1;
    (start..trace.len())
        .filter(|&i| (i - start) % stride == 0 || i == last)
        .map(|i| (trace.times[i], trace.norms_sq[i]))
        .collect()
}

fn envelope_checks(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    trace: &NormTrace,
    u1: Option<&RadialFunction>,
    inputs: &BoundInputs<f64>,
    b: &mut Bundle,
) -> Result<()> {
    let sinc = cfg.bounds.sinc()?;
    let pf = plancherel_factor::<f64>(params.dim);
    let samples = envelope_times(cfg, trace);
    if samples.is_empty() {
        return Ok(());
    }
    log::info!("envelopes at {} times", samples.len());
    let reports: Vec<EnvelopeReport> = samples
        .par_iter()
        .map(|&(t, norm_sq)| {
            bounds::envelope_report(params, &sinc, u1, inputs, t, Some(norm_sq / pf))
        })
        .collect::<rosenau_core::Result<_>>()?;

    b.write("bounds_vs_t.csv", |w| {
        writeln!(w, "t,lower,two_norm_sq,norm_sq,upper")?;
        for r in &reports {
            let m = r.measured.unwrap_or(f64::NAN);
            let lower = r.lower_1d.or(r.lower_2d).unwrap_or(f64::NAN);
            let upper = r.upper.unwrap_or(f64::NAN);
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(r.t),
                fmt17(lower),
                fmt17(2.0 * m),
                fmt17(m),
                fmt17(upper)
            )?;
        }
        Ok(())
    })?;
    b.write("bounds_components.csv", |w| {
        writeln!(w, "t,component,value,provenance")?;
        for r in &reports {
            for (name, c) in &r.components {
                let prov = serde_json::to_value(c.provenance)?;
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt17(r.t),
                    name,
                    fmt17(c.value),
                    prov.as_str().unwrap_or("")
                )?;
            }
        }
        Ok(())
    })?;
    b.write("bounds_verdicts.csv", |w| {
        writeln!(w, "t,verdict,lhs,rhs,holds")?;
        for r in &reports {
            for (name, v) in &r.verdicts {
                writeln!(
                    w,
                    "{},\"{}\",{},{},{}",
                    fmt17(r.t),
                    name,
                    fmt17(v.lhs),
                    fmt17(v.rhs),
                    v.holds
                )?;
            }
        }
        Ok(())
    })?;

    // Every verdict name, worst lhs/rhs over the sampled times.
    let mut names: Vec<&String> = reports.iter().flat_map(|r| r.verdicts.keys()).collect();
    names.sort();
    names.dedup();
    for name in names {
        let vs: Vec<_> = reports
            .iter()
            .filter_map(|r| r.verdicts.get(name))
            .collect();
        let worst = max_of(vs.iter().map(|v| v.lhs / v.rhs));
        let mut c = Check::le(
            format!("envelope n={}: {name} (worst lhs/rhs)", params.dim),
            5,
            worst,
            1.0,
        );
        c.passed = vs.iter().all(|v| v.holds);
        b.check(c);
    }
    if params.dim == 2 {
        let t2: Vec<(f64, f64)> = reports
            .iter()
            .filter_map(|r| r.components.get("T2").map(|c| (r.t.ln(), c.value.abs())))
            .collect();
        if t2.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = t2.into_iter().unzip();
            let slope = slope(&x, &y);
            b.note("t2_log_slope", slope)?;
            b.check(Check::within("log-t slope of |T2|", 5, slope, 0.0, 0.05));
        }
        if let (Some(k), Some(cf)) = (
            reports[0].components.get("K0"),
            reports[0].components.get("K0_closed_form"),
        ) {
            b.check(Check::le(
                "K0 quadrature against closed form (relative)",
                5,
                (k.value / cf.value - 1.0).abs(),
                1e-8,
            ));
        }
    }
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Radial and grid energy drift.
fn energy_run(cfg: &ExperimentConfig, b: &mut Bundle) -> Result<()> {
    let params = cfg.params.build()?;
    let data = build_data(cfg)?;
    let e = &cfg.energy;
    let radial = |t: f64| {
        total_energy(
            &params,
            EnergyState::Radial {
                data: &data,
                t,
                rel_tol: e.rel_tol,
            },
        )
    };
    let e0 = radial(0.0)?;
    let rows: Vec<(f64, f64, f64)> = e
        .times
        .par_iter()
        .map(|&t| radial(t).map(|r| (t, r.total, r.drift_from(&e0))))
        .collect::<rosenau_core::Result<_>>()?;
    let radial_max = max_of(rows.iter().map(|r| r.2));
    b.note("radial_energy_at_zero", e0)?;
    b.check(Check::le(
        "max relative energy drift, radial quadrature",
        4,
        radial_max,
        1e-10,
    ));

    let u1 = data
        .u1_physical
        .as_ref()
        .ok_or_else(|| anyhow!("the grid energy check needs data with a physical profile"))?;
    let dim = params.dim;
    let field1 = GridField::from_radial(dim, e.grid_box, e.grid_samples, |r| u1.value(r))?;
    let field0 = GridField::zeros(dim, e.grid_box, e.grid_samples)?;
    let t_valid = field1.validity_time(&params);
    let g0 = grid::grid_energy(&params, &field0, &field1)?;
    let grid_times: Vec<f64> = [0.01, 0.1, 0.5, 1.0].iter().map(|s| s * t_valid).collect();
    let mut grid_rows = Vec::new();
    for &t in &grid_times {
        let (u, ut) = grid::evolve_grid_state(&params, &field0, &field1, t)?;
        let g = grid::grid_energy(&params, &u, &ut)?;
        grid_rows.push((t, g.total, g.drift_from(&g0)));
    }
    let grid_max = max_of(grid_rows.iter().map(|r| r.2));
    b.note("grid_validity_time", t_valid)?;
    b.check(Check::le(
        "max relative energy drift, grid path",
        4,
        grid_max,
        1e-8,
    ));
    b.write("energy_vs_t.csv", |w| {
        writeln!(w, "path,t,energy,drift")?;
        writeln!(
            w,
            "radial,{},{},{}",
            fmt17(0.0),
            fmt17(e0.total),
            fmt17(0.0)
        )?;
        for (t, en, d) in &rows {
            writeln!(w, "radial,{},{},{}", fmt17(*t), fmt17(*en), fmt17(*d))?;
        }
        writeln!(w, "grid,{},{},{}", fmt17(0.0), fmt17(g0.total), fmt17(0.0))?;
        for (t, en, d) in &grid_rows {
            writeln!(w, "grid,{},{},{}", fmt17(*t), fmt17(*en), fmt17(*d))?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Hardy-type quotient scans and the corrected energy identity.
fn hardy_run(cfg: &ExperimentConfig, b: &mut Bundle) -> Result<()> {
    let params = cfg.params.build()?;
    let r_grid: Vec<f64> = cfg.hardy.log_r.iter().map(|x| x.exp()).collect();

    let a1 = hardy::blowup_scan(&WeightFunction::new(WeightKind::A1Weight, 2)?, &r_grid)?;
    b.plot(PlotSource::Quotient(&a1.trace), &["quotient"])?;
    b.note("a1_scan", json!({ "family": a1.family, "verdict": a1.verdict, "linear_fit": a1.linear_fit, "power_fit": a1.power_fit }))?;
    b.check(Check::equals(
        "A1-weight quotient verdict",
        8,
        a1.verdict,
        BlowupVerdict::Unbounded(hardy::UnboundedReason::LinearInLogR),
    ));
    let lin = a1
        .linear_fit
        .ok_or_else(|| anyhow!("A1 scan produced no fit"))?;
    b.check(Check::gt(
        "A1-weight quotient slope against log R",
        8,
        lin.slope,
        0.0,
    ));
    b.check(Check::ge(
        "A1-weight linear fit r^2",
        8,
        lin.r_squared,
        hardy::BLOWUP_R2,
    ));

    let plain = hardy::blowup_scan(&WeightFunction::new(WeightKind::PlainAbs, 3)?, &r_grid)?;
    let q = &plain.trace.quotients;
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    let spread = (max_of(q.iter().copied()) + max_of(q.iter().map(|v| -v))) / mean;
    b.note("plain_abs_quotient_mean", mean)?;
    b.check(Check::le(
        "plain |x| quotient relative spread over dilations (n=3)",
        8,
        spread,
        1e-9,
    ));

    let rellich = hardy::rellich_quotient(&RadialFunction::gaussian(1.0, 1.0)?, 5)?;
    let cap = 0.64 * 1.01;
    b.check(Check::le(
        "Rellich quotient of the Gaussian (n=5)",
        8,
        rellich,
        cap,
    ));

    let data = build_data(cfg)?;
    let rows: Vec<_> = cfg
        .hardy
        .identity_times
        .par_iter()
        .map(|&t| hardy::energy_identity_check(&params, &data, t))
        .collect::<rosenau_core::Result<_>>()?;
    b.write("energy_identity.csv", |w| {
        writeln!(w, "t,lhs,rhs,residual")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(r.t),
                fmt17(r.lhs),
                fmt17(r.rhs),
                fmt17(r.residual)
            )?;
        }
        Ok(())
    })?;
    b.check(Check::le(
        "energy identity residual",
        8,
        max_of(rows.iter().map(|r| r.residual)),
        1e-8,
    ));
    Ok(())
}

/// Multiplier scan, Sobolev equivalence and dissipativity.
fn wellposed_run(cfg: &ExperimentConfig, b: &mut Bundle) -> Result<()> {
    let params = cfg.params.build()?;
    let scan = wellposed::h_ratio_scan(&params, &wellposed::default_r_grid())?;
    b.plot(PlotSource::Multiplier(&scan), &[])?;
    b.note(
        "h_ratio",
        json!({
            "m_lower": scan.m_lower,
            "m_upper": scan.m_upper,
            "limits": scan.limits,
            "c0_stated": scan.c0_stated,
            "c0_limit": scan.c0_limit,
        }),
    )?;
    let tol = wellposed::ENDPOINT_TOL;
    b.check(Check::within(
        "h_ratio at the smallest radius against 1",
        7,
        scan.limits.0,
        1.0,
        tol,
    ));
    b.check(Check::within(
        "h_ratio at the largest radius against (mu^2+2 kappa mu)/(1+delta)",
        7,
        scan.limits.1,
        scan.c0_stated,
        tol * scan.c0_stated,
    ));
    b.check(Check::within(
        "h_ratio at the largest radius against mu^2/delta",
        7,
        scan.limits.1,
        scan.c0_limit,
        tol * scan.c0_limit,
    ));
    b.check(Check::gt("grid infimum M of h_ratio", 7, scan.m_lower, 0.0));

    let sob = wellposed::sobolev_equivalence_check(&params, &RadialFunction::gaussian(1.0, 1.0)?)?;
    b.note("sobolev_equivalence", sob)?;
    b.check(Check::equals(
        "Sobolev norm equivalence on a Gaussian",
        7,
        sob.holds,
        true,
    ));

    let worst = dissipativity_sweep(&params, 16)?;
    b.check(Check::le(
        "dissipativity residual over random profiles",
        7,
        worst,
        1e-10,
    ));
    Ok(())
}

/// Largest dissipativity residual over `count` seeded random pairs of
/// complex polynomial profiles vanishing at `r = 4`.
pub fn dissipativity_sweep(params: &ModelParams, count: usize) -> Result<f64> {
    const R_MAX: f64 = 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(DISSIPATIVITY_SEED);
    let mut coeffs = || -> Vec<Complex<f64>> {
        (0..4)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };
    let profile = |c: Vec<Complex<f64>>| {
        move |r: f64| {
            let s = (1.0 - r / R_MAX).max(0.0).powi(2);
            c.iter()
                .rev()
                .fold(Complex::new(0.0, 0.0), |acc, &a| acc * r + a)
                * s
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (u, v) = (profile(coeffs()), profile(coeffs()));
        let d = wellposed::dissipativity_residual(params, u, v, R_MAX)?;
        worst = worst.max(d.residual.abs());
    }
    Ok(worst)
}

/// Grid-file data: evolve inside the validity window and track the energy.
fn grid_file_run(cfg: &ExperimentConfig, path: &Path, b: &mut Bundle) -> Result<()> {
    let params = cfg.params.build()?;
    let field1 = GridField::load(path).with_context(|| format!("loading {}", path.display()))?;
    if field1.dim != params.dim {
        bail!(
            "grid file has dimension {} but params.dim = {}",
            field1.dim,
            params.dim
        );
    }
    let field0 = GridField::zeros(field1.dim, field1.box_length, field1.samples_per_axis)?;
    let t_valid = field1.validity_time(&params);
    let times: Vec<f64> =
        geometric_times(cfg.time.t_min, cfg.time.t_max, cfg.time.points_per_decade)?
            .into_iter()
            .filter(|&t| t <= t_valid)
            .collect();
    b.note("grid_validity_time", t_valid)?;
    if times.is_empty() {
        bail!("no sample of the time window lies below the grid validity time {t_valid}");
    }
    let g0 = grid::grid_energy(&params, &field0, &field1)?;
    let mut norms = Vec::with_capacity(times.len());
    let mut energy = Vec::with_capacity(times.len());
    let mut drift = 0.0f64;
    for &t in &times {
        let (u, ut) = grid::evolve_grid_state(&params, &field0, &field1, t)?;
        let g = grid::grid_energy(&params, &u, &ut)?;
        drift = drift.max(g.drift_from(&g0));
        norms.push(u.norm_sq());
        energy.push(g.total);
    }
    let mut trace = NormTrace::from_columns(times, norms)?;
    trace.energy = energy;
    b.plot(PlotSource::Trace(&trace), &["norm"])?;
    b.check(Check::le(
        "max relative energy drift, grid path",
        4,
        drift,
        1e-8,
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors_compare_correctly() {
        assert!(Check::le("a", 1, 1.0, 1.0).passed);
        assert!(!Check::gt("a", 1, 0.0, 0.0).passed);
        assert!(Check::within("a", 1, 0.54, 0.5, 0.05).passed);
        assert!(!Check::within("a", 1, 0.56, 0.5, 0.05).passed);
        assert!(!Check::le("a", 1, f64::NAN, 1.0).passed);
        assert!(Check::equals("a", 1, Some(GrowthModel::Power), Some(GrowthModel::Power)).passed);
    }

    #[test]
    fn dissipativity_sweep_is_exact() {
        let p = ModelParams::unit(2).unwrap();
        assert!(dissipativity_sweep(&p, 4).unwrap() <= 1e-10);
    }

    #[test]
    fn invalid_config_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(Preset::Theorem12);
        cfg.params.dim = 3;
        cfg.output_dir = dir.path().join("out");
        let err = run_experiment(&cfg, 1).unwrap_err();
        assert!(format!("{err:#}").contains("theorem-1-2 requires params.dim = 2"));
        assert!(!cfg.output_dir.exists());
    }

    #[test]
    fn numerical_failure_yields_partial_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::preset(Preset::Custom);
        cfg.output_dir = dir.path().to_path_buf();
        cfg.data = DataSpec::GridFile {
            path: dir.path().join("missing.grid"),
        };
        let report = run_experiment(&cfg, 1).unwrap();
        assert!(report.partial && !report.passed);
        assert_eq!(report.exit_code(), 2);
        let text = fs::read_to_string(dir.path().join("verdict.json")).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["partial"], true);
        assert!(v["error"].as_str().unwrap().contains("missing.grid"));
    }
}
