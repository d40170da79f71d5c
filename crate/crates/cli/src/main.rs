use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rosenau_cli::config::DataSpec;
use rosenau_cli::runner::build_data;
use rosenau_cli::{
    export_plotdata, run_experiment, ExperimentConfig, PlotFormat, PlotSource, Preset,
};
use rosenau_core::bounds::{envelope_report, BoundInputs};
use rosenau_core::growth;
use rosenau_core::hardy::{blowup_scan, WeightFunction, WeightKind};
use rosenau_core::model::plancherel_factor;
use rosenau_core::radial_norm::{fmt17, geometric_times, norm_squared, norm_trace};
use rosenau_core::{grid, wellposed, GridField, MomentDecomposition, RadialFunction};

/// Growth experiments for the generalized Rosenau equation.
#[derive(Debug, Parser)]
#[command(name = "rosenau", version, about)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Preset supplying defaults; alone, runs it.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the configuration of the preset (default `custom`) and exit.
    #[arg(long)]
    print_default_config: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment configuration file.
    Run {
        /// TOML configuration file.
        config: PathBuf,
    },
    /// Tabulate f, f′ and f″ as CSV.
    Dispersion {
        #[command(flatten)]
        model: ModelArgs,
        /// Smallest radius |ξ|.
        #[arg(long, default_value_t = 1e-3)]
        r_min: f64,
        /// Largest radius |ξ|.
        #[arg(long, default_value_t = 1e3)]
        r_max: f64,
        /// Log-spaced rows.
        #[arg(long, default_value_t = 121)]
        points: usize,
    },
    /// Evolve radial data to the given times, or a grid file to one time.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        /// Times; repeat or separate by commas.
        #[arg(long, required = true, value_delimiter = ',')]
        t: Vec<f64>,
        /// Grid file holding u₁ (u₀ = 0).
        #[arg(long, requires = "grid_out")]
        grid_in: Option<PathBuf>,
        /// Where to save u(t) of the grid evolution.
        #[arg(long, requires = "grid_in")]
        grid_out: Option<PathBuf>,
    },
    /// Norm trace with growth fits and sandwich ratio.
    NormGrowth {
        #[command(flatten)]
        model: ModelArgs,
        /// First time of the trace.
        #[arg(long)]
        t_min: Option<f64>,
        /// Last time of the trace.
        #[arg(long)]
        t_max: Option<f64>,
        /// Geometric sampling density.
        #[arg(long)]
        points_per_decade: Option<usize>,
    },
    /// Envelope report at the given times (t >= 100), as JSON.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        /// Times; repeat or separate by commas.
        #[arg(long, required = true, value_delimiter = ',')]
        t: Vec<f64>,
    },
    /// Hardy-type quotient scan over R = e^x, as JSON.
    Hardy {
        /// Weight of the inequality; abs-squared scans the Rellich quotient.
        #[arg(long, value_enum, default_value_t = Weight::A1)]
        weight: Weight,
        /// Space dimension n.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Smallest log R.
        #[arg(long, default_value_t = 3.0)]
        log_r_min: f64,
        /// Largest log R.
        #[arg(long, default_value_t = 16.0)]
        log_r_max: f64,
        /// Evenly spaced values of log R.
        #[arg(long, default_value_t = 14)]
        points: usize,
    },
    /// Multiplier ratio scan, as JSON.
    Wellposed {
        #[command(flatten)]
        model: ModelArgs,
    },
}

/// Overrides of the preset's model and Gaussian data.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Space dimension n.
    #[arg(long)]
    dim: Option<usize>,
    /// Order θ of the δ|ξ|^{2θ} term.
    #[arg(long)]
    theta: Option<f64>,
    /// Coefficient δ > 0.
    #[arg(long)]
    delta: Option<f64>,
    /// Coefficient μ >= 0 of the |ξ|⁴ term.
    #[arg(long)]
    mu: Option<f64>,
    /// Coefficient κ > 0 of the |ξ|² term.
    #[arg(long)]
    kappa: Option<f64>,
    /// Gaussian rate of u₁ = c·exp(-a|x|²).
    #[arg(long)]
    a: Option<f64>,
    /// Gaussian amplitude of u₁.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Weight {
    A1,
    AbsLog,
    PlainAbs,
    One,
    AbsSquared,
}

impl Weight {
    fn kind(self) -> WeightKind {
        match self {
            Weight::A1 => WeightKind::A1Weight,
            Weight::AbsLog => WeightKind::AbsLogWeight,
            Weight::PlainAbs => WeightKind::PlainAbs,
            Weight::One => WeightKind::ConstantOne,
            Weight::AbsSquared => WeightKind::AbsSquared,
        }
    }
}

impl ModelArgs {
    fn apply(&self, preset: Option<Preset>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::preset(preset.unwrap_or(Preset::Custom));
        let p = &mut cfg.params;
        p.dim = self.dim.unwrap_or(p.dim);
        p.theta = self.theta.unwrap_or(p.theta);
        p.delta = self.delta.unwrap_or(p.delta);
        p.mu = self.mu.unwrap_or(p.mu);
        p.kappa = self.kappa.unwrap_or(p.kappa);
        if let DataSpec::Gaussian { a, c } = &mut cfg.data {
            *a = self.a.unwrap_or(*a);
            *c = self.c.unwrap_or(*c);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if cli.print_default_config {
        stdout(&ExperimentConfig::preset(cli.preset.unwrap_or(Preset::Custom)).to_toml()?)?;
        return Ok(0);
    }
    let Some(command) = cli.command else {
        let Some(preset) = cli.preset else {
            bail!("nothing to do: give a subcommand, --preset, or --print-default-config (see --help)");
        };
        let mut cfg = ExperimentConfig::preset(preset);
        if let Some(out) = cli.out {
            cfg.output_dir = out;
        }
        return run(&cfg, threads);
    };
    if let Command::Run { config } = &command {
        let mut cfg = ExperimentConfig::load(config)?;
        if let Some(out) = cli.out {
            cfg.output_dir = out;
        }
        return run(&cfg, threads);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()?
        .install(|| tool(command, cli.preset, cli.out.as_deref()))?;
    Ok(0)
}

fn run(cfg: &ExperimentConfig, threads: usize) -> Result<u8> {
    let report = run_experiment(cfg, threads)?;
    let mut text = String::new();
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!(
            "{mark} [{}] {}: observed {}\n",
            c.criterion, c.name, c.observed
        ));
    }
    text.push_str(&format!(
        "verdict written to {}\n",
        cfg.output_dir.join("verdict.json").display()
    ));
    stdout(&text)?;
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    Ok(report.exit_code() as u8)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    stdout(&text)
}

/// Writes to stdout; a closed pipe ends output quietly.
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn tool(command: Command, preset: Option<Preset>, out: Option<&Path>) -> Result<()> {
    match command {
        Command::Run { .. } => unreachable!("handled by dispatch"),
        Command::Dispersion {
            model,
            r_min,
            r_max,
            points,
        } => {
            let params = model.apply(preset)?.params.build()?;
            if !(r_min > 0.0 && r_max > r_min) || points < 2 {
                bail!("dispersion needs 0 < r_min < r_max and at least 2 points");
            }
            let mut body = String::from("r,f,f_prime,f_second\n");
            for i in 0..points {
                let r = r_min * (r_max / r_min).powf(i as f64 / (points - 1) as f64);
                let (d1, d2) = params.dispersion_derivatives(r)?;
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt17(r),
                    fmt17(params.eval_dispersion(r)?),
                    fmt17(d1),
                    fmt17(d2)
                ));
            }
            emit(out, "dispersion.csv", &body)
        }
        Command::Evolve {
            model,
            t,
            grid_in,
            grid_out,
        } => {
            let cfg = model.apply(preset)?;
            let params = cfg.params.build()?;
            if let (Some(src), Some(dst)) = (grid_in, grid_out) {
                let [t] = t[..] else {
                    bail!("grid evolution takes exactly one time")
                };
                let field1 =
                    GridField::load(&src).with_context(|| format!("loading {}", src.display()))?;
                let field0 =
                    GridField::zeros(field1.dim, field1.box_length, field1.samples_per_axis)?;
                let limit = field1.validity_time(&params);
                if t > limit {
                    log::warn!("t = {t} exceeds the grid validity time {limit}");
                }
                grid::evolve_grid(&params, &field0, &field1, t)?.save(&dst)?;
                return Ok(());
            }
            let mut times = t;
            times.sort_by(f64::total_cmp);
            times.dedup();
            let data = build_data(&cfg)?;
            let trace = norm_trace(&params, &data, &times, &cfg.quadrature.build()?, true)?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            emit(out, "norm_vs_t.csv", &String::from_utf8(buf)?)
        }
        Command::NormGrowth {
            model,
            t_min,
            t_max,
            points_per_decade,
        } => {
            let mut cfg = model.apply(preset)?;
            cfg.time.t_min = t_min.unwrap_or(cfg.time.t_min);
            cfg.time.t_max = t_max.unwrap_or(cfg.time.t_max);
            cfg.time.points_per_decade = points_per_decade.unwrap_or(cfg.time.points_per_decade);
            cfg.validate()?;
            let params = cfg.params.build()?;
            let data = build_data(&cfg)?;
            let times =
                geometric_times(cfg.time.t_min, cfg.time.t_max, cfg.time.points_per_decade)?;
            let trace = norm_trace(&params, &data, &times, &cfg.quadrature.build()?, false)?;
            let class = growth::classify_growth(&trace, params.dim)?;
            let sandwich = match &data.u1_physical {
                Some(u1) => Some(growth::sandwich_report(
                    &trace,
                    &MomentDecomposition::from_profile(u1, params.dim, cfg.bounds.gamma)?,
                    params.dim,
                )?),
                None => None,
            };
            if let Some(dir) = out {
                export_plotdata(PlotSource::Trace(&trace), &["norm"], PlotFormat::Csv, dir)?;
                if let Some(s) = &sandwich {
                    export_plotdata(PlotSource::Sandwich(s), &[], PlotFormat::Csv, dir)?;
                }
            }
            print_json(&serde_json::json!({
                "classification": class,
                "sandwich": sandwich.map(|s| serde_json::json!({
                    "rate": s.rate, "lower_const": s.lower_const, "upper_const": s.upper_const, "stable": s.stable,
                })),
            }))
        }
        Command::Bounds { model, t } => {
            let cfg = model.apply(preset)?;
            let params = cfg.params.build()?;
            let data = build_data(&cfg)?;
            let Some(u1) = &data.u1_physical else {
                bail!("bounds need data with a physical profile")
            };
            let moments = MomentDecomposition::from_profile(u1, params.dim, cfg.bounds.gamma)?;
            let (u1_l2, _) =
                u1.integrate_radial(params.dim, 2, 0.0, 1e-10, |r| u1.value(r).powi(2))?;
            let inputs = BoundInputs {
                moments,
                u1_l2: u1_l2.sqrt(),
                u0_l2: 0.0,
            };
            let quad = cfg.quadrature.build()?;
            let sinc = cfg.bounds.sinc()?;
            let pf = plancherel_factor::<f64>(params.dim);
            let mut reports = Vec::with_capacity(t.len());
            for &ti in &t {
                let measured = norm_squared(&params, &data, ti, &quad)?.value / pf;
                reports.push(envelope_report(
                    &params,
                    &sinc,
                    Some(u1),
                    &inputs,
                    ti,
                    Some(measured),
                )?);
            }
            print_json(&reports)
        }
        Command::Hardy {
            weight,
            dim,
            log_r_min,
            log_r_max,
            points,
        } => {
            if points < 2 {
                bail!("hardy needs at least 2 points");
            }
            let grid: Vec<f64> = (0..points)
                .map(|i| {
                    (log_r_min + (log_r_max - log_r_min) * i as f64 / (points - 1) as f64).exp()
                })
                .collect();
            let scan = blowup_scan::<f64>(&WeightFunction::new(weight.kind(), dim)?, &grid)?;
            if let Some(dir) = out {
                if !scan.trace.family_param.is_empty() {
                    export_plotdata(
                        PlotSource::Quotient(&scan.trace),
                        &["quotient"],
                        PlotFormat::Csv,
                        dir,
                    )?;
                }
            }
            print_json(&scan)
        }
        Command::Wellposed { model } => {
            let params = model.apply(preset)?.params.build()?;
            let scan = wellposed::h_ratio_scan(&params, &wellposed::default_r_grid())?;
            let sob = wellposed::sobolev_equivalence_check(
                &params,
                &RadialFunction::gaussian(1.0, 1.0)?,
            )?;
            if let Some(dir) = out {
                export_plotdata(PlotSource::Multiplier(&scan), &[], PlotFormat::Csv, dir)?;
            }
            print_json(&serde_json::json!({
                "m_lower": scan.m_lower,
                "m_upper": scan.m_upper,
                "limits": scan.limits,
                "c0_stated": scan.c0_stated,
                "c0_limit": scan.c0_limit,
                "small_end_ok": scan.small_end_ok,
                "large_end_matches_stated": scan.large_end_matches_stated,
                "large_end_matches_limit": scan.large_end_matches_limit,
                "sobolev_equivalence": sob,
            }))
        }
    }
}

/// Writes `body` to `dir/name` when an output directory is given, else to stdout.
fn emit(out: Option<&Path>, name: &str, body: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), body)?;
        }
        None => stdout(body)?,
    }
    Ok(())
}
