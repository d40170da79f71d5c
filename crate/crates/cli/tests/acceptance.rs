//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion fails for a reason other than the known
//! defect listed in `EXPECTED_FAILURES`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rosenau_cli::runner::Check;
use rosenau_cli::{run_experiment, ExperimentConfig, Preset, VerdictReport};
use rosenau_core::bounds::weighted_gaussian_constant;
use rosenau_core::evolution::multipliers;
use rosenau_core::model::{plancherel_factor, unit_sphere_area};
use rosenau_core::radial_norm::norm_squared;
use rosenau_core::{grid, GridField, ModelParams, QuadratureConfig, RadialInitialData};

/// Checks that fail by construction: the stated large-r limit of the
/// multiplier ratio is `(μ²+2κμ)/(1+δ)`, but the ratio tends to `μ²/δ`.
const EXPECTED_FAILURES: &[&str] =
    &["h_ratio at the largest radius against (mu^2+2 kappa mu)/(1+delta)"];

struct Line {
    criterion: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    /// Names of failed checks.
    failures: Vec<String>,
}

impl Line {
    fn from_checks(criterion: u32, title: &'static str, checks: &[&Check], extra: &str) -> Line {
        let failures: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect();
        let mut detail: Vec<String> = checks
            .iter()
            .map(|c| format!("{} = {}", c.name, c.observed))
            .collect();
        if !extra.is_empty() {
            detail.push(extra.to_string());
        }
        Line {
            criterion,
            title,
            passed: failures.is_empty() && !checks.is_empty(),
            detail: detail.join("; "),
            failures,
        }
    }

    fn manual(criterion: u32, title: &'static str, results: Vec<(String, bool)>) -> Line {
        let failures = results
            .iter()
            .filter(|r| !r.1)
            .map(|r| r.0.clone())
            .collect::<Vec<_>>();
        let detail = results
            .iter()
            .map(|r| r.0.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Line {
            criterion,
            title,
            passed: failures.is_empty(),
            detail,
            failures,
        }
    }
}

fn run_preset(preset: Preset, threads: usize, dir: &Path) -> (VerdictReport, f64) {
    let mut cfg = ExperimentConfig::preset(preset);
    cfg.output_dir = dir.to_path_buf();
    let start = Instant::now();
    let report = run_experiment(&cfg, threads).expect("preset configuration is valid");
    (report, start.elapsed().as_secs_f64())
}

fn checks_for(report: &VerdictReport, criterion: u32) -> Vec<&Check> {
    report
        .checks
        .iter()
        .filter(|c| c.criterion == criterion)
        .collect()
}

/// All files of a directory, by name.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// Bundle written by a preset at one thread count, with the directory reused.
fn bundle(preset: Preset, threads: usize, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).unwrap();
    }
    run_preset(preset, threads, dir);
    snapshot(dir)
}

/// `(2π)^{-n} ω_n ∫|ŵ(t,r)|² r^{n-1} dr` by composite Simpson on a uniform
/// grid ten times finer than `points_per_period` samples per oscillation.
fn brute_force_norm(params: &ModelParams, data: &RadialInitialData, t: f64, r_max: f64) -> f64 {
    let dim = params.dim;
    let period = 2.0 * PI / (t * params.max_group_velocity(r_max));
    let h_target = period / (10.0 * 8.0);
    let steps = ((r_max / h_target).ceil() as usize).next_multiple_of(2);
    let h = r_max / steps as f64;
    let g = |r: f64| {
        let (c, s) = multipliers(params, t, r);
        let w = data.w0(r) * c + data.w1(r) * s;
        w.norm_sqr() * r.powi(dim as i32 - 1)
    };
    let mut sum = g(0.0) + g(r_max);
    for i in 1..steps {
        sum += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0 * unit_sphere_area::<f64>(dim).unwrap() * plancherel_factor::<f64>(dim)
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().unwrap();
    let dir = |name: &str| root.path().join(name);
    let mut lines = Vec::new();

    let (t11, secs11) = run_preset(Preset::Theorem11, 1, &dir("theorem-1-1"));
    lines.push(Line::from_checks(
        1,
        "1-D growth law",
        &checks_for(&t11, 1),
        &format!("runtime {secs11:.1} s"),
    ));

    let (t12, secs12) = run_preset(Preset::Theorem12, 1, &dir("theorem-1-2"));
    lines.push(Line::from_checks(
        2,
        "2-D growth law",
        &checks_for(&t12, 2),
        &format!("runtime {secs12:.1} s"),
    ));

    let (p41, _) = run_preset(Preset::Prop41, 1, &dir("prop-4-1"));
    lines.push(Line::from_checks(
        3,
        "n >= 3 boundedness",
        &checks_for(&p41, 3),
        "",
    ));

    let (energy, _) = run_preset(Preset::EnergyConservation, 1, &dir("energy-conservation"));
    lines.push(Line::from_checks(
        4,
        "energy conservation",
        &checks_for(&energy, 4),
        "",
    ));

    let k0 = weighted_gaussian_constant(&ModelParams::unit(2).unwrap(), 1.0).unwrap();
    let k0_ok = (k0.bound - 1.5).abs() <= 1e-12 && (k0.value / k0.bound - 1.0).abs() <= 1e-8;
    let k0_check = Check::equals(
        format!(
            "K0 closed form {} and quadrature {} match 1.5",
            k0.bound, k0.value
        ),
        5,
        k0_ok,
        true,
    );
    let mut c5 = checks_for(&t11, 5);
    c5.extend(checks_for(&t12, 5));
    c5.push(&k0_check);
    lines.push(Line::from_checks(5, "bound-chain verification", &c5, ""));

    let sets = [
        (1.0, 1.0, 1.0, 2.0),
        (1.0, 0.0, 1.0, 2.0),
        (0.5, 1.0, 2.0, 1.0),
        (2.0, 0.0, 1.0, 0.5),
        (1.0, 1.0, 0.5, 0.5),
    ];
    let mut c6 = Vec::new();
    for (delta, mu, kappa, theta) in sets {
        let p = ModelParams::new(delta, mu, kappa, theta, 1).unwrap();
        let eps = p.epsilon0();
        let floor = kappa / (2.0 * (mu + kappa).sqrt() * (1.0 + delta).powf(1.5));
        let c = p.fsecond_constant();
        let (mut fp_min, mut ratio_max) = (f64::INFINITY, 0.0f64);
        for i in 0..1000 {
            let r = eps * 10f64.powf(-6.0 * (1.0 - i as f64 / 999.0));
            let (d1, d2) = p.derivs(r);
            fp_min = fp_min.min(d1);
            ratio_max = ratio_max.max(r * d2.abs() / (c * (1.0 + r)));
        }
        let ok = fp_min >= floor
            && ratio_max <= 1.0
            && (p.fprime_lower_bound() - floor).abs() <= 1e-15 * floor;
        c6.push((
            format!("(δ,μ,κ,θ)=({delta},{mu},{kappa},{theta}): min f' {fp_min:.6} >= {floor:.6}, max r|f''|/(C(1+r)) {ratio_max:.4}"),
            ok,
        ));
    }
    lines.push(Line::manual(6, "dispersion constants near the origin", c6));

    let (wp, _) = run_preset(Preset::WellposedCheck, 1, &dir("wellposed-check"));
    lines.push(Line::from_checks(
        7,
        "multiplier equivalence and dissipativity",
        &checks_for(&wp, 7),
        "",
    ));

    let (hardy, _) = run_preset(Preset::HardyFailure, 1, &dir("hardy-failure"));
    lines.push(Line::from_checks(
        8,
        "Hardy-type inequality failure",
        &checks_for(&hardy, 8),
        "",
    ));

    let mut c9 = Vec::new();
    for dim in [1, 2] {
        let p = ModelParams::unit(dim).unwrap();
        let data = RadialInitialData::gaussian_velocity(dim, 1.0, 1.0).unwrap();
        for t in [10.0, 1e3] {
            let quad = norm_squared(&p, &data, t, &QuadratureConfig::default())
                .unwrap()
                .value;
            let brute = brute_force_norm(&p, &data, t, 14.0);
            let rel = (quad / brute - 1.0).abs();
            c9.push((
                format!("n={dim} t={t}: adaptive vs uniform grid {rel:.2e}"),
                rel <= 1e-5,
            ));
        }
    }
    let p2 = ModelParams::unit(2).unwrap();
    let field1 = GridField::from_radial(2, 40.0, 64, |r| (-r * r).exp()).unwrap();
    let field0 = GridField::zeros(2, 40.0, 64).unwrap();
    let grid_norm = grid::evolve_grid(&p2, &field0, &field1, 10.0)
        .unwrap()
        .norm_sq();
    let data2 = RadialInitialData::gaussian_velocity(2, 1.0, 1.0).unwrap();
    let radial_norm = norm_squared(&p2, &data2, 10.0, &QuadratureConfig::default())
        .unwrap()
        .value;
    let rel = (grid_norm / radial_norm - 1.0).abs();
    c9.push((
        format!("grid DFT vs radial at t=10: {rel:.2e}"),
        rel <= 1e-3,
    ));
    lines.push(Line::manual(9, "oracle equivalence", c9));

    let mut c10 = Vec::new();
    for preset in Preset::ALL {
        let d = dir(&format!("determinism-{}", preset.name()));
        let one = bundle(preset, 1, &d);
        let four = bundle(preset, 4, &d);
        c10.push((
            format!("{}: {} files", preset.name(), one.len()),
            one == four,
        ));
    }
    lines.push(Line::manual(10, "determinism across thread counts", c10));

    let mut unexpected = 0;
    for l in &lines {
        let mark = if l.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} [{mark}] {}: {}",
            l.criterion, l.title, l.detail
        );
        for f in &l.failures {
            if EXPECTED_FAILURES.contains(&f.as_str()) {
                println!("    expected failure: {f}");
            } else {
                println!("    unexpected failure: {f}");
                unexpected += 1;
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
