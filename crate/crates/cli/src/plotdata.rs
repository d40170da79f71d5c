//! Plot-ready CSV files: the per-module table plus one two-column file per
//! requested curve.
//!
//! Module tables and their headers:
//!
//! | source          | file                   | header                              |
//! |-----------------|------------------------|-------------------------------------|
//! | norm trace      | `norm_vs_t.csv`        | `t,norm_sq,band_low,band_mid,band_high,energy` |
//! | sandwich report | `ratio_vs_t.csv`       | `t,norm_over_rate`                  |
//! | quotient trace  | `quotient_vs_logR.csv` | `log_R,R,quotient,grad_norm_sq`     |
//! | multiplier scan | `h_ratio.csv`          | `r,h_ratio`                         |
//!
//! A curve `name` is written to `curve_<name>.csv` with header `x,y` named
//! after its axes (for example `t,norm`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rosenau_core::radial_norm::fmt17;
use rosenau_core::{MultiplierScan, NormTrace, QuotientTrace, SandwichReport};

/// Anything with plot data.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Trace(&'a NormTrace),
    Sandwich(&'a SandwichReport),
    Quotient(&'a QuotientTrace),
    Multiplier(&'a MultiplierScan),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlotFormat {
    #[default]
    Csv,
}

struct Curve {
    x_name: &'static str,
    y_name: &'static str,
    points: Vec<(f64, f64)>,
}

impl<'a> PlotSource<'a> {
    pub fn kind(&self) -> &'static str {
        match self {
            PlotSource::Trace(_) => "norm trace",
            PlotSource::Sandwich(_) => "sandwich report",
            PlotSource::Quotient(_) => "quotient trace",
            PlotSource::Multiplier(_) => "multiplier scan",
        }
    }

    pub fn module_file(&self) -> &'static str {
        match self {
            PlotSource::Trace(_) => "norm_vs_t.csv",
            PlotSource::Sandwich(_) => "ratio_vs_t.csv",
            PlotSource::Quotient(_) => "quotient_vs_logR.csv",
            PlotSource::Multiplier(_) => "h_ratio.csv",
        }
    }

    /// Curve names this source provides.
    pub fn curves(&self) -> &'static [&'static str] {
        match self {
            PlotSource::Trace(_) => &[
                "norm_sq",
                "norm",
                "norm_over_sqrt_t",
                "norm_over_sqrt_log_t",
                "band_low",
                "band_mid",
                "band_high",
                "energy",
            ],
            PlotSource::Sandwich(_) => &["norm_over_rate"],
            PlotSource::Quotient(_) => &["quotient", "grad_norm_sq"],
            PlotSource::Multiplier(_) => &["h_ratio"],
        }
    }

    fn len(&self) -> usize {
        match self {
            PlotSource::Trace(t) => t.len(),
            PlotSource::Sandwich(s) => s.ratio_series.len(),
            PlotSource::Quotient(q) => q.family_param.len(),
            PlotSource::Multiplier(m) => m.r_grid.len(),
        }
    }

    fn curve(&self, name: &str) -> Option<Curve> {
        let zip = |x: &[f64], y: Vec<f64>| x.iter().copied().zip(y).collect::<Vec<_>>();
        let curve = |x_name, y_name, points| {
            Some(Curve {
                x_name,
                y_name,
                points,
            })
        };
        match self {
            PlotSource::Trace(tr) => {
                let t = &tr.times;
                let norm: Vec<f64> = tr.norms_sq.iter().map(|v| v.max(0.0).sqrt()).collect();
                match name {
                    "norm_sq" => curve("t", "norm_sq", zip(t, tr.norms_sq.clone())),
                    "norm" => curve("t", "norm", zip(t, norm)),
                    "norm_over_sqrt_t" => curve(
                        "t",
                        "norm_over_sqrt_t",
                        zip(t, norm.iter().zip(t).map(|(n, t)| n / t.sqrt()).collect()),
                    ),
                    "norm_over_sqrt_log_t" => curve(
                        "t",
                        "norm_over_sqrt_log_t",
                        zip(
                            t,
                            norm.iter().zip(t).map(|(n, t)| n / t.ln().sqrt()).collect(),
                        ),
                    ),
                    "band_low" => curve("t", "band_low", zip(t, tr.band_low.clone())),
                    "band_mid" => curve("t", "band_mid", zip(t, tr.band_mid.clone())),
                    "band_high" => curve("t", "band_high", zip(t, tr.band_high.clone())),
                    "energy" => curve("t", "energy", zip(t, tr.energy.clone())),
                    _ => None,
                }
            }
            PlotSource::Sandwich(s) => match name {
                "norm_over_rate" => curve("t", "norm_over_rate", s.ratio_series.clone()),
                _ => None,
            },
            PlotSource::Quotient(q) => {
                let x: Vec<f64> = q.family_param.iter().map(|r| r.ln()).collect();
                match name {
                    "quotient" => curve("log_R", "quotient", zip(&x, q.quotients.clone())),
                    "grad_norm_sq" => curve(
                        "log_R",
                        "grad_norm_sq",
                        zip(&x, q.gradient_norms_sq.clone()),
                    ),
                    _ => None,
                }
            }
            PlotSource::Multiplier(m) => match name {
                "h_ratio" => curve("r", "h_ratio", zip(&m.r_grid, m.h_ratio.clone())),
                _ => None,
            },
        }
    }

    fn write_module<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            PlotSource::Trace(t) => t.write_csv(&mut out)?,
            PlotSource::Sandwich(s) => {
                writeln!(out, "t,norm_over_rate")?;
                for &(t, r) in &s.ratio_series {
                    writeln!(out, "{},{}", fmt17(t), fmt17(r))?;
                }
            }
            PlotSource::Quotient(q) => {
                writeln!(out, "log_R,R,quotient,grad_norm_sq")?;
                for i in 0..q.family_param.len() {
                    let r = q.family_param[i];
                    writeln!(
                        out,
                        "{},{},{},{}",
                        fmt17(r.ln()),
                        fmt17(r),
                        fmt17(q.quotients[i]),
                        fmt17(q.gradient_norms_sq[i])
                    )?;
                }
            }
            PlotSource::Multiplier(m) => m.write_csv(&mut out)?,
        }
        out.flush()?;
        Ok(())
    }
}

/// Writes the module table and the requested curves into `dir` and returns
/// the file names written, in order. Unknown curve names are rejected before
/// anything is written.
pub fn export_plotdata(
    source: PlotSource<'_>,
    curves: &[&str],
    format: PlotFormat,
    dir: &Path,
) -> Result<Vec<String>> {
    let PlotFormat::Csv = format;
    if source.len() == 0 {
        bail!("cannot export an empty {}", source.kind());
    }
    let mut resolved = Vec::with_capacity(curves.len());
    for &name in curves {
        match source.curve(name) {
            Some(c) => resolved.push((name, c)),
            None => bail!(
                "unknown curve '{name}' for a {}; available curves: {}",
                source.kind(),
                source.curves().join(", ")
            ),
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = vec![source.module_file().to_string()];
    source.write_module(create(dir, source.module_file())?)?;
    for (name, c) in resolved {
        let file = format!("curve_{name}.csv");
        let mut out = create(dir, &file)?;
        writeln!(out, "{},{}", c.x_name, c.y_name)?;
        for (x, y) in c.points {
            writeln!(out, "{},{}", fmt17(x), fmt17(y))?;
        }
        out.flush()?;
        written.push(file);
    }
    Ok(written)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> NormTrace {
        NormTrace::from_columns(vec![10.0, 100.0, 1000.0], vec![10.0, 100.0, 1000.0]).unwrap()
    }

    #[test]
    fn writes_module_table_and_curves() {
        let dir = tempfile::tempdir().unwrap();
        let tr = trace();
        let files = export_plotdata(
            PlotSource::Trace(&tr),
            &["norm_over_sqrt_t"],
            PlotFormat::Csv,
            dir.path(),
        )
        .unwrap();
        assert_eq!(files, ["norm_vs_t.csv", "curve_norm_over_sqrt_t.csv"]);
        let table = std::fs::read_to_string(dir.path().join("norm_vs_t.csv")).unwrap();
        assert_eq!(table.lines().next().unwrap().split(',').count(), 6);
        let curve = std::fs::read_to_string(dir.path().join("curve_norm_over_sqrt_t.csv")).unwrap();
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(lines[0], "t,norm_over_sqrt_t");
        for line in &lines[1..] {
            let y: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((y - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_curve_lists_the_available_ones() {
        let dir = tempfile::tempdir().unwrap();
        let tr = trace();
        let err = export_plotdata(
            PlotSource::Trace(&tr),
            &["bogus"],
            PlotFormat::Csv,
            dir.path(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("bogus") && msg.contains("norm_over_sqrt_t"),
            "{msg}"
        );
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let tr = NormTrace::from_columns(vec![], vec![]).unwrap();
        assert!(export_plotdata(PlotSource::Trace(&tr), &[], PlotFormat::Csv, dir.path()).is_err());
    }
}
