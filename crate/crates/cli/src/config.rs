//! Experiment configuration: a TOML file with one section per concern.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rosenau_core::model;
use rosenau_core::radial_norm::{QuadMode, RMax};
use rosenau_core::{ModelParams, QuadratureConfig, SincConstants};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// One-dimensional √t growth.
    #[value(name = "theorem-1-1")]
    #[serde(rename = "theorem-1-1")]
    Theorem11,
    /// Two-dimensional √log t growth.
    #[value(name = "theorem-1-2")]
    #[serde(rename = "theorem-1-2")]
    Theorem12,
    /// Boundedness for n >= 3.
    #[value(name = "prop-4-1")]
    #[serde(rename = "prop-4-1")]
    Prop41,
    /// Hardy quotient blow-up and the energy identity.
    HardyFailure,
    /// Multiplier equivalence and dissipativity.
    WellposedCheck,
    /// Conservation of the energy.
    EnergyConservation,
    /// Everything from the file, validated explicitly.
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Theorem11,
        Preset::Theorem12,
        Preset::Prop41,
        Preset::HardyFailure,
        Preset::WellposedCheck,
        Preset::EnergyConservation,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Theorem11 => "theorem-1-1",
            Preset::Theorem12 => "theorem-1-2",
            Preset::Prop41 => "prop-4-1",
            Preset::HardyFailure => "hardy-failure",
            Preset::WellposedCheck => "wellposed-check",
            Preset::EnergyConservation => "energy-conservation",
            Preset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub delta: f64,
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub dim: usize,
}

impl ParamsSection {
    pub fn unit(dim: usize, theta: f64) -> Self {
        ParamsSection {
            delta: 1.0,
            mu: 1.0,
            kappa: 1.0,
            theta,
            dim,
        }
    }

    pub fn build(&self) -> Result<ModelParams> {
        model::ModelParams::new(self.delta, self.mu, self.kappa, self.theta, self.dim)
            .with_context(|| "invalid [params]".to_string())
    }
}

/// Initial-data catalog. All entries have `u₀ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    /// `u₁ = c·exp(-a|x|²)`.
    Gaussian { a: f64, c: f64 },
    /// Smooth bump on `|x| ∈ [r0 - width, r0 + width]`.
    AnnularBump { r0: f64, width: f64 },
    /// `ŵ₁ = amplitude` on `r_lo <= |ξ| <= r_hi`.
    CompactBand {
        r_lo: f64,
        r_hi: f64,
        amplitude: f64,
    },
    /// `u₁` sampled on a periodic grid, in the grid file format.
    GridFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    ExactAdaptive,
    OscillationAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub rel_tol: f64,
    pub points_per_period: usize,
    pub mode: ModeName,
}

impl QuadSection {
    pub fn build(&self) -> Result<QuadratureConfig> {
        let cfg = QuadratureConfig {
            rel_tol: self.rel_tol,
            points_per_period: self.points_per_period,
            r_max: RMax::Auto,
            mode: match self.mode {
                ModeName::ExactAdaptive => QuadMode::ExactAdaptive,
                ModeName::OscillationAveraged => QuadMode::OscillationAveraged,
            },
            spectral: false,
        };
        cfg.validate().context("invalid [quadrature]")?;
        Ok(cfg)
    }
}

/// Envelope evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Moment exponent of the weighted `L¹` norm.
    pub gamma: f64,
    /// Sinc threshold.
    pub delta0: f64,
    /// Envelope samples per decade of the time window.
    pub points_per_decade: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            gamma: 1.0,
            delta0: 0.9,
            points_per_decade: 1,
        }
    }
}

impl BoundsSection {
    pub fn sinc(&self) -> Result<SincConstants> {
        model::SincConstants::new(self.delta0).context("invalid [bounds].delta0")
    }
}

/// Hardy scan settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardySection {
    /// Scan radii `R = e^x` for these exponents.
    pub log_r: Vec<f64>,
    /// Times of the energy identity check.
    pub identity_times: Vec<f64>,
}

impl Default for HardySection {
    fn default() -> Self {
        HardySection {
            log_r: (3..=16).map(f64::from).collect(),
            identity_times: vec![1.0, 10.0, 1e3],
        }
    }
}

/// Energy conservation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub times: Vec<f64>,
    pub rel_tol: f64,
    pub grid_box: f64,
    pub grid_samples: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            times: vec![1.0, 1e3, 1e6],
            rel_tol: 1e-13,
            grid_box: 40.0,
            grid_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub output_dir: PathBuf,
    pub params: ParamsSection,
    pub data: DataSpec,
    pub time: TimeWindow,
    pub quadrature: QuadSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub hardy: HardySection,
    #[serde(default)]
    pub energy: EnergySection,
}

impl ExperimentConfig {
    /// The defaults of a preset.
    pub fn preset(preset: Preset) -> Self {
        let (params, time, mode) = match preset {
            Preset::Theorem11 | Preset::Custom => (
                ParamsSection::unit(1, 2.0),
                TimeWindow {
                    t_min: 1e2,
                    t_max: 1e6,
                    points_per_decade: 12,
                },
                ModeName::ExactAdaptive,
            ),
            Preset::Theorem12 => (
                ParamsSection::unit(2, 2.0),
                TimeWindow {
                    t_min: 1e2,
                    t_max: 1e7,
                    points_per_decade: 12,
                },
                ModeName::OscillationAveraged,
            ),
            Preset::Prop41 => (
                ParamsSection::unit(3, 2.0),
                TimeWindow {
                    t_min: 1e2,
                    t_max: 1e7,
                    points_per_decade: 12,
                },
                ModeName::OscillationAveraged,
            ),
            Preset::HardyFailure => (
                ParamsSection::unit(2, 1.0),
                TimeWindow {
                    t_min: 1e2,
                    t_max: 1e5,
                    points_per_decade: 4,
                },
                ModeName::OscillationAveraged,
            ),
            Preset::WellposedCheck => (
                ParamsSection::unit(3, 2.0),
                TimeWindow {
                    t_min: 1e2,
                    t_max: 1e4,
                    points_per_decade: 4,
                },
                ModeName::OscillationAveraged,
            ),
            Preset::EnergyConservation => (
                ParamsSection::unit(2, 2.0),
                TimeWindow {
                    t_min: 1.0,
                    t_max: 1e6,
                    points_per_decade: 1,
                },
                ModeName::ExactAdaptive,
            ),
        };
        ExperimentConfig {
            preset,
            output_dir: PathBuf::from(format!("out/{}", preset.name())),
            params,
            data: DataSpec::Gaussian { a: 1.0, c: 1.0 },
            time,
            quadrature: QuadSection {
                rel_tol: 1e-6,
                points_per_period: 8,
                mode,
            },
            bounds: BoundsSection::default(),
            hardy: HardySection::default(),
            energy: EnergySection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Checks every invariant; the error names the one violated.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let need = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(anyhow::anyhow!(msg))
            }
        };
        match self.preset {
            Preset::Theorem11 => need(p.dim == 1, format!("preset theorem-1-1 requires params.dim = 1, got {}", p.dim))?,
            Preset::Theorem12 => need(p.dim == 2, format!("preset theorem-1-2 requires params.dim = 2, got {}", p.dim))?,
            Preset::Prop41 => need(p.dim >= 3, format!("preset prop-4-1 requires params.dim >= 3, got {}", p.dim))?,
            Preset::HardyFailure => need(
                p.theta == 1.0 && p.dim == 2,
                format!("preset hardy-failure requires params.theta = 1 and params.dim = 2, got θ = {} and n = {}", p.theta, p.dim),
            )?,
            Preset::WellposedCheck => need(p.mu > 0.0, format!("preset wellposed-check requires params.mu > 0, got {}", p.mu))?,
            Preset::EnergyConservation | Preset::Custom => {}
        }
        p.build()?;
        self.quadrature.build()?;
        self.bounds.sinc()?;
        let t = &self.time;
        need(
            t.t_min > 0.0 && t.t_max > t.t_min && t.t_max.is_finite(),
            format!(
                "time window needs 0 < t_min < t_max, got [{}, {}]",
                t.t_min, t.t_max
            ),
        )?;
        need(
            t.points_per_decade > 0,
            "time.points_per_decade must be positive".into(),
        )?;
        need(
            self.bounds.points_per_decade > 0,
            "bounds.points_per_decade must be positive".into(),
        )?;
        need(
            self.bounds.gamma > 0.0 && self.bounds.gamma <= 1.0,
            format!("bounds.gamma must lie in (0, 1], got {}", self.bounds.gamma),
        )?;
        match &self.data {
            DataSpec::Gaussian { a, c } => need(
                *a > 0.0 && c.is_finite(),
                format!("gaussian data needs a > 0, got a = {a}"),
            )?,
            DataSpec::AnnularBump { r0, width } => need(
                *width > 0.0 && r0 - width >= 0.0,
                format!("annular-bump needs 0 < width <= r0, got r0 = {r0}, width = {width}"),
            )?,
            DataSpec::CompactBand { r_lo, r_hi, .. } => need(
                *r_lo >= 0.0 && r_hi > r_lo,
                format!("compact-band needs 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]"),
            )?,
            DataSpec::GridFile { path } => need(
                self.preset == Preset::Custom,
                format!(
                    "grid-file data ({}) is only supported by the custom preset",
                    path.display()
                ),
            )?,
        }
        if self.preset == Preset::HardyFailure {
            let h = &self.hardy;
            need(
                h.log_r.len() >= 5,
                "hardy.log_r needs at least 5 values".into(),
            )?;
            need(
                h.identity_times.iter().all(|&t| t >= 0.0),
                "hardy.identity_times must be nonnegative".into(),
            )?;
        }
        if self.preset == Preset::EnergyConservation {
            let e = &self.energy;
            need(
                e.rel_tol > 0.0 && e.rel_tol < 1.0,
                format!("energy.rel_tol must lie in (0, 1), got {}", e.rel_tol),
            )?;
            need(
                e.grid_samples >= 8 && e.grid_box > 0.0,
                "energy grid needs box > 0 and >= 8 samples".into(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_round_trips_through_toml() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::preset(p);
            cfg.validate().unwrap();
            let back = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn preset_constraints_are_named_in_errors() {
        let mut cfg = ExperimentConfig::preset(Preset::HardyFailure);
        cfg.params.theta = 2.0;
        let msg = format!("{:#}", cfg.validate().unwrap_err());
        assert!(
            msg.contains("hardy-failure") && msg.contains("theta"),
            "{msg}"
        );
        let mut cfg = ExperimentConfig::preset(Preset::Theorem11);
        cfg.time.t_max = 1.0;
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("t_min < t_max"));
    }

    #[test]
    fn preset_names_match_between_cli_and_toml() {
        use clap::ValueEnum;
        for p in Preset::ALL {
            assert_eq!(p.to_possible_value().unwrap().get_name(), p.name());
            assert_eq!(toml::Value::try_from(p).unwrap().as_str(), Some(p.name()));
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentConfig::preset(Preset::Custom).to_toml().unwrap();
        text.push_str("\nbogus = 1\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
