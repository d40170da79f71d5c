//! `‖u(t)‖²` of radial solutions as a one-dimensional oscillatory integral,
//! its frequency-band decomposition, and a stationary-phase-aware averaged
//! evaluation for large times.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{DecayClass, RadialInitialData};
use crate::error::{Error, Result};
use crate::evolution::{evolve_mode, total_energy, EnergyState, ModePair};
use crate::model::{
    band_boundaries, plancherel_factor, unit_sphere_area, ModelParams, SincConstants,
};
use crate::quadrature::{integrate, merge_breakpoints, phase_breakpoints, QuadOptions};
use crate::scalar::{cst, from_usize, Real};
use crate::special::{gamma, gaussian_moment_tail};

/// Samples per GK15 panel; a panel may span `GK_POINTS / points_per_period`
/// oscillation periods.
const GK_POINTS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMode {
    ExactAdaptive,
    OscillationAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RMax<T> {
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig<T> {
    pub rel_tol: T,
    pub points_per_period: usize,
    pub r_max: RMax<T>,
    pub mode: QuadMode,
    /// Report spectral-side `‖ŵ‖²` instead of the physical `‖u‖²`.
    pub spectral: bool,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: cst(1e-6),
            points_per_period: 8,
            r_max: RMax::Auto,
            mode: QuadMode::ExactAdaptive,
            spectral: false,
        }
    }
}

impl<T: Real> QuadratureConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.rel_tol <= cst(1e-2)) {
            return Err(Error::Domain(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.points_per_period < 4 {
            return Err(Error::Domain(format!(
                "points_per_period must be at least 4, got {}",
                self.points_per_period
            )));
        }
        if let RMax::Fixed(r) = self.r_max {
            if !(r > T::zero() && r.is_finite()) {
                return Err(Error::Domain(format!("r_max must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_mode(mut self, mode: QuadMode) -> Self {
        self.mode = mode;
        self
    }
}

/// What a truncated tail must bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TailKind {
    Norm,
    Energy,
}

/// Partition of `[0, r_max]` for a radial integral at time `t`.
#[derive(Debug, Clone)]
pub(crate) struct RadialPlan<T> {
    pub points: Vec<T>,
    pub r_max: T,
    /// Bound on `∫_{r_max}^∞` of the integrand without `ω_n` and Plancherel factors.
    pub tail: T,
}

/// Tail bound of `∫_R^∞ |cos(tf)ŵ₀ + sin(tf)/f·ŵ₁|² r^{n-1} dr` (norm) or of the
/// doubled energy density (energy) under a Gaussian envelope `A·exp(-a r²)`.
fn gaussian_tail<T: Real>(
    params: &ModelParams<T>,
    kind: TailKind,
    amp: T,
    rate: T,
    t: T,
    r: T,
) -> Option<T> {
    let n1 = from_usize::<T>(params.dim - 1);
    let b = cst::<T>(2.0) * rate;
    let a2 = amp * amp;
    let two = cst::<T>(2.0);
    match kind {
        TailKind::Norm => {
            let base = gaussian_moment_tail(n1, b, r)?;
            // |sin(tf)/f|² <= t², and for r >= 1 also <= (1+δ)/μ (μ > 0) or (1+δ)r²/κ.
            let prop = if r >= T::one() && params.mu > T::zero() {
                base * ((T::one() + params.delta) / params.mu).min(t * t)
            } else if r >= T::one() {
                let poly = gaussian_moment_tail(n1 + two, b, r)? * (T::one() + params.delta)
                    / params.kappa;
                poly.min(base * t * t)
            } else {
                base * t * t
            };
            Some(two * a2 * (base + prop))
        }
        TailKind::Energy => {
            // Per-mode energy is conserved: bound by the t = 0 density, r >= 1.
            if r < T::one() {
                return None;
            }
            let m4 = gaussian_moment_tail(n1 + cst(4.0), b, r)?;
            let c = T::one() + params.delta + params.mu + params.kappa;
            Some(a2 * c * m4)
        }
    }
}

/// Rough size of the envelope integral, for turning a relative tolerance into
/// an initial truncation radius.
fn envelope_mass<T: Real>(dim: usize, amp: T, rate: T) -> T {
    let k = from_usize::<T>(dim) * cst(0.5);
    amp * amp * gamma(k) / (cst::<T>(2.0) * (cst::<T>(2.0) * rate).powf(k))
}

fn initial_r_max<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    kind: TailKind,
    t: T,
    rel_tol: T,
    fixed: RMax<T>,
) -> Result<(T, T)> {
    match (fixed, data.decay) {
        (_, DecayClass::CompactBand { r_hi, .. }) => {
            let r = match fixed {
                RMax::Fixed(r) if r < r_hi => {
                    return Err(Error::UncertifiedTail(format!(
                        "fixed r_max {r} cuts into the band ending at {r_hi}"
                    )))
                }
                _ => r_hi,
            };
            Ok((r, T::zero()))
        }
        (_, DecayClass::Generic) => Err(Error::UncertifiedTail(format!(
            "data '{}' has no decay certificate; the truncated tail cannot be bounded",
            data.label
        ))),
        (RMax::Fixed(r), DecayClass::GaussianType { amplitude, rate }) => {
            let tail = gaussian_tail(params, kind, amplitude, rate, t, r).ok_or_else(|| {
                Error::UncertifiedTail(format!("r_max = {r} too small for a tail bound"))
            })?;
            Ok((r, tail))
        }
        (RMax::Auto, DecayClass::GaussianType { amplitude, rate }) => {
            let target = rel_tol * cst(1e-3) * envelope_mass(params.dim, amplitude, rate);
            let mut r = T::one().max(cst::<T>(3.0) / (cst::<T>(2.0) * rate).sqrt());
            for _ in 0..200 {
                if let Some(tail) = gaussian_tail(params, kind, amplitude, rate, t, r) {
                    if tail <= target {
                        return Ok((r, tail));
                    }
                }
                r *= cst(1.25);
            }
            Err(Error::UncertifiedTail(
                "Gaussian tail bound did not converge".into(),
            ))
        }
    }
}

/// Phase-resolved breakpoints on `[0, r_max]` plus the profile kinks and
/// any requested split points.
pub(crate) fn plan_points<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    points_per_period: usize,
    r_lo: T,
    r_max: T,
    extra: &[T],
) -> Vec<T> {
    let max_step = T::PI() * cst(GK_POINTS) / from_usize::<T>(points_per_period);
    let max_width = (data.scale * cst(0.25))
        .min((r_max - r_lo) / cst(32.0))
        .max(T::epsilon());
    let mut pts = phase_breakpoints(r_lo, r_max, |r| t * params.f(r), max_step, max_width);
    pts.extend(data.kinks().into_iter().filter(|&k| k > r_lo && k < r_max));
    pts.extend(extra.iter().copied().filter(|&k| k > r_lo && k < r_max));
    merge_breakpoints(pts)
}

pub(crate) fn radial_breakpoints<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    rel_tol: T,
    points_per_period: usize,
    extra_moment: T,
) -> Result<RadialPlan<T>> {
    let kind = if extra_moment > T::zero() {
        TailKind::Energy
    } else {
        TailKind::Norm
    };
    let (r_max, tail) = initial_r_max(params, data, kind, t, rel_tol, RMax::Auto)?;
    let points = plan_points(params, data, t, points_per_period, T::zero(), r_max, &[]);
    Ok(RadialPlan {
        points,
        r_max,
        tail,
    })
}

/// `|cos(tf)ŵ₀ + sin(tf)/f·ŵ₁|²` at radius `r`.
#[inline]
fn solution_sq<T: Real>(params: &ModelParams<T>, data: &RadialInitialData<T>, t: T, r: T) -> T {
    let mode = ModePair {
        w0: data.w0(r),
        w1: data.w1(r),
        xi_norm: r,
    };
    evolve_mode(params, &mode, t).0.norm_sqr()
}

/// Result of one norm evaluation. Values are physical-side unless the
/// configuration asked for spectral ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate<T> {
    pub t: T,
    pub value: T,
    /// Estimated absolute error, including the truncated tail.
    pub error: T,
    /// Contributions of `[0, β(t)]`, `[β(t), s]`, `[s, ∞)`; everything sits in
    /// the first entry when `t <= e`.
    pub bands: [T; 3],
    pub r_max: T,
    pub tail_bound: T,
    pub panels: usize,
    pub mode: QuadMode,
    /// Bound on the discarded oscillatory part (averaged mode only).
    pub remainder: T,
}

/// Mid/high split point per dimension: `γ(t)` in one dimension, 1 otherwise.
pub fn band_split_point<T: Real>(params: &ModelParams<T>, t: T) -> Result<(T, T)> {
    let b = band_boundaries(params, &SincConstants::default(), t)?;
    let s = if params.dim == 1 {
        b.gamma_band
    } else {
        T::one()
    };
    Ok((b.beta, s))
}

fn output_scale<T: Real>(params: &ModelParams<T>, cfg: &QuadratureConfig<T>) -> Result<T> {
    let omega = unit_sphere_area::<T>(params.dim)?;
    Ok(if cfg.spectral {
        omega
    } else {
        omega * plancherel_factor::<T>(params.dim)
    })
}

fn exact_norm<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    cfg: &QuadratureConfig<T>,
) -> Result<NormEstimate<T>> {
    let n = params.dim as i32;
    let split = if t > T::E() {
        Some(band_split_point(params, t)?)
    } else {
        None
    };
    let extra: Vec<T> = split.map(|(b, s)| vec![b, s]).unwrap_or_default();
    let scale = output_scale(params, cfg)?;
    let (mut r_max, mut tail) =
        initial_r_max(params, data, TailKind::Norm, t, cfg.rel_tol, cfg.r_max)?;
    for _ in 0..40 {
        let points = plan_points(
            params,
            data,
            t,
            cfg.points_per_period,
            T::zero(),
            r_max,
            &extra,
        );
        let res = integrate(
            |r: T| {
                let v = if r == T::zero() && n > 1 {
                    T::zero()
                } else {
                    solution_sq(params, data, t, r) * r.powi(n - 1)
                };
                match split {
                    Some((b, _)) if r < b => [v, T::zero(), T::zero()],
                    Some((_, s)) if r < s => [T::zero(), v, T::zero()],
                    Some(_) => [T::zero(), T::zero(), v],
                    None => [v, T::zero(), T::zero()],
                }
            },
            &points,
            QuadOptions::relative(cfg.rel_tol * cst(0.1)).with_abs(T::min_positive_value()),
        );
        let total = (res.value[0] + res.value[1]) + res.value[2];
        let tail_ok = tail <= cfg.rel_tol * cst(0.1) * total || tail == T::zero();
        if tail_ok || matches!(cfg.r_max, RMax::Fixed(_)) {
            if !tail_ok {
                return Err(Error::UncertifiedTail(format!(
                    "tail bound {tail} at fixed r_max {r_max} exceeds rel_tol/10 of the value {total}"
                )));
            }
            if !res.converged {
                log::warn!(
                    "norm quadrature at t = {t} did not reach rel_tol (error {})",
                    res.error
                );
            }
            return Ok(NormEstimate {
                t,
                value: total * scale,
                error: (res.error + tail) * scale,
                bands: res.value.map(|v| v * scale),
                r_max,
                tail_bound: tail * scale,
                panels: res.panels,
                mode: QuadMode::ExactAdaptive,
                remainder: T::zero(),
            });
        }
        r_max *= cst(1.25);
        tail = match data.decay {
            DecayClass::GaussianType { amplitude, rate } => {
                gaussian_tail(params, TailKind::Norm, amplitude, rate, t, r_max)
                    .unwrap_or(T::infinity())
            }
            _ => T::zero(),
        };
    }
    Err(Error::UncertifiedTail(
        "could not push the tail below rel_tol/10".into(),
    ))
}

/// `‖u(t)‖²` in the configured mode. The averaged mode falls back to the exact
/// one when its remainder bound exceeds 10% of the value.
pub fn norm_squared<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    cfg: &QuadratureConfig<T>,
) -> Result<NormEstimate<T>> {
    cfg.validate()?;
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::Domain(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    match cfg.mode {
        QuadMode::ExactAdaptive => exact_norm(params, data, t, cfg),
        QuadMode::OscillationAveraged => match oscillation_averaged_norm(params, data, t, cfg) {
            Ok(est) => Ok(est),
            Err(Error::Precondition(msg)) => {
                log::warn!("averaged mode not applicable ({msg}); using exact-adaptive quadrature");
                exact_norm(params, data, t, cfg)
            }
            Err(e) => Err(e),
        },
    }
}

/// `(low, mid, high)` band contributions at `t > e`.
pub fn band_split_norm<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    cfg: &QuadratureConfig<T>,
) -> Result<(T, T, T)> {
    if !(t > T::E()) {
        return Err(Error::Precondition(format!(
            "band split needs t > e, got {t}"
        )));
    }
    let cfg = QuadratureConfig {
        mode: QuadMode::ExactAdaptive,
        ..*cfg
    };
    let est = norm_squared(params, data, t, &cfg)?;
    Ok((est.bands[0], est.bands[1], est.bands[2]))
}

/// Zeros of `f′` on `[a, b]`, located by a sign scan and bisection.
fn stationary_points<T: Real>(params: &ModelParams<T>, a: T, b: T) -> Vec<T> {
    let mut out = Vec::new();
    let steps = 4000usize;
    let ratio = (b / a).powf(T::one() / from_usize::<T>(steps));
    let mut r0 = a;
    let mut d0 = params.derivs(r0).0;
    for _ in 0..steps {
        let r1 = r0 * ratio;
        let d1 = params.derivs(r1).0;
        if d0 == T::zero() {
            out.push(r0);
        } else if d0.signum() != d1.signum() {
            let (mut lo, mut hi) = (r0, r1);
            for _ in 0..100 {
                let mid = (lo + hi) * cst(0.5);
                if params.derivs(mid).0.signum() == d0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push((lo + hi) * cst(0.5));
        }
        r0 = r1;
        d0 = d1;
    }
    out
}

/// Oscillation-averaged evaluation for `t >= 10³`.
///
/// With `a = ŵ₀`, `b = ŵ₁/f` and `φ = t f`, the integrand is
/// `½(|a|²+|b|²) + ½cos 2φ (|a|²−|b|²) + sin 2φ Re(a b̄)`. Near the origin and
/// around zeros of `f′` the integral is evaluated exactly. Elsewhere the mean
/// term is integrated directly, the oscillatory terms are integrated by parts
/// once, and the boundary terms are kept exactly. The remaining integral is
/// bounded by the total variation of `g/f′` over `2t`, and that bound is
/// reported as the remainder.
pub fn oscillation_averaged_norm<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    cfg: &QuadratureConfig<T>,
) -> Result<NormEstimate<T>> {
    cfg.validate()?;
    if t < cst(1e3) {
        return Err(Error::Precondition(format!(
            "averaged mode needs t >= 1e3, got {t}"
        )));
    }
    let n = params.dim as i32;
    let scale = output_scale(params, cfg)?;
    let (r_max, tail) = initial_r_max(params, data, TailKind::Norm, t, cfg.rel_tol, cfg.r_max)?;
    let split = band_split_point(params, t)?;
    let sub_tol = cfg.rel_tol * cst(0.1);

    // Exact regions: the low band out to 16 periods, and windows around each
    // zero of f′ wide enough to contain the stationary-phase contribution.
    let r_a = (cst::<T>(32.0) * T::PI() / (t * params.kappa.sqrt())).min(r_max);
    let mut exact: Vec<(T, T)> = vec![(T::zero(), r_a)];
    if r_a < r_max {
        for rs in stationary_points(params, r_a, r_max) {
            let curv = params.derivs(rs).1.abs().max(T::epsilon());
            let half = (cst::<T>(64.0) * T::PI() / (t * curv)).sqrt();
            exact.push(((rs - half).max(r_a), (rs + half).min(r_max)));
        }
    }
    exact.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut merged: Vec<(T, T)> = Vec::new();
    for (lo, hi) in exact {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let mut averaged: Vec<(T, T)> = Vec::new();
    let mut cursor = T::zero();
    for &(lo, hi) in &merged {
        if lo > cursor {
            averaged.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < r_max {
        averaged.push((cursor, r_max));
    }

    let bands_of = |lo: T, hi: T| -> Vec<T> {
        [split.0, split.1]
            .into_iter()
            .filter(|&s| s > lo && s < hi)
            .collect()
    };
    let band_index = |r: T| -> usize {
        if r < split.0 {
            0
        } else if r < split.1 {
            1
        } else {
            2
        }
    };

    let mut bands = [T::zero(); 3];
    let mut error = tail;
    let mut remainder = T::zero();
    let mut panels = 0usize;

    for &(lo, hi) in &merged {
        let pts = plan_points(
            params,
            data,
            t,
            cfg.points_per_period,
            lo,
            hi,
            &bands_of(lo, hi),
        );
        let res = integrate(
            |r: T| {
                let v = if r == T::zero() && n > 1 {
                    T::zero()
                } else {
                    solution_sq(params, data, t, r) * r.powi(n - 1)
                };
                let mut out = [T::zero(); 3];
                out[band_index(r)] = v;
                out
            },
            &pts,
            QuadOptions::relative(sub_tol).with_abs(T::min_positive_value()),
        );
        for (b, v) in bands.iter_mut().zip(res.value) {
            *b += v;
        }
        error += res.error;
        panels += res.panels;
    }

    // Amplitudes g_c = ½(|a|²−|b|²) r^{n−1}, g_s = Re(a b̄) r^{n−1}, mean m = ½(|a|²+|b|²) r^{n−1}.
    let amps = |r: T| -> (T, T, T) {
        let f = params.f(r);
        let a: Complex<T> = data.w0(r);
        let b: Complex<T> = data.w1(r) / f;
        let jac = r.powi(n - 1);
        let (aa, bb) = (a.norm_sqr(), b.norm_sqr());
        let half = cst::<T>(0.5);
        (
            half * (aa + bb) * jac,
            half * (aa - bb) * jac,
            (a * b.conj()).re * jac,
        )
    };
    for &(lo, hi) in &averaged {
        let mut cuts = vec![lo];
        cuts.extend(bands_of(lo, hi));
        cuts.extend(data.kinks().into_iter().filter(|&k| k > lo && k < hi));
        cuts.push(hi);
        let cuts = merge_breakpoints(cuts);
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let k = band_index((x0 + x1) * cst(0.5));
            let width = (data.scale * cst(0.25)).min((x1 - x0) / cst(16.0));
            let count = ((x1 - x0) / width)
                .ceil()
                .to_usize()
                .unwrap_or(16)
                .clamp(16, 100_000);
            let pts: Vec<T> = (0..=count)
                .map(|i| x0 + (x1 - x0) * from_usize::<T>(i) / from_usize::<T>(count))
                .collect();
            let mean = integrate(
                |r: T| amps(r).0,
                &pts,
                QuadOptions::relative(sub_tol).with_abs(T::min_positive_value()),
            );
            // Boundary terms of ∫ g_c cos 2φ + g_s sin 2φ after one integration by parts.
            let boundary = |r: T| -> T {
                let (_, gc, gs) = amps(r);
                let fp = params.derivs(r).0;
                let ph = cst::<T>(2.0) * t * params.f(r);
                (gc * ph.sin() - gs * ph.cos()) / (cst::<T>(2.0) * t * fp)
            };
            let bterm = boundary(x1) - boundary(x0);
            // Total variation of g/f′ on a dense geometric-plus-uniform grid.
            let samples = 20_000usize;
            let mut tv = T::zero();
            let mut prev: Option<(T, T)> = None;
            for i in 0..=samples {
                let s = from_usize::<T>(i) / from_usize::<T>(samples);
                let r = if x0 > T::zero() {
                    x0 * (x1 / x0).powf(s)
                } else {
                    x0 + (x1 - x0) * s
                };
                let r = r.max(x0).min(x1);
                let (_, gc, gs) = amps(r);
                let fp = params.derivs(r).0;
                let cur = (gc / fp, gs / fp);
                if let Some(p) = prev {
                    tv += (cur.0 - p.0).abs() + (cur.1 - p.1).abs();
                }
                prev = Some(cur);
            }
            bands[k] += mean.value + bterm;
            error += mean.error;
            remainder += tv / (cst::<T>(2.0) * t);
            panels += mean.panels;
        }
    }

    let value = (bands[0] + bands[1]) + bands[2];
    let est = NormEstimate {
        t,
        value: value * scale,
        error: (error + remainder) * scale,
        bands: bands.map(|v| v * scale),
        r_max,
        tail_bound: tail * scale,
        panels,
        mode: QuadMode::OscillationAveraged,
        remainder: remainder * scale,
    };
    if remainder > cst::<T>(0.1) * value.abs() {
        log::warn!(
            "averaged-mode remainder {} exceeds 10% of the value {} at t = {t}; falling back to exact quadrature",
            est.remainder,
            est.value
        );
        return exact_norm(params, data, t, cfg);
    }
    Ok(est)
}

/// Sampled norms over a time grid with band split and energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormTrace<T> {
    pub times: Vec<T>,
    pub norms_sq: Vec<T>,
    pub band_low: Vec<T>,
    pub band_mid: Vec<T>,
    pub band_high: Vec<T>,
    pub energy: Vec<T>,
}

impl<T: Real> NormTrace<T> {
    pub fn from_columns(times: Vec<T>, norms_sq: Vec<T>) -> Result<Self> {
        if times.len() != norms_sq.len() {
            return Err(Error::Shape(format!(
                "{} times vs {} norms",
                times.len(),
                norms_sq.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "trace times must be strictly increasing".into(),
            ));
        }
        let z = vec![T::zero(); times.len()];
        Ok(NormTrace {
            band_low: norms_sq.clone(),
            band_mid: z.clone(),
            band_high: z.clone(),
            energy: z,
            times,
            norms_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Restriction to `t_min <= t <= t_max`.
    pub fn window(&self, t_min: T, t_max: T) -> NormTrace<T> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= t_min && self.times[i] <= t_max)
            .collect();
        let pick = |v: &Vec<T>| keep.iter().map(|&i| v[i]).collect::<Vec<T>>();
        NormTrace {
            times: pick(&self.times),
            norms_sq: pick(&self.norms_sq),
            band_low: pick(&self.band_low),
            band_mid: pick(&self.band_mid),
            band_high: pick(&self.band_high),
            energy: pick(&self.energy),
        }
    }

    /// CSV with header `t,norm_sq,band_low,band_mid,band_high,energy`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,norm_sq,band_low,band_mid,band_high,energy")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(self.times[i]),
                fmt17(self.norms_sq[i]),
                fmt17(self.band_low[i]),
                fmt17(self.band_mid[i]),
                fmt17(self.band_high[i]),
                fmt17(self.energy[i])
            )?;
        }
        Ok(())
    }
}

/// Decimal with 17 significant digits.
pub fn fmt17<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// `points_per_decade` geometric samples over `[t_min, t_max]`, both ends included.
pub fn geometric_times<T: Real>(t_min: T, t_max: T, points_per_decade: usize) -> Result<Vec<T>> {
    if !(t_min > T::zero() && t_max > t_min) || points_per_decade == 0 {
        return Err(Error::Domain(format!(
            "invalid time window [{t_min}, {t_max}]"
        )));
    }
    let decades = (t_max / t_min).log10();
    let steps = (decades * from_usize::<T>(points_per_decade))
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    Ok((0..=steps)
        .map(|i| {
            if i == steps {
                t_max
            } else {
                t_min * cst::<T>(10.0).powf(decades * from_usize::<T>(i) / from_usize::<T>(steps))
            }
        })
        .collect())
}

/// Norm trace over `times`, evaluated in parallel with results in time order.
/// The energy column is computed only when `with_energy` is set.
pub fn norm_trace<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    times: &[T],
    cfg: &QuadratureConfig<T>,
    with_energy: bool,
) -> Result<NormTrace<T>> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "trace times must be strictly increasing".into(),
        ));
    }
    let rows: Vec<Result<(NormEstimate<T>, T)>> = times
        .par_iter()
        .map(|&t| {
            let mut local = *cfg;
            if local.mode == QuadMode::OscillationAveraged && t < cst(1e3) {
                local.mode = QuadMode::ExactAdaptive;
            }
            let est = norm_squared(params, data, t, &local)?;
            let energy = if with_energy {
                let tol = cfg.rel_tol.min(cst(1e-10));
                total_energy(
                    params,
                    EnergyState::Radial {
                        data,
                        t,
                        rel_tol: tol,
                    },
                )?
                .total
            } else {
                T::zero()
            };
            Ok((est, energy))
        })
        .collect();
    let mut trace = NormTrace {
        times: Vec::with_capacity(times.len()),
        norms_sq: Vec::new(),
        band_low: Vec::new(),
        band_mid: Vec::new(),
        band_high: Vec::new(),
        energy: Vec::new(),
    };
    for row in rows {
        let (est, e) = row?;
        trace.times.push(est.t);
        trace.norms_sq.push(est.value);
        trace.band_low.push(est.bands[0]);
        trace.band_mid.push(est.bands[1]);
        trace.band_high.push(est.bands[2]);
        trace.energy.push(e);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(dim: usize) -> ModelParams<f64> {
        ModelParams::unit(dim).unwrap()
    }

    fn cfg() -> QuadratureConfig<f64> {
        QuadratureConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(cfg().with_rel_tol(0.5).validate().is_err());
        let mut c = cfg();
        c.points_per_period = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn t_zero_gives_the_initial_norm() {
        // ‖exp(-|x|²)‖² = (π/2)^{n/2}
        for dim in 1..=3 {
            let p = unit(dim);
            let d = RadialInitialData::gaussian_displacement(dim, 1.0, 1.0).unwrap();
            let est = norm_squared(&p, &d, 0.0, &cfg().with_rel_tol(1e-10)).unwrap();
            let exact = (std::f64::consts::PI / 2.0).powf(dim as f64 / 2.0);
            assert_relative_eq!(est.value, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn compact_low_band_reaches_the_sinc_floor() {
        let p = unit(1);
        for t in [10.0, 1e3, 1e5] {
            let beta = band_boundaries(&p, &SincConstants::default(), t)
                .unwrap()
                .beta;
            let d = RadialInitialData::compact_band(0.0, beta, 1.0).unwrap();
            let est = norm_squared(&p, &d, t, &cfg()).unwrap();
            let floor = (t * t / 4.0) * 2.0 * beta / (2.0 * std::f64::consts::PI);
            assert!(est.value >= floor, "t = {t}: {} < {floor}", est.value);
        }
    }

    #[test]
    fn generic_data_reports_an_uncertified_tail() {
        let p = unit(2);
        let d = RadialInitialData::annular_bump(2, 2.0, 0.5).unwrap();
        assert!(matches!(
            norm_squared(&p, &d, 10.0, &cfg()),
            Err(Error::UncertifiedTail(_))
        ));
    }

    #[test]
    fn bands_add_up_and_respect_the_split() {
        for dim in [1, 2, 3] {
            let p = unit(dim);
            let d = RadialInitialData::gaussian_velocity(dim, 1.0, 1.0).unwrap();
            let est = norm_squared(&p, &d, 1e3, &cfg()).unwrap();
            let (lo, mid, hi) = band_split_norm(&p, &d, 1e3, &cfg()).unwrap();
            assert_relative_eq!(lo + mid + hi, est.value, max_relative = 1e-6);
            assert!(lo > 0.0 && mid > 0.0 && hi > 0.0);
        }
    }

    #[test]
    fn high_band_bounded_in_three_dimensions() {
        let p = unit(3);
        let d = RadialInitialData::gaussian_velocity(3, 1.0, 1.0).unwrap();
        let (_, _, hi) = band_split_norm(&p, &d, 1e4, &cfg()).unwrap();
        // ‖u1‖² = (π/2)^{3/2}
        let u1_sq = (std::f64::consts::PI / 2.0).powf(1.5);
        assert!(hi <= 2.0 * u1_sq);
    }

    #[test]
    fn tightening_the_tolerance_changes_little() {
        let p = unit(2);
        let d = RadialInitialData::gaussian_velocity(2, 1.0, 1.0).unwrap();
        let a = norm_squared(&p, &d, 300.0, &cfg().with_rel_tol(1e-6)).unwrap();
        let b = norm_squared(&p, &d, 300.0, &cfg().with_rel_tol(5e-7)).unwrap();
        assert!((a.value - b.value).abs() < 1e-6 * a.value);
    }

    #[test]
    fn one_dimensional_low_band_grows_linearly() {
        let p = unit(1);
        let d = RadialInitialData::gaussian_velocity(1, 1.0, 1.0).unwrap();
        let low = |t: f64| band_split_norm(&p, &d, t, &cfg()).unwrap().0 / t;
        let (a, b) = (low(1e3), low(1e5));
        assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn averaged_mode_brackets_the_exact_value() {
        for dim in [1, 2] {
            let p = unit(dim);
            let d = RadialInitialData::gaussian_velocity(dim, 1.0, 1.0).unwrap();
            let exact = norm_squared(&p, &d, 1e3, &cfg()).unwrap();
            let avg = oscillation_averaged_norm(&p, &d, 1e3, &cfg()).unwrap();
            assert_eq!(avg.mode, QuadMode::OscillationAveraged);
            assert!(
                (avg.value - exact.value).abs() <= avg.error + exact.error,
                "dim {dim}: averaged {} ± {} vs exact {}",
                avg.value,
                avg.error,
                exact.value
            );
        }
        let p = unit(2);
        let d = RadialInitialData::gaussian_velocity(2, 1.0, 1.0).unwrap();
        assert!(matches!(
            oscillation_averaged_norm(&p, &d, 10.0, &cfg()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn averaged_high_band_data_is_time_independent() {
        // f′ ~ r⁻³ here, so the averaged regime starts late.
        let p = unit(2);
        let d = RadialInitialData::compact_band(20.0, 25.0, 1.0).unwrap();
        let a = oscillation_averaged_norm(&p, &d, 1e5, &cfg()).unwrap();
        let b = oscillation_averaged_norm(&p, &d, 1e7, &cfg()).unwrap();
        assert_eq!(b.mode, QuadMode::OscillationAveraged);
        assert!(
            (a.value - b.value).abs() <= a.remainder + b.remainder + 1e-6 * a.value,
            "{a:?} vs {b:?}"
        );
    }

    #[test]
    fn geometric_times_cover_the_window() {
        let ts = geometric_times(1e2, 1e6, 12).unwrap();
        assert_eq!(ts.len(), 49);
        assert_eq!(ts[0], 1e2);
        assert_eq!(*ts.last().unwrap(), 1e6);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_has_six_columns_and_full_precision() {
        let tr = NormTrace::from_columns(vec![1.0, 2.0], vec![0.1, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,norm_sq,band_low,band_mid,band_high,energy");
        assert_eq!(lines[2].split(',').count(), 6);
        let parsed: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }
}
