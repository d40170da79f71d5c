//! Growth-law fits for norm traces and the resulting verdicts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::MomentDecomposition;
use crate::radial_norm::NormTrace;
use crate::scalar::{cst, from_usize, Real};

/// Minimum samples in a fit window.
pub const MIN_SAMPLES: usize = 10;
/// Required r² lead of the winning model.
pub const VERDICT_MARGIN: f64 = 0.02;
/// Power fits with a smaller exponent do not count as power growth.
pub const MIN_POWER_EXPONENT: f64 = 0.05;
/// Bound on max/min of the sandwich ratio over the last decade.
pub const STABILITY_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthModel {
    /// `‖u(t)‖ ~ C t^p`.
    Power,
    /// `‖u(t)‖² ~ a log t + b`.
    Logarithmic,
    /// `‖u(t)‖² ~ const`.
    Bounded,
}

impl GrowthModel {
    /// The growth law expected for radial data with nonzero mean in dimension `dim`.
    pub fn expected_for(dim: usize) -> Self {
        match dim {
            1 => GrowthModel::Power,
            2 => GrowthModel::Logarithmic,
            _ => GrowthModel::Bounded,
        }
    }
}

/// One least-squares fit. For `Power`, `coeff = C` and `exponent_or_offset = p`;
/// for `Logarithmic`, `coeff = a` and `exponent_or_offset = b`; for `Bounded`,
/// `coeff` is the mean of `‖u‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit<T> {
    pub model: GrowthModel,
    pub coeff: T,
    pub exponent_or_offset: T,
    pub r_squared: T,
    pub window: (T, T),
    pub samples: usize,
}

fn windowed<T: Real>(trace: &NormTrace<T>, window: (T, T)) -> Result<NormTrace<T>> {
    let w = trace.window(window.0, window.1);
    if w.len() < MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "fit window [{}, {}] holds {} samples, need {MIN_SAMPLES}",
            window.0,
            window.1,
            w.len()
        )));
    }
    let (lo, hi) = (w.times[0], w.times[w.len() - 1]);
    if hi / lo < cst(100.0 * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] spans less than two decades"
        )));
    }
    if w.norms_sq
        .iter()
        .any(|&v| !(v > T::zero()) || !v.is_finite())
    {
        return Err(Error::Domain("fit needs positive finite norms".into()));
    }
    Ok(w)
}

/// Slope, intercept and centered r² of the least-squares line through `(x, y)`.
pub(crate) fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = from_usize::<T>(x.len());
    let mx = x.iter().fold(T::zero(), |s, &v| s + v) / n;
    let my = y.iter().fold(T::zero(), |s, &v| s + v) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = x.iter().zip(y).fold(T::zero(), |s, (&a, &b)| {
        s + (b - intercept - slope * a).powi(2)
    });
    (slope, intercept, r_squared(ss_res, syy))
}

fn r_squared<T: Real>(ss_res: T, ss_tot: T) -> T {
    if ss_tot <= T::zero() {
        return T::one();
    }
    (T::one() - ss_res / ss_tot).max(T::zero()).min(T::one())
}

/// Least squares of `log‖u‖` against `log t`.
pub fn fit_power<T: Real>(trace: &NormTrace<T>, window: (T, T)) -> Result<GrowthFit<T>> {
    let w = windowed(trace, window)?;
    let x: Vec<T> = w.times.iter().map(|t| t.ln()).collect();
    let y: Vec<T> = w.norms_sq.iter().map(|v| v.ln() * cst(0.5)).collect();
    let (p, c, r2) = linear_fit(&x, &y);
    Ok(GrowthFit {
        model: GrowthModel::Power,
        coeff: c.exp(),
        exponent_or_offset: p,
        r_squared: r2,
        window: (w.times[0], w.times[w.len() - 1]),
        samples: w.len(),
    })
}

/// Least squares of `‖u‖²` against `log t`.
pub fn fit_log<T: Real>(trace: &NormTrace<T>, window: (T, T)) -> Result<GrowthFit<T>> {
    let w = windowed(trace, window)?;
    let x: Vec<T> = w.times.iter().map(|t| t.ln()).collect();
    let (a, b, r2) = linear_fit(&x, &w.norms_sq);
    Ok(GrowthFit {
        model: GrowthModel::Logarithmic,
        coeff: a,
        exponent_or_offset: b,
        r_squared: r2,
        window: (w.times[0], w.times[w.len() - 1]),
        samples: w.len(),
    })
}

/// Constant fit of `‖u‖²` with uncentered r² `1 − Σ(y−ȳ)²/Σy²`.
pub fn fit_bounded<T: Real>(trace: &NormTrace<T>, window: (T, T)) -> Result<GrowthFit<T>> {
    let w = windowed(trace, window)?;
    let y = &w.norms_sq;
    let mean = y.iter().fold(T::zero(), |s, &v| s + v) / from_usize::<T>(y.len());
    let ss_res = y.iter().fold(T::zero(), |s, &v| s + (v - mean).powi(2));
    let ss_tot = y.iter().fold(T::zero(), |s, &v| s + v * v);
    Ok(GrowthFit {
        model: GrowthModel::Bounded,
        coeff: mean,
        exponent_or_offset: T::zero(),
        r_squared: r_squared(ss_res, ss_tot),
        window: (w.times[0], w.times[w.len() - 1]),
        samples: w.len(),
    })
}

/// All three fits, the winning model (if any) and its comparison with the
/// law expected for `dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthClassification<T> {
    pub dim: usize,
    /// `None` when no admissible model leads by [`VERDICT_MARGIN`].
    pub verdict: Option<GrowthModel>,
    pub expected: GrowthModel,
    pub matches_expected: bool,
    pub margin: T,
    pub power: GrowthFit<T>,
    pub logarithmic: GrowthFit<T>,
    pub bounded: GrowthFit<T>,
}

/// Fits all three models over the whole trace and picks the best r².
/// Power growth is admissible only with exponent `>= 0.05`, logarithmic
/// growth only with a positive coefficient.
pub fn classify_growth<T: Real>(
    trace: &NormTrace<T>,
    dim: usize,
) -> Result<GrowthClassification<T>> {
    if trace.len() < MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "trace has {} samples, need {MIN_SAMPLES}",
            trace.len()
        )));
    }
    let (lo, hi) = (trace.times[0], trace.times[trace.len() - 1]);
    if hi / lo < cst(1e3 * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "trace [{lo}, {hi}] spans less than three decades"
        )));
    }
    let window = (lo, hi);
    let power = fit_power(trace, window)?;
    let logarithmic = fit_log(trace, window)?;
    let bounded = fit_bounded(trace, window)?;
    let mut candidates = vec![(GrowthModel::Bounded, bounded.r_squared)];
    if power.exponent_or_offset >= cst(MIN_POWER_EXPONENT) {
        candidates.push((GrowthModel::Power, power.r_squared));
    }
    if logarithmic.coeff > T::zero() {
        candidates.push((GrowthModel::Logarithmic, logarithmic.r_squared));
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let margin = if candidates.len() > 1 {
        candidates[0].1 - candidates[1].1
    } else {
        T::one()
    };
    let verdict = (margin >= cst(VERDICT_MARGIN)).then_some(candidates[0].0);
    let expected = GrowthModel::expected_for(dim);
    Ok(GrowthClassification {
        dim,
        verdict,
        expected,
        matches_expected: verdict == Some(expected),
        margin,
        power,
        logarithmic,
        bounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthRate {
    SqrtT,
    SqrtLogT,
    One,
}

impl GrowthRate {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => GrowthRate::SqrtT,
            2 => GrowthRate::SqrtLogT,
            _ => GrowthRate::One,
        }
    }

    pub fn eval<T: Real>(self, t: T) -> T {
        match self {
            GrowthRate::SqrtT => t.sqrt(),
            GrowthRate::SqrtLogT => t.ln().sqrt(),
            GrowthRate::One => T::one(),
        }
    }
}

/// `‖u(t)‖/rate(t)` over the trace with its extremes over the last decade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport<T> {
    pub rate: GrowthRate,
    pub ratio_series: Vec<(T, T)>,
    pub lower_const: T,
    pub upper_const: T,
    /// `|∫u₁|`; the lower side scales with it.
    pub p_abs: T,
    /// Set when `P = 0`: the lower bound then carries no information.
    pub lower_vacuous: bool,
    pub stable: bool,
}

/// Builds the sandwich report for a physical-norm trace.
pub fn sandwich_report<T: Real>(
    trace: &NormTrace<T>,
    moments: &MomentDecomposition<T>,
    dim: usize,
) -> Result<SandwichReport<T>> {
    if trace.is_empty() {
        return Err(Error::Domain("empty trace".into()));
    }
    let rate = GrowthRate::for_dim(dim);
    if rate == GrowthRate::SqrtLogT && !(trace.times[0] > T::one()) {
        return Err(Error::Domain("the √log t rate needs t > 1".into()));
    }
    let ratio_series: Vec<(T, T)> = trace
        .times
        .iter()
        .zip(&trace.norms_sq)
        .map(|(&t, &v)| (t, v.max(T::zero()).sqrt() / rate.eval(t)))
        .collect();
    let t_last = trace.times[trace.len() - 1] / cst(10.0);
    let tail: Vec<T> = ratio_series
        .iter()
        .filter(|(t, _)| *t >= t_last)
        .map(|&(_, r)| r)
        .collect();
    let lower_const = tail.iter().cloned().fold(T::infinity(), T::min);
    let upper_const = tail.iter().cloned().fold(T::neg_infinity(), T::max);
    let stable = lower_const > T::zero() && upper_const <= lower_const * cst(STABILITY_RATIO);
    Ok(SandwichReport {
        rate,
        ratio_series,
        lower_const,
        upper_const,
        p_abs: moments.p_moment.abs(),
        lower_vacuous: moments.p_moment == T::zero(),
        stable,
    })
}
