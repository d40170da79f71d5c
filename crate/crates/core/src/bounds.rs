//! Explicit lower and upper envelopes for the spectral norm `‖w(t)‖²` and
//! every named quantity in their inequality chains.
//!
//! All envelopes are on the spectral side. Inputs that are physical norms
//! are converted once, with the Plancherel factor, on entry.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::RadialFunction;
use crate::error::{Error, Result};
use crate::model::{
    band_boundaries, plancherel_factor, unit_sphere_area, ModelParams, SincConstants,
};
use crate::moments::{fluctuation_radial, MomentDecomposition};
use crate::quadrature::{
    geometric_breakpoints, integrate, merge_breakpoints, phase_breakpoints, QuadOptions,
};
use crate::scalar::{cst, Real};
use crate::special::{gamma, sinc};

const BOUND_TOL: f64 = 1e-10;
/// Smallest time at which the large-time envelopes are evaluated.
pub const LARGE_TIME: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component<T> {
    pub value: T,
    pub provenance: Provenance,
}

/// One checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

impl<T: Real> Verdict<T> {
    pub fn le(lhs: T, rhs: T) -> Self {
        Verdict {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

/// A bound quantity next to the value it bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPair<T> {
    pub value: T,
    pub bound: T,
}

fn quad<T: Real, F: Fn(T) -> T + Sync>(f: F, points: &[T]) -> Result<T> {
    let res = integrate(
        f,
        points,
        QuadOptions::relative(cst(BOUND_TOL)).with_abs(cst(1e-300)),
    );
    if !res.converged {
        return Err(Error::Integrability(format!(
            "bound quadrature did not converge (error {} on {})",
            res.error, res.value
        )));
    }
    Ok(res.value)
}

fn require_dim<T: Real>(params: &ModelParams<T>, dims: &[usize], what: &str) -> Result<()> {
    if dims.contains(&params.dim) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} is defined for n in {dims:?}, got n = {}",
            params.dim
        )))
    }
}

fn require_large_time<T: Real>(t: T, what: &str) -> Result<()> {
    if t >= cst(LARGE_TIME) && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} needs t >= {LARGE_TIME}, got {t}"
        )))
    }
}

/// `I_l(t) = ∫_{|ξ|<=β(t)} sin²(tf)/f² dξ` in one dimension, with the
/// closed-form floor `(t²/4)·2β(t) = tδ₀/(2(μ+κ)^{1/2})` as the bound.
pub fn low_band_mass<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    t: T,
) -> Result<BoundPair<T>> {
    require_dim(params, &[1], "I_l")?;
    let b = band_boundaries(params, sinc_consts, t)?;
    if b.beta > T::one() {
        return Err(Error::Precondition(format!("β(t) = {} exceeds 1", b.beta)));
    }
    let pts: Vec<T> = (0..=8).map(|i| b.beta * cst(i as f64 / 8.0)).collect();
    let half = quad(
        |r: T| {
            let s = sinc(t * params.f(r));
            t * t * s * s
        },
        &pts,
    )?;
    let floor = t * t * cst(0.25) * cst::<T>(2.0) * b.beta;
    Ok(BoundPair {
        value: cst::<T>(2.0) * half,
        bound: floor,
    })
}

/// `R_l(t) = ∫_{L₀} |A − iB|² sin²(tf)/f² dξ` in one dimension and its
/// ceiling `2(1+δ)/(κ(2γ−1))·M²‖u₁‖²_{1,γ}·β(t)^{2γ−1}`.
pub fn fluctuation_remainder<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    u1: &RadialFunction<T>,
    moments: &MomentDecomposition<T>,
    t: T,
) -> Result<BoundPair<T>> {
    require_dim(params, &[1], "R_l")?;
    let ceiling = remainder_ceiling(params, sinc_consts, moments, t)?;
    let b = band_boundaries(params, sinc_consts, t)?;
    let pts: Vec<T> = (0..=8).map(|i| b.beta * cst(i as f64 / 8.0)).collect();
    let res = integrate(
        |r: T| {
            let a = fluctuation_radial(u1, 1, r).unwrap_or(T::nan());
            let s = sinc(t * params.f(r));
            a * a * t * t * s * s
        },
        &pts,
        QuadOptions::relative(cst(1e-8)).with_abs(cst(1e-300)),
    );
    Ok(BoundPair {
        value: cst::<T>(2.0) * res.value,
        bound: ceiling,
    })
}

fn remainder_ceiling<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    m: &MomentDecomposition<T>,
    t: T,
) -> Result<T> {
    let g = m.gamma_exp;
    if !(g > cst(0.5) && g <= T::one()) {
        return Err(Error::Precondition(format!(
            "R_l needs γ in (1/2, 1], got {g}"
        )));
    }
    let b = band_boundaries(params, sinc_consts, t)?;
    let two = cst::<T>(2.0);
    let c = two * (T::one() + params.delta) / (params.kappa * (two * g - T::one()));
    Ok(c * m.m_constant.powi(2) * m.weighted_norm.powi(2) * b.beta.powf(two * g - T::one()))
}

/// `K₀ = (1/(κγ))∫e^{-r²}r^{2γ+1}dr + (1/(κ(γ+θ)))∫e^{-r²}r^{2(γ+θ)+1}dr`,
/// by quadrature (`value`) and from `∫e^{-r²}r^{2m+1}dr = Γ(m+1)/2`
/// (`bound`).
pub fn weighted_gaussian_constant<T: Real>(
    params: &ModelParams<T>,
    gamma_exp: T,
) -> Result<BoundPair<T>> {
    if !(gamma_exp > T::zero() && gamma_exp <= T::one()) {
        return Err(Error::Domain(format!(
            "γ must lie in (0, 1], got {gamma_exp}"
        )));
    }
    if params.theta > cst(2.0) {
        return Err(Error::Domain(format!(
            "θ must lie in (0, 2], got {}",
            params.theta
        )));
    }
    let two = cst::<T>(2.0);
    let moment = |m: T| -> Result<T> {
        let pts = merge_breakpoints(
            (0..=40)
                .map(|i| cst::<T>(i as f64 * 0.25))
                .collect::<Vec<T>>(),
        );
        quad(|r: T| (-r * r).exp() * r.powf(two * m + T::one()), &pts)
    };
    let (g, th, k) = (gamma_exp, params.theta, params.kappa);
    let value = moment(g)? / (k * g) + moment(g + th)? / (k * (g + th));
    let closed =
        gamma(g + T::one()) / (two * k * g) + gamma(g + th + T::one()) / (two * k * (g + th));
    Ok(BoundPair {
        value,
        bound: closed,
    })
}

/// `Γ(γ)/(2κ) + δΓ(γ+θ)/(2κ)`, the bound on `U/ω₂` that keeps the factor
/// `δ` of the second term.
pub fn weighted_gaussian_constant_with_delta<T: Real>(params: &ModelParams<T>, gamma_exp: T) -> T {
    let two = cst::<T>(2.0);
    (gamma(gamma_exp) + params.delta * gamma(gamma_exp + params.theta)) / (two * params.kappa)
}

/// `U/ω₂ = ∫₀^∞ e^{-r²} r^{2γ+1}(1+δr^{2θ})/(μr⁴+κr²) dr`.
pub fn u_over_omega<T: Real>(params: &ModelParams<T>, gamma_exp: T) -> Result<T> {
    let mut pts = geometric_breakpoints(cst(1e-12), T::one(), cst(4.0));
    pts.insert(0, T::zero());
    pts.extend((1..=36).map(|i| T::one() + cst::<T>(i as f64 * 0.25)));
    let pts = merge_breakpoints(pts);
    let two = cst::<T>(2.0);
    quad(
        |r: T| {
            let w = (T::one() + params.delta * r.powf(two * params.theta))
                / (params.mu * r * r + params.kappa);
            (-r * r).exp() * r.powf(two * gamma_exp - T::one()) * w
        },
        &pts,
    )
}

fn two_d_window<T: Real>(params: &ModelParams<T>, t: T) -> Result<(T, T)> {
    let (a, b) = (T::one() / t, params.epsilon0());
    if !(a < b) {
        return Err(Error::Precondition(format!(
            "1/t = {a} must lie below ε₀ = {b}"
        )));
    }
    Ok((a, b))
}

fn log_points<T: Real>(a: T, b: T) -> Vec<T> {
    geometric_breakpoints(a, b, cst(1.5))
}

/// `T₁(t) = ∫_{1/t}^{ε₀} e^{-r²}(1+δr^{2θ})/(μr³+κr) dr`.
pub fn main_term<T: Real>(params: &ModelParams<T>, t: T) -> Result<T> {
    let (a, b) = two_d_window(params, t)?;
    quad(|r: T| t1_density(params, r), &log_points(a, b))
}

/// Closed-form floor `e^{-ε₀²} log(ε₀ t)/(μ+κ)` of `T₁(t)`.
pub fn main_term_floor<T: Real>(params: &ModelParams<T>, t: T) -> T {
    let e0 = params.epsilon0();
    (-e0 * e0).exp() * (e0 * t).ln() / (params.mu + params.kappa)
}

#[inline]
fn t1_density<T: Real>(params: &ModelParams<T>, r: T) -> T {
    let p = T::one() + params.delta * r.powf(cst::<T>(2.0) * params.theta);
    (-r * r).exp() * p / (params.mu * r * r * r + params.kappa * r)
}

/// `g(r) = e^{-r²}(1+δr^{2θ})/(f′(r)(μr³+κr))` and `g′(r)`.
fn ibp_kernel<T: Real>(params: &ModelParams<T>, r: T) -> (T, T) {
    let two = cst::<T>(2.0);
    let (f1, f2) = params.derivs(r);
    let p = T::one() + params.delta * r.powf(two * params.theta);
    let dp = two * params.theta * params.delta * r.powf(two * params.theta - T::one());
    let h = params.mu * r * r * r + params.kappa * r;
    let dh = cst::<T>(3.0) * params.mu * r * r + params.kappa;
    let g = (-r * r).exp() * p / (f1 * h);
    (g, g * (-two * r + dp / p - f2 / f1 - dh / h))
}

/// `T₂(t) = ∫_{1/t}^{ε₀} e^{-r²}cos(2tf)(1+δr^{2θ})/(μr³+κr) dr` and two
/// bounds on `|T₂|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRemainder<T> {
    pub value: T,
    /// `(K₁ + K₂)/(2t)` with the constants of the derivative bounds on `f`.
    pub closed_form_bound: T,
    pub k1_bound: T,
    pub k2_bound: T,
    /// `(|g(ε₀)| + |g(1/t)| + ∫|g′|)/(2t)` from the same integration by parts.
    pub sharp_bound: T,
}

/// Closed-form `(K₁, K₂)` bounds from `f′ >= c_f` and `|f″| <= C(1 + 1/r)`
/// on `(0, ε₀]`; `|T₂| <= (K₁ + K₂)/(2t)`.
pub fn tail_bound_constants<T: Real>(params: &ModelParams<T>, t: T) -> Result<(T, T)> {
    let (a, b) = two_d_window(params, t)?;
    let two = cst::<T>(2.0);
    let (d, m, k, th) = (params.delta, params.mu, params.kappa, params.theta);
    let cf = params.fprime_lower_bound();
    let cs = params.fsecond_constant();
    let one_d = T::one() + d;
    let k1 = one_d / (cf * k) * (T::one() / b + t);
    let power_part = if (two * th - T::one()).abs() < cst(1e-12) {
        (b / a).ln()
    } else {
        (b.powf(two * th - T::one()) - a.powf(two * th - T::one())) / (two * th - T::one())
    };
    let inv = T::one() / a - T::one() / b;
    let k2 = two * one_d / (k * cf) * (b - a)
        + two * d * th / (k * cf) * power_part
        + one_d * cs / (cf * cf * k) * ((b / a).ln() + inv)
        + one_d * (cst::<T>(3.0) * m + k) / (k * k * cf) * inv;
    Ok((k1, k2))
}

pub fn averaged_tail_remainder<T: Real>(params: &ModelParams<T>, t: T) -> Result<TailRemainder<T>> {
    require_dim(params, &[2], "T₂")?;
    require_large_time(t, "T₂")?;
    let (a, b) = two_d_window(params, t)?;
    let two = cst::<T>(2.0);
    // Half a period of cos(2tf) per panel.
    let max_step = T::PI();
    let mut pts = phase_breakpoints(a, b, |r| two * t * params.f(r), max_step, b - a);
    pts.extend(log_points(a, b));
    let pts = merge_breakpoints(pts);
    let value = quad(
        |r: T| t1_density(params, r) * (two * t * params.f(r)).cos(),
        &pts,
    )?;

    let (k1_bound, k2_bound) = tail_bound_constants(params, t)?;
    let closed_form_bound = (k1_bound + k2_bound) / (two * t);

    let tv = quad(|r: T| ibp_kernel(params, r).1.abs(), &log_points(a, b))?;
    let sharp = (ibp_kernel(params, a).0.abs() + ibp_kernel(params, b).0.abs() + tv) / (two * t);
    Ok(TailRemainder {
        value,
        closed_form_bound,
        k1_bound,
        k2_bound,
        sharp_bound: sharp,
    })
}

/// `T(t) = ∫_{ℝ²} e^{-|ξ|²} sin²(tf)/f² dξ` by phase-resolved quadrature.
pub fn gaussian_weighted_mass<T: Real>(params: &ModelParams<T>, t: T) -> Result<T> {
    let r_max = cst::<T>(6.5);
    // Half a period of sin²(tf) per panel.
    let max_step = T::PI() / cst(2.0);
    let mut pts = phase_breakpoints(T::zero(), r_max, |r| t * params.f(r), max_step, cst(0.25));
    pts.extend(geometric_breakpoints(
        cst::<T>(1e-3) / t,
        T::one(),
        cst(2.0),
    ));
    let pts = merge_breakpoints(pts);
    let v = quad(
        |r: T| {
            let s = sinc(t * params.f(r));
            (-r * r).exp() * t * t * s * s * r
        },
        &pts,
    )?;
    Ok(unit_sphere_area::<T>(2)? * v)
}

/// Spectral lower envelope and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerEnvelope<T> {
    /// `max(0, raw)`.
    pub value: T,
    pub raw: T,
    pub main: T,
    pub fluctuation: T,
    pub initial: T,
}

/// Lower envelope of `‖w(t)‖²` (spectral side) for `n ∈ {1, 2}`.
///
/// `n = 1`: `(P²/4)·I_l floor − R_l ceiling − ‖ŵ₀‖²`.
/// `n = 2`: `(P²/4)(ω₂/2)(T₁ − |T₂| bound) − M²‖u₁‖²_{1,γ}ω₂K − ‖ŵ₀‖²`,
/// with the sharp `|T₂|` bound and `K` the `δ`-carrying Gaussian constant.
/// `u0_norm_sq` is the physical `‖u₀‖²`.
pub fn lower_envelope<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    moments: &MomentDecomposition<T>,
    u0_norm_sq: T,
    t: T,
) -> Result<LowerEnvelope<T>> {
    require_dim(params, &[1, 2], "lower envelope")?;
    require_large_time(t, "lower envelope")?;
    let initial = u0_norm_sq / plancherel_factor::<T>(params.dim);
    let p2 = moments.p_moment * moments.p_moment * cst(0.25);
    let mw2 = moments.m_constant.powi(2) * moments.weighted_norm.powi(2);
    let (main, fluctuation) = if params.dim == 1 {
        let floor = low_band_floor(params, sinc_consts, t)?;
        (
            p2 * floor,
            remainder_ceiling(params, sinc_consts, moments, t)?,
        )
    } else {
        let omega = unit_sphere_area::<T>(2)?;
        let t1 = main_term(params, t)?;
        let t2 = averaged_tail_remainder(params, t)?.sharp_bound;
        let k = weighted_gaussian_constant_with_delta(params, moments.gamma_exp);
        (p2 * omega * cst(0.5) * (t1 - t2), mw2 * omega * k)
    };
    let raw = main - fluctuation - initial;
    Ok(LowerEnvelope {
        value: raw.max(T::zero()),
        raw,
        main,
        fluctuation,
        initial,
    })
}

fn low_band_floor<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    t: T,
) -> Result<T> {
    let b = band_boundaries(params, sinc_consts, t)?;
    if b.beta > T::one() {
        return Err(Error::Precondition(format!("β(t) = {} exceeds 1", b.beta)));
    }
    Ok(t * t * cst(0.25) * cst::<T>(2.0) * b.beta)
}

/// Spectral upper envelope `2·(Σ component ceilings + ‖ŵ₀‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperEnvelope<T> {
    pub value: T,
    pub components: BTreeMap<String, T>,
}

/// Upper envelope of `‖w(t)‖²` on the spectral side. `u1_l1` is `‖u₁‖₁`;
/// `u1_l2` and `u0_l2` are physical `L²` norms (not squared).
pub fn upper_envelope<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    u1_l1: T,
    u1_l2: T,
    u0_l2: T,
    t: T,
) -> Result<UpperEnvelope<T>> {
    params.require_positive_mu("upper envelope")?;
    let n = params.dim;
    let to_spectral = T::one() / plancherel_factor::<T>(n);
    let w1 = u1_l2 * u1_l2 * to_spectral;
    let w0 = u0_l2 * u0_l2 * to_spectral;
    let one_d = T::one() + params.delta;
    let l1sq = u1_l1 * u1_l1;
    let lsq = sinc_consts.l * sinc_consts.l;
    let omega = unit_sphere_area::<T>(n)?;
    let mut c = BTreeMap::new();
    match n {
        1 => {
            let b = band_boundaries(params, sinc_consts, t)?;
            if b.gamma_band > T::one() || b.beta > T::one() {
                return Err(Error::Precondition(format!(
                    "γ(t) = {} exceeds 1; t is too small",
                    b.gamma_band
                )));
            }
            c.insert("L1".into(), lsq * t * t * omega * l1sq * b.beta);
            let two = cst::<T>(2.0);
            c.insert(
                "L21".into(),
                two * one_d / params.kappa * l1sq * (T::one() / b.beta - T::one() / b.gamma_band),
            );
            let g = b.gamma_band;
            c.insert(
                "L22".into(),
                (g.powi(-4) + params.delta * g.powf(two * params.theta - cst(4.0))) / params.mu
                    * w1,
            );
        }
        2 => {
            let b = band_boundaries(params, sinc_consts, t)?;
            if b.beta > T::one() {
                return Err(Error::Precondition(format!(
                    "β(t) = {} exceeds 1; t is too small",
                    b.beta
                )));
            }
            c.insert(
                "G1".into(),
                lsq * t * t * omega * l1sq * b.beta * b.beta * cst(0.5),
            );
            c.insert(
                "G2".into(),
                omega * l1sq * one_d / params.kappa * (T::one() / b.beta).ln(),
            );
            c.insert("G3".into(), one_d / params.mu * w1);
        }
        _ => {
            let nm2 = cst::<T>((n - 2) as f64);
            c.insert("M1".into(), omega * one_d / params.kappa * l1sq / nm2);
            c.insert("M2".into(), one_d / params.mu * w1);
        }
    }
    let sum = c.values().fold(T::zero(), |s, &v| s + v);
    Ok(UpperEnvelope {
        value: cst::<T>(2.0) * (sum + w0),
        components: c,
    })
}

/// Norms of the data entering the envelopes (physical side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs<T> {
    pub moments: MomentDecomposition<T>,
    pub u1_l2: T,
    pub u0_l2: T,
}

/// Every component, envelope and verdict at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport<T> {
    pub t: T,
    pub dim: usize,
    pub lower_1d: Option<T>,
    pub lower_2d: Option<T>,
    pub upper: Option<T>,
    /// Spectral `‖w(t)‖²` the envelopes were compared with, if supplied.
    pub measured: Option<T>,
    pub components: BTreeMap<String, Component<T>>,
    pub verdicts: BTreeMap<String, Verdict<T>>,
}

impl<T: Real> EnvelopeReport<T> {
    pub fn all_hold(&self) -> bool {
        self.verdicts.values().all(|v| v.holds)
    }
}

/// Assembles the report for the model's dimension. `u1` enables the
/// quadrature of `R_l`; `measured` is the spectral `‖w(t)‖²`.
pub fn envelope_report<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    u1: Option<&RadialFunction<T>>,
    inputs: &BoundInputs<T>,
    t: T,
    measured: Option<T>,
) -> Result<EnvelopeReport<T>> {
    let mut comp = BTreeMap::new();
    let mut verdicts = BTreeMap::new();
    let mut put = |name: &str, value: T, provenance: Provenance| {
        comp.insert(name.to_string(), Component { value, provenance });
    };
    let m = &inputs.moments;
    let (mut lower_1d, mut lower_2d, mut upper) = (None, None, None);

    if params.mu > T::zero() {
        let up = upper_envelope(
            params,
            sinc_consts,
            m.l1_norm,
            inputs.u1_l2,
            inputs.u0_l2,
            t,
        )?;
        for (k, v) in &up.components {
            put(k, *v, Provenance::ClosedForm);
        }
        upper = Some(up.value);
    }
    match params.dim {
        1 => {
            let il = low_band_mass(params, sinc_consts, t)?;
            put("I_l", il.value, Provenance::Quadrature);
            put("I_l_floor", il.bound, Provenance::ClosedForm);
            verdicts.insert("I_l >= floor".into(), Verdict::le(il.bound, il.value));
            if m.gamma_exp > cst(0.5) {
                let ceiling = remainder_ceiling(params, sinc_consts, m, t)?;
                put("R_l_ceiling", ceiling, Provenance::ClosedForm);
                if let Some(u) = u1 {
                    let rl = fluctuation_remainder(params, sinc_consts, u, m, t)?;
                    put("R_l", rl.value, Provenance::Quadrature);
                    verdicts.insert("R_l <= ceiling".into(), Verdict::le(rl.value, ceiling));
                }
                let low = lower_envelope(params, sinc_consts, m, inputs.u0_l2 * inputs.u0_l2, t)?;
                lower_1d = Some(low.value);
            }
        }
        2 => {
            let omega = unit_sphere_area::<T>(2)?;
            let t1 = main_term(params, t)?;
            let t2 = averaged_tail_remainder(params, t)?;
            put(
                "T",
                gaussian_weighted_mass(params, t)?,
                Provenance::Quadrature,
            );
            put("T1", t1, Provenance::Quadrature);
            put(
                "T1_floor",
                main_term_floor(params, t),
                Provenance::ClosedForm,
            );
            put("T2", t2.value, Provenance::Quadrature);
            put("T2_bound", t2.closed_form_bound, Provenance::ClosedForm);
            put("T2_sharp_bound", t2.sharp_bound, Provenance::Quadrature);
            put("K1_bound", t2.k1_bound, Provenance::ClosedForm);
            put("K2_bound", t2.k2_bound, Provenance::ClosedForm);
            let k0 = weighted_gaussian_constant(params, m.gamma_exp)?;
            put("K0", k0.value, Provenance::Quadrature);
            put("K0_closed_form", k0.bound, Provenance::ClosedForm);
            let uo = u_over_omega(params, m.gamma_exp)?;
            put("U", omega * uo, Provenance::Quadrature);
            let k_delta = weighted_gaussian_constant_with_delta(params, m.gamma_exp);
            put("K0_delta", k_delta, Provenance::ClosedForm);
            verdicts.insert(
                "|T2| <= bound".into(),
                Verdict::le(t2.value.abs(), t2.closed_form_bound),
            );
            verdicts.insert(
                "|T2| <= sharp bound".into(),
                Verdict::le(t2.value.abs(), t2.sharp_bound),
            );
            verdicts.insert(
                "T1 >= floor".into(),
                Verdict::le(main_term_floor(params, t), t1),
            );
            verdicts.insert("U/omega2 <= K0_delta".into(), Verdict::le(uo, k_delta));
            let low = lower_envelope(params, sinc_consts, m, inputs.u0_l2 * inputs.u0_l2, t)?;
            lower_2d = Some(low.value);
        }
        _ => {}
    }
    if let Some(w) = measured {
        if let Some(lo) = lower_1d.or(lower_2d) {
            verdicts.insert("lower <= 2 norm".into(), Verdict::le(lo, cst::<T>(2.0) * w));
        }
        if let Some(up) = upper {
            verdicts.insert("norm <= upper".into(), Verdict::le(w, up));
        }
    }
    for (name, c) in &comp {
        if !c.value.is_finite() {
            return Err(Error::Integrability(format!(
                "component {name} is not finite"
            )));
        }
    }
    Ok(EnvelopeReport {
        t,
        dim: params.dim,
        lower_1d,
        lower_2d,
        upper,
        measured,
        components: comp,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(dim: usize) -> ModelParams<f64> {
        ModelParams::unit(dim).unwrap()
    }

    fn sc() -> SincConstants<f64> {
        SincConstants::default()
    }

    fn gauss_moments(dim: usize) -> (RadialFunction<f64>, MomentDecomposition<f64>) {
        let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
        let m = MomentDecomposition::from_profile(&u, dim, 1.0).unwrap();
        (u, m)
    }

    #[test]
    fn low_band_floor_example_and_ordering() {
        let p = unit(1);
        let il = low_band_mass(&p, &sc(), 100.0).unwrap();
        assert_relative_eq!(
            il.bound,
            100.0 * 0.9 / (2.0 * 2f64.sqrt()),
            max_relative = 1e-14
        );
        for t in [1e2, 1e4, 1e6] {
            let il = low_band_mass(&p, &sc(), t).unwrap();
            assert!(il.value >= il.bound);
        }
        let a = low_band_mass(&p, &sc(), 1e4).unwrap().value / 1e4;
        let b = low_band_mass(&p, &sc(), 1e6).unwrap().value / 1e6;
        assert!((a / b - 1.0).abs() < 0.02);
        assert!(low_band_mass(&unit(2), &sc(), 100.0).is_err());
        let slow = ModelParams::new(1.0, 0.0, 1e-4, 2.0, 1).unwrap();
        assert!(matches!(
            low_band_mass(&slow, &sc(), 10.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn remainder_is_below_its_ceiling_and_decays() {
        let p = unit(1);
        let (u, m) = gauss_moments(1);
        let r = fluctuation_remainder(&p, &sc(), &u, &m, 1e3).unwrap();
        assert!(r.value <= r.bound);
        let r2 = fluctuation_remainder(&p, &sc(), &u, &m, 1e4).unwrap();
        assert_relative_eq!(r.bound / r2.bound, 10.0, max_relative = 1e-10);
        let half = MomentDecomposition {
            gamma_exp: 0.5,
            ..m
        };
        assert!(matches!(
            fluctuation_remainder(&p, &sc(), &u, &half, 1e3),
            Err(Error::Precondition(_))
        ));
        let tiny = m.scaled(1e-3);
        let r3 = fluctuation_remainder(&p, &sc(), &u.scaled(1e-3), &tiny, 1e3).unwrap();
        assert_relative_eq!(r3.bound, r.bound * 1e-6, max_relative = 1e-9);
        assert_relative_eq!(r3.value, r.value * 1e-6, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_constant_examples() {
        let p = unit(2);
        let k = weighted_gaussian_constant(&p, 1.0).unwrap();
        assert_relative_eq!(k.bound, 1.5, max_relative = 1e-14);
        assert!((k.value - k.bound).abs() <= 1e-8);
        let p2 = ModelParams::new(1.0, 1.0, 2.0, 2.0, 2).unwrap();
        assert_relative_eq!(
            weighted_gaussian_constant(&p2, 1.0).unwrap().bound,
            0.75,
            max_relative = 1e-14
        );
        for g in [0.3, 0.7, 1.0] {
            assert!(
                u_over_omega(&p, g).unwrap() <= weighted_gaussian_constant(&p, g).unwrap().bound
            );
            assert!(u_over_omega(&p, g).unwrap() <= weighted_gaussian_constant_with_delta(&p, g));
        }
        let heavy = ModelParams::new(4.0, 1.0, 1.0, 2.0, 2).unwrap();
        assert!(
            u_over_omega(&heavy, 1.0).unwrap()
                <= weighted_gaussian_constant_with_delta(&heavy, 1.0)
        );
    }

    #[test]
    fn tail_remainder_stays_bounded() {
        let p = unit(2);
        let mut vals = Vec::new();
        for t in [1e2, 1e4, 1e6] {
            let r = averaged_tail_remainder(&p, t).unwrap();
            assert!(
                r.value.abs() <= r.sharp_bound && r.sharp_bound <= r.closed_form_bound,
                "{r:?}"
            );
            vals.push(r.value.abs());
        }
        let x: Vec<f64> = [1e2f64, 1e4, 1e6].iter().map(|t| t.ln()).collect();
        let (mx, my) = (x.iter().sum::<f64>() / 3.0, vals.iter().sum::<f64>() / 3.0);
        let slope = x
            .iter()
            .zip(&vals)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        assert!(slope.abs() <= 0.05, "slope {slope}");
        let ratio = |t: f64| {
            let (k1, k2) = tail_bound_constants(&p, t).unwrap();
            (k1 + k2) / (2.0 * t) / main_term(&p, t).unwrap()
        };
        let (b1, b2) = (ratio(1e4), ratio(1e8));
        assert!(b2 < b1);
    }

    #[test]
    fn tail_remainder_matches_a_uniform_grid_oracle() {
        let p = unit(2);
        let t = 1e2;
        let r = averaged_tail_remainder(&p, t).unwrap();
        let (a, b) = (1.0 / t, p.epsilon0());
        let n = 1_000_000;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            s += t1_density(&p, x) * (2.0 * t * p.f(x)).cos();
        }
        assert!((s * h - r.value).abs() <= 1e-4 * r.value.abs());
    }

    #[test]
    fn main_term_grows_like_log_t() {
        let p = unit(2);
        for t in [1e2, 1e4, 1e6] {
            assert!(main_term(&p, t).unwrap() >= main_term_floor(&p, t));
        }
        let d = main_term(&p, 1e6).unwrap() - main_term(&p, 1e5).unwrap();
        // Near r = 0 the density is 1/(κr), so each decade adds about ln 10.
        assert_relative_eq!(d, 10f64.ln(), max_relative = 1e-4);
    }

    #[test]
    fn lower_envelopes_scale_as_expected() {
        let (_, m1) = gauss_moments(1);
        let p1 = unit(1);
        let a = lower_envelope(&p1, &sc(), &m1, 0.0, 1e4).unwrap().value / 1e4;
        let b = lower_envelope(&p1, &sc(), &m1, 0.0, 1e6).unwrap().value / 1e6;
        assert!(a > 0.0 && (a / b - 1.0).abs() < 0.01);
        let (_, m2) = gauss_moments(2);
        let p2 = unit(2);
        let l6 = lower_envelope(&p2, &sc(), &m2, 0.0, 1e6).unwrap();
        let l7 = lower_envelope(&p2, &sc(), &m2, 0.0, 1e7).unwrap();
        assert!(l6.value > 0.0 && l7.value > l6.value);
        assert!(((l7.value / 1e7f64.ln()) / (l6.value / 1e6f64.ln()) - 1.0).abs() < 0.05);
        let zero_p = MomentDecomposition {
            p_moment: 0.0,
            ..m2
        };
        assert_eq!(
            lower_envelope(&p2, &sc(), &zero_p, 0.0, 1e6).unwrap().value,
            0.0
        );
        assert!(lower_envelope(&unit(3), &sc(), &m2, 0.0, 1e6).is_err());
        assert!(lower_envelope(&p2, &sc(), &m2, 0.0, 10.0).is_err());
    }

    #[test]
    fn upper_envelope_shapes() {
        let p3 = unit(3);
        let a = upper_envelope(&p3, &sc(), 1.0, 1.0, 0.0, 1e3)
            .unwrap()
            .value;
        let b = upper_envelope(&p3, &sc(), 1.0, 1.0, 0.0, 1e7)
            .unwrap()
            .value;
        assert_eq!(a, b);
        let p2 = unit(2);
        let r: Vec<f64> = [1e3f64, 1e4, 1e5]
            .iter()
            .map(|&t| upper_envelope(&p2, &sc(), 1.0, 1.0, 0.0, t).unwrap().value / t.ln())
            .collect();
        assert!(
            r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min)
                < 1.5
        );
        let flat = ModelParams::new(1.0, 0.0, 1.0, 2.0, 1).unwrap();
        assert!(matches!(
            upper_envelope(&flat, &sc(), 1.0, 1.0, 0.0, 1e3),
            Err(Error::Precondition(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ceilings_are_monotone_in_the_data_norms(
            dim in 1usize..=3, t in 1e2f64..1e6, l1 in 0.1f64..10.0, l2 in 0.1f64..10.0, bump in 1.0f64..2.0
        ) {
            let p = unit(dim);
            let base = upper_envelope(&p, &sc(), l1, l2, 0.0, t).unwrap();
            let more_l1 = upper_envelope(&p, &sc(), l1 * bump, l2, 0.0, t).unwrap();
            let more_l2 = upper_envelope(&p, &sc(), l1, l2 * bump, 0.0, t).unwrap();
            for (k, v) in &base.components {
                prop_assert!(more_l1.components[k] >= *v && more_l2.components[k] >= *v);
            }
            if dim == 1 {
                let (_, m) = (0, MomentDecomposition { p_moment: 1.0, gamma_exp: 1.0, weighted_norm: l1, m_constant: 0.5, l1_norm: l1 });
                let c0 = remainder_ceiling(&p, &sc(), &m, t).unwrap();
                let c1 = remainder_ceiling(&p, &sc(), &MomentDecomposition { weighted_norm: l1 * bump, ..m }, t).unwrap();
                prop_assert!(c1 >= c0);
            }
        }
    }
}
