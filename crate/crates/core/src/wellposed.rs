//! Symbol-level content of well-posedness: the multiplier of the operator
//! `P = (I − δ(−Δ)^θ)^{-1}(I − κΔ + μΔ²)`, the two-sided equivalence
//! `h(r) ≍ 1 + r^{2(4−θ)}`, and the dissipativity identity.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::data::RadialFunction;
use crate::error::{Error, Result};
use crate::model::{plancherel_factor, unit_sphere_area, ModelParams};
use crate::quadrature::{integrate, QuadOptions};
use crate::radial_norm::fmt17;
use crate::scalar::{cst, from_usize, Real};

const SCAN_TOL: f64 = 1e-12;
/// Relative tolerance of the endpoint checks of [`h_ratio_scan`].
pub const ENDPOINT_TOL: f64 = 0.01;

/// `(1 + κr² + μr⁴)/(1 + δr^{2θ})`, the symbol of `P` at `|ξ| = r`.
pub fn p_multiplier<T: Real>(params: &ModelParams<T>, r: T) -> Result<T> {
    if !(r >= T::zero()) {
        return Err(Error::Domain(format!("|ξ| must be nonnegative, got {r}")));
    }
    Ok(stiffness_plus_one(params, r) / params.inertia(r))
}

#[inline]
fn stiffness_plus_one<T: Real>(params: &ModelParams<T>, r: T) -> T {
    let r2 = r * r;
    T::one() + params.kappa * r2 + params.mu * r2 * r2
}

/// `h(r) = (1 + κr² + μr⁴)²/(1 + δr^{2θ})`.
pub fn h_symbol<T: Real>(params: &ModelParams<T>, r: T) -> T {
    let s = stiffness_plus_one(params, r);
    s * s / params.inertia(r)
}

/// `h(r)/(1 + r^{2(4−θ)})`.
pub fn h_ratio<T: Real>(params: &ModelParams<T>, r: T) -> T {
    let two = cst::<T>(2.0);
    h_symbol(params, r) / (T::one() + r.powf(two * (cst::<T>(4.0) - params.theta)))
}

/// `h_ratio` over a grid with its extremes and endpoint limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierScan<T> {
    pub r_grid: Vec<T>,
    pub h_ratio: Vec<T>,
    /// Infimum, refined between the grid neighbours of the smallest sample.
    pub m_lower: T,
    /// Supremum, refined the same way.
    pub m_upper: T,
    /// Values at the smallest and largest grid radius.
    pub limits: (T, T),
    /// `(μ² + 2κμ)/(1 + δ)`.
    pub c0_stated: T,
    /// `μ²/δ`, the limit of the ratio as `r → ∞`.
    pub c0_limit: T,
    pub small_end_ok: bool,
    pub large_end_matches_stated: bool,
    pub large_end_matches_limit: bool,
}

impl<T: Real> MultiplierScan<T> {
    /// CSV with header `r,h_ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,h_ratio")?;
        for (r, h) in self.r_grid.iter().zip(&self.h_ratio) {
            writeln!(out, "{},{}", fmt17(*r), fmt17(*h))?;
        }
        Ok(())
    }
}

/// Log-spaced radii from `1e-6` to `1e6`, 20 per decade.
pub fn default_r_grid<T: Real>() -> Vec<T> {
    (0..=240)
        .map(|i| cst::<T>(10f64.powf(-6.0 + i as f64 / 20.0)))
        .collect()
}

/// Golden-section search of `sign·g(log r)` on `[a, b]` for its minimum.
fn refine<T: Real, G: Fn(T) -> T>(g: G, a: T, b: T) -> T {
    let phi = cst::<T>(0.618_033_988_749_894_8);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (g(x1.exp()), g(x2.exp()));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = g(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = g(x2.exp());
        }
    }
    f1.min(f2)
}

pub fn h_ratio_scan<T: Real>(params: &ModelParams<T>, r_grid: &[T]) -> Result<MultiplierScan<T>> {
    params.require_positive_mu("the multiplier equivalence")?;
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[1] > w[0])) || !(r_grid[0] > T::zero()) {
        return Err(Error::Domain(
            "r grid must be positive and increasing".into(),
        ));
    }
    let (first, last) = (r_grid[0], r_grid[r_grid.len() - 1]);
    if first > cst(1e-4) || last < cst(1e4) {
        return Err(Error::Domain(format!(
            "r grid [{first}, {last}] must cover [1e-4, 1e4]"
        )));
    }
    let ratios: Vec<T> = r_grid.iter().map(|&r| h_ratio(params, r)).collect();
    let bracket = |i: usize| {
        (
            r_grid[i.saturating_sub(1)],
            r_grid[(i + 1).min(r_grid.len() - 1)],
        )
    };
    let arg = |better: &dyn Fn(T, T) -> bool| {
        (0..ratios.len()).fold(0, |b, i| if better(ratios[i], ratios[b]) { i } else { b })
    };
    let (imin, imax) = (arg(&|a, b| a < b), arg(&|a, b| a > b));
    let (a, b) = bracket(imin);
    let m_lower = refine(|r| h_ratio(params, r), a, b).min(ratios[imin]);
    let (a, b) = bracket(imax);
    let m_upper = (-refine(|r| -h_ratio(params, r), a, b)).max(ratios[imax]);
    let limits = (ratios[0], ratios[ratios.len() - 1]);
    let c0_stated = (params.mu * params.mu + cst::<T>(2.0) * params.kappa * params.mu)
        / (T::one() + params.delta);
    let c0_limit = if params.delta > T::zero() {
        params.mu * params.mu / params.delta
    } else {
        T::infinity()
    };
    let tol = cst::<T>(ENDPOINT_TOL);
    let near = |v: T, target: T| (v - target).abs() <= tol * target.abs();
    Ok(MultiplierScan {
        r_grid: r_grid.to_vec(),
        h_ratio: ratios,
        m_lower,
        m_upper,
        limits,
        c0_stated,
        c0_limit,
        small_end_ok: near(limits.0, T::one()),
        large_end_matches_stated: near(limits.1, c0_stated),
        large_end_matches_limit: near(limits.1, c0_limit),
    })
}

/// `∫h|û|²` against `M·∫(1+r^{2(4−θ)})|û|²` and `M_sup·∫(1+r^{2(4−θ)})|û|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevEquivalence<T> {
    pub lhs: T,
    pub rhs_low: T,
    pub rhs_high: T,
    pub m_lower: T,
    pub m_upper: T,
    pub holds: bool,
}

/// Both sides for a real radial spectral profile `û`, physical-side.
/// `M` and `M_sup` come from [`default_r_grid`] together with the limits
/// `1` and `μ²/δ`.
pub fn sobolev_equivalence_check<T: Real>(
    params: &ModelParams<T>,
    u_hat: &RadialFunction<T>,
) -> Result<SobolevEquivalence<T>> {
    let scan = h_ratio_scan(params, &default_r_grid())?;
    let m_lower = scan.m_lower.min(T::one()).min(scan.c0_limit);
    let m_upper = scan.m_upper.max(T::one()).max(scan.c0_limit);
    let dim = params.dim;
    let e = cst::<T>(2.0) * (cst::<T>(4.0) - params.theta);
    let tol = cst::<T>(SCAN_TOL);
    let pf = plancherel_factor::<T>(dim);
    let (lhs, _) = u_hat.integrate_radial(dim, 2, cst(8.0), tol, |r| {
        let v = u_hat.value(r);
        h_symbol(params, r) * v * v
    })?;
    let (sob, _) = u_hat.integrate_radial(dim, 2, e, tol, |r| {
        let v = u_hat.value(r);
        (T::one() + r.powf(e)) * v * v
    })?;
    let (lhs, sob) = (lhs * pf, sob * pf);
    let slack = T::one() + cst(1e-10);
    let (rhs_low, rhs_high) = (m_lower * sob, m_upper * sob);
    Ok(SobolevEquivalence {
        lhs,
        rhs_low,
        rhs_high,
        m_lower,
        m_upper,
        holds: rhs_low <= lhs * slack && lhs <= rhs_high * slack,
    })
}

/// `Re ∫(1 + κr² + μr⁴)(v̂ conj(û) − û conj(v̂)) dξ` and the size
/// `∫(1 + κr² + μr⁴)|û||v̂| dξ` of either term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dissipativity<T> {
    pub residual: T,
    pub magnitude: T,
}

/// Evaluates the dissipativity pairing for complex radial spectral profiles
/// supported in `[0, r_max]`.
pub fn dissipativity_residual<T, U, V>(
    params: &ModelParams<T>,
    u_hat: U,
    v_hat: V,
    r_max: T,
) -> Result<Dissipativity<T>>
where
    T: Real,
    U: Fn(T) -> Complex<T> + Sync,
    V: Fn(T) -> Complex<T> + Sync,
{
    if !(r_max > T::zero()) {
        return Err(Error::Domain(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    let n1 = params.dim as i32 - 1;
    let pts: Vec<T> = (0..=64)
        .map(|i| r_max * from_usize::<T>(i) / cst(64.0))
        .collect();
    let res = integrate(
        |r: T| -> [T; 2] {
            let (u, v) = (u_hat(r), v_hat(r));
            let w = stiffness_plus_one(params, r) * r.powi(n1);
            let d = v * u.conj() - u * v.conj();
            [w * d.re, w * u.norm() * v.norm()]
        },
        &pts,
        QuadOptions::relative(cst(SCAN_TOL)).with_abs(T::min_positive_value()),
    );
    let omega = unit_sphere_area::<T>(params.dim)?;
    Ok(Dissipativity {
        residual: omega * res.value[0],
        magnitude: omega * res.value[1],
    })
}
