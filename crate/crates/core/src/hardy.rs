//! Hardy-type Rayleigh quotients, the test families on which they blow up
//! in low dimension, the Rellich quotient, and the energy identity of the
//! time-integrated solution.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{RadialFunction, RadialInitialData, Support};
use crate::error::{Error, Result};
use crate::evolution::{evolve_mode, time_integral_mode, ModePair};
use crate::growth::linear_fit;
use crate::model::{plancherel_factor, unit_sphere_area, ModelParams};
use crate::quadrature::{geometric_breakpoints, integrate, merge_breakpoints, QuadOptions};
use crate::radial_norm::{fmt17, radial_breakpoints};
use crate::scalar::{cst, from_usize, Real};

const QUOTIENT_TOL: f64 = 1e-12;
/// Inner radius, relative to the profile scale, below which singular
/// integrands are handled in closed form.
const INNER: f64 = 1e-8;
/// r² threshold of the blow-up fits.
pub const BLOWUP_R2: f64 = 0.95;
/// Relative rise over the scan below which a quotient counts as constant.
pub const CONSTANT_RISE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `(1 + log(1 + r))(1 + r)`.
    A1Weight,
    /// `r(1 + |log r|)`.
    AbsLogWeight,
    /// `r`.
    PlainAbs,
    /// `1`.
    ConstantOne,
    /// `r²`.
    AbsSquared,
}

impl WeightKind {
    pub fn vanishes_at_origin(self) -> bool {
        matches!(
            self,
            WeightKind::AbsLogWeight | WeightKind::PlainAbs | WeightKind::AbsSquared
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    pub dim: usize,
}

impl WeightFunction {
    pub fn new(kind: WeightKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(WeightFunction { kind, dim })
    }

    /// `w(r)`; rejected at `r = 0` for weights vanishing there.
    pub fn eval<T: Real>(&self, r: T) -> Result<T> {
        if r < T::zero() || (r == T::zero() && self.kind.vanishes_at_origin()) {
            return Err(Error::Domain(format!(
                "weight {:?} cannot be evaluated at r = {r}",
                self.kind
            )));
        }
        Ok(self.raw(r))
    }

    #[inline]
    fn raw<T: Real>(&self, r: T) -> T {
        match self.kind {
            WeightKind::A1Weight => (T::one() + r.ln_1p()) * (T::one() + r),
            WeightKind::AbsLogWeight => r * (T::one() + r.ln().abs()),
            WeightKind::PlainAbs => r,
            WeightKind::ConstantOne => T::one(),
            WeightKind::AbsSquared => r * r,
        }
    }

    /// Whether `∫₀ (u/w)² r^{n-1} dr` converges near 0 when `u(0) ≠ 0`.
    fn integrable_at_origin(&self) -> bool {
        match self.kind {
            WeightKind::A1Weight | WeightKind::ConstantOne => true,
            WeightKind::AbsLogWeight => self.dim >= 2,
            WeightKind::PlainAbs => self.dim >= 3,
            WeightKind::AbsSquared => self.dim >= 5,
        }
    }
}

fn quotient_points<T: Real>(u: &RadialFunction<T>, dim: usize) -> Result<(T, Vec<T>)> {
    let (cap, _) = u.truncation(2, from_usize::<T>(dim + 1), cst(1e-16))?;
    let inner = u.scale * cst(INNER);
    let mut pts = geometric_breakpoints(inner, cap, cst(2.0));
    pts.insert(0, T::zero());
    pts.extend(
        u.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > T::zero() && b < cap),
    );
    Ok((inner, merge_breakpoints(pts)))
}

fn checked_integral<T: Real, F: Fn(T) -> T + Sync>(f: F, pts: &[T], what: &str) -> Result<T> {
    let res = integrate(
        f,
        pts,
        QuadOptions::relative(cst(QUOTIENT_TOL)).with_abs(T::min_positive_value()),
    );
    if !res.converged || !res.value.is_finite() {
        return Err(Error::Integrability(format!(
            "{what} did not converge (error {} on {})",
            res.error, res.value
        )));
    }
    Ok(res.value)
}

/// `‖∇u‖² = ω_n ∫ u′² r^{n-1} dr`.
pub fn gradient_norm_sq<T: Real>(u: &RadialFunction<T>, dim: usize) -> Result<T> {
    if !u.has_derivative() {
        return Err(Error::Domain("profile has no first derivative".into()));
    }
    let (_, pts) = quotient_points(u, dim)?;
    let n1 = dim as i32 - 1;
    let v = checked_integral(
        |r: T| {
            let d = u.derivative(r).unwrap_or(T::nan());
            d * d * r.powi(n1)
        },
        &pts,
        "gradient norm",
    )?;
    Ok(unit_sphere_area::<T>(dim)? * v)
}

/// `‖u/w‖² = ω_n ∫ (u/w)² r^{n-1} dr`.
pub fn weighted_norm_sq<T: Real>(u: &RadialFunction<T>, weight: &WeightFunction) -> Result<T> {
    let dim = weight.dim;
    let u0 = u.value(T::zero());
    if u0 != T::zero() && !weight.integrable_at_origin() {
        return Err(Error::Integrability(format!(
            "‖u/w‖ diverges at the origin for weight {:?} in dimension {dim}",
            weight.kind
        )));
    }
    let (inner, pts) = quotient_points(u, dim)?;
    let n1 = dim as i32 - 1;
    let density = |r: T| {
        let q = u.value(r) / weight.raw(r);
        q * q * r.powi(n1)
    };
    let v = if weight.kind == WeightKind::AbsLogWeight && dim == 2 {
        // ∫₀^ε dr/(r(1 − log r)²) = 1/(1 − log ε), with u ≈ u(0) on [0, ε].
        let head = u0 * u0 / (T::one() - inner.ln());
        let outer: Vec<T> = pts.into_iter().filter(|&p| p >= inner).collect();
        head + checked_integral(density, &outer, "weighted norm")?
    } else {
        checked_integral(
            |r: T| {
                if r == T::zero() {
                    T::zero()
                } else {
                    density(r)
                }
            },
            &pts,
            "weighted norm",
        )?
    };
    Ok(unit_sphere_area::<T>(dim)? * v)
}

/// `‖u/w‖²/‖∇u‖²`.
pub fn rayleigh_quotient<T: Real>(u: &RadialFunction<T>, weight: &WeightFunction) -> Result<T> {
    let den = gradient_norm_sq(u, weight.dim)?;
    if !(den > T::zero()) {
        return Err(Error::Degenerate("‖∇u‖ = 0".into()));
    }
    Ok(weighted_norm_sq(u, weight)? / den)
}

/// `‖u/|x|²‖²/‖Δu‖²` with the radial Laplacian `u″ + (n−1)u′/r`.
pub fn rellich_quotient<T: Real>(u: &RadialFunction<T>, dim: usize) -> Result<T> {
    if dim < 5 {
        return Err(Error::Precondition(format!(
            "the Rellich quotient needs n >= 5, got n = {dim}"
        )));
    }
    if !u.has_second_derivative() {
        return Err(Error::Domain("profile has no second derivative".into()));
    }
    let weight = WeightFunction::new(WeightKind::AbsSquared, dim)?;
    let (_, pts) = quotient_points(u, dim)?;
    let n1 = from_usize::<T>(dim - 1);
    let lap = checked_integral(
        |r: T| {
            if r == T::zero() {
                return T::zero();
            }
            let l = u.second_derivative(r).unwrap_or(T::nan())
                + n1 * u.derivative(r).unwrap_or(T::nan()) / r;
            l * l * r.powi(dim as i32 - 1)
        },
        &pts,
        "Laplacian norm",
    )?;
    if !(lap > T::zero()) {
        return Err(Error::Degenerate("‖Δu‖ = 0".into()));
    }
    Ok(weighted_norm_sq(u, &weight)? / (unit_sphere_area::<T>(dim)? * lap))
}

/// The classical Hardy constant `(2/(n−2))²` for `n >= 3`.
pub fn hardy_constant<T: Real>(dim: usize) -> Option<T> {
    (dim >= 3).then(|| (cst::<T>(2.0) / from_usize::<T>(dim - 2)).powi(2))
}

/// The classical Rellich constant `(4/(n(n−4)))²` for `n >= 5`.
pub fn rellich_constant<T: Real>(dim: usize) -> Option<T> {
    (dim >= 5).then(|| (cst::<T>(4.0) / from_usize::<T>(dim * (dim - 4))).powi(2))
}

/// `u_R = 1` on `[0, 1]`, `log(R/r)/log R` on `[1, R]`, `0` beyond, with
/// `‖∇u_R‖²_{L²(ℝ²)} = 2π/log R`.
pub fn capacity_family<T: Real>(big_r: T) -> Result<RadialFunction<T>> {
    if !(big_r > T::E()) || !big_r.is_finite() {
        return Err(Error::Domain(format!(
            "capacity family needs R > e, got {big_r}"
        )));
    }
    let lr = big_r.ln();
    let inside = move |r: T| r > T::one() && r < big_r;
    Ok(RadialFunction::new(
        Arc::new(move |r: T| {
            if r <= T::one() {
                T::one()
            } else if r < big_r {
                (big_r / r).ln() / lr
            } else {
                T::zero()
            }
        }),
        Some(Arc::new(move |r: T| {
            if inside(r) {
                -T::one() / (r * lr)
            } else {
                T::zero()
            }
        })),
        Some(Arc::new(move |r: T| {
            if inside(r) {
                T::one() / (r * r * lr)
            } else {
                T::zero()
            }
        })),
        Support::Compact { radius: big_r },
        vec![T::one(), big_r],
        T::one(),
    ))
}

/// `φ(r/R)` with the fixed bump `φ(r) = exp(−r²)`.
pub fn dilation_family<T: Real>(big_r: T) -> Result<RadialFunction<T>> {
    if !(big_r > T::zero()) {
        return Err(Error::Domain(format!("dilation needs R > 0, got {big_r}")));
    }
    Ok(RadialFunction::gaussian(T::one(), T::one())?.dilated(big_r))
}

/// Quotients along a one-parameter family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientTrace<T> {
    pub family_param: Vec<T>,
    pub quotients: Vec<T>,
    pub gradient_norms_sq: Vec<T>,
}

impl<T: Real> QuotientTrace<T> {
    /// CSV with header `R,quotient,grad_norm_sq`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "R,quotient,grad_norm_sq")?;
        for i in 0..self.family_param.len() {
            writeln!(
                out,
                "{},{},{}",
                fmt17(self.family_param[i]),
                fmt17(self.quotients[i]),
                fmt17(self.gradient_norms_sq[i])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFamily {
    Capacity,
    Dilation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnboundedReason {
    /// Linear growth in `log R`.
    LinearInLogR,
    /// Power growth in `R`.
    PowerInR,
    /// `‖u/w‖` is infinite for every member.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum BlowupVerdict {
    Bounded,
    Unbounded(UnboundedReason),
}

/// Slope and r² of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupScan<T> {
    pub weight: WeightFunction,
    pub family: TestFamily,
    /// Empty when the quotient diverges.
    pub trace: QuotientTrace<T>,
    /// Quotient against `log R`.
    pub linear_fit: Option<LineFit<T>>,
    /// `log` quotient against `log R`.
    pub power_fit: Option<LineFit<T>>,
    pub verdict: BlowupVerdict,
}

/// Scans the quotient over `R` on the capacity family (`n = 2`) or the
/// dilation family (otherwise). The `|x|²` weight uses the Rellich quotient.
///
/// Unbounded when the quotient rises linearly in `log R` or as a power of
/// `R` (positive slope, r² >= 0.95) by more than a relative `1e-6`.
pub fn blowup_scan<T: Real>(weight: &WeightFunction, r_grid: &[T]) -> Result<BlowupScan<T>> {
    if r_grid.len() < 5 || r_grid.windows(2).any(|w| !(w[1] > w[0])) || !(r_grid[0] > T::zero()) {
        return Err(Error::Domain(
            "R grid must be increasing, positive, with at least 5 points".into(),
        ));
    }
    if (r_grid[r_grid.len() - 1] / r_grid[0]).ln() < cst(3.0 - 1e-12) {
        return Err(Error::Domain(
            "R grid must span at least 3 e-foldings".into(),
        ));
    }
    let dim = weight.dim;
    let family = if dim == 2 {
        TestFamily::Capacity
    } else {
        TestFamily::Dilation
    };
    let member = |r: T| match family {
        TestFamily::Capacity => capacity_family(r),
        TestFamily::Dilation => dilation_family(r),
    };
    let rows: Vec<Result<(T, T)>> = r_grid
        .par_iter()
        .map(|&r| {
            let u = member(r)?;
            let g = gradient_norm_sq(&u, dim)?;
            let q = if weight.kind == WeightKind::AbsSquared {
                rellich_quotient(&u, dim)?
            } else {
                weighted_norm_sq(&u, weight)? / g
            };
            Ok((q, g))
        })
        .collect();
    let mut quotients = Vec::with_capacity(rows.len());
    let mut grads = Vec::with_capacity(rows.len());
    for row in rows {
        match row {
            Ok((q, g)) => {
                quotients.push(q);
                grads.push(g);
            }
            Err(Error::Integrability(_)) if quotients.is_empty() => {
                return Ok(BlowupScan {
                    weight: *weight,
                    family,
                    trace: QuotientTrace {
                        family_param: Vec::new(),
                        quotients: Vec::new(),
                        gradient_norms_sq: Vec::new(),
                    },
                    linear_fit: None,
                    power_fit: None,
                    verdict: BlowupVerdict::Unbounded(UnboundedReason::Divergent),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let x: Vec<T> = r_grid.iter().map(|r| r.ln()).collect();
    let fit = |y: &[T]| {
        let (slope, intercept, r_squared) = linear_fit(&x, y);
        LineFit {
            slope,
            intercept,
            r_squared,
        }
    };
    let lin = fit(&quotients);
    let logs: Vec<T> = quotients.iter().map(|q| q.ln()).collect();
    let pow = fit(&logs);
    let span = x[x.len() - 1] - x[0];
    let mean = quotients.iter().fold(T::zero(), |s, &q| s + q) / from_usize::<T>(quotients.len());
    let r2 = cst::<T>(BLOWUP_R2);
    let rise = cst::<T>(CONSTANT_RISE);
    let verdict = if lin.slope > T::zero() && lin.r_squared >= r2 && lin.slope * span > rise * mean
    {
        BlowupVerdict::Unbounded(UnboundedReason::LinearInLogR)
    } else if pow.slope > T::zero() && pow.r_squared >= r2 && pow.slope * span > rise {
        BlowupVerdict::Unbounded(UnboundedReason::PowerInR)
    } else {
        BlowupVerdict::Bounded
    };
    Ok(BlowupScan {
        weight: *weight,
        family,
        trace: QuotientTrace {
            family_param: r_grid.to_vec(),
            quotients,
            gradient_norms_sq: grads,
        },
        linear_fit: Some(lin),
        power_fit: Some(pow),
        verdict,
    })
}

/// Both sides of the energy identity for `v = ∫₀ᵗ u` with `u₀ = 0`, `θ = 1`,
/// `n = 2`:
/// `½‖v_t‖² + δ/2‖∇v_t‖² + μ/2‖Δv‖² + κ/2‖∇v‖² = ((I − δΔ)u₁, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity<T> {
    pub t: T,
    pub lhs: T,
    pub rhs: T,
    /// `|lhs − rhs|/lhs`, zero when both sides vanish.
    pub residual: T,
    /// `½‖v_t‖² = ½‖u(t)‖²`.
    pub half_velocity_norm: T,
}

pub fn energy_identity_check<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
) -> Result<EnergyIdentity<T>> {
    if params.theta != T::one() || params.dim != 2 {
        return Err(Error::Precondition(format!(
            "the energy identity needs θ = 1 and n = 2, got θ = {} and n = {}",
            params.theta, params.dim
        )));
    }
    if data.has_w0() {
        return Err(Error::Precondition(
            "the energy identity needs u₀ = 0".into(),
        ));
    }
    if t < T::zero() {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == T::zero() {
        return Ok(EnergyIdentity {
            t,
            lhs: T::zero(),
            rhs: T::zero(),
            residual: T::zero(),
            half_velocity_norm: T::zero(),
        });
    }
    let tol = cst::<T>(QUOTIENT_TOL);
    let plan = radial_breakpoints(params, data, t, tol, 8, cst(2.0))?;
    let half = cst::<T>(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let res = integrate(
        |r: T| -> [T; 3] {
            let mode = ModePair {
                w0: zero,
                w1: data.w1(r),
                xi_norm: r,
            };
            let vt = evolve_mode(params, &mode, t).0;
            let v =
                time_integral_mode(params, &mode, t).unwrap_or(Complex::new(T::nan(), T::nan()));
            let lhs = half * params.inertia(r) * vt.norm_sqr()
                + half * params.stiffness(r) * v.norm_sqr();
            let rhs = params.inertia(r) * (mode.w1 * v.conj()).re;
            [lhs * r, rhs * r, half * vt.norm_sqr() * r]
        },
        &plan.points,
        QuadOptions::relative(tol).with_abs(T::min_positive_value()),
    );
    if !res.converged {
        return Err(Error::Integrability(format!(
            "energy identity quadrature error {}",
            res.error
        )));
    }
    let scale = unit_sphere_area::<T>(2)? * plancherel_factor::<T>(2);
    let (lhs, rhs, kin) = (
        res.value[0] * scale,
        res.value[1] * scale,
        res.value[2] * scale,
    );
    let residual = if lhs == T::zero() && rhs == T::zero() {
        T::zero()
    } else {
        (lhs - rhs).abs() / lhs.abs()
    };
    Ok(EnergyIdentity {
        t,
        lhs,
        rhs,
        residual,
        half_velocity_norm: kin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn w(kind: WeightKind, dim: usize) -> WeightFunction {
        WeightFunction::new(kind, dim).unwrap()
    }

    fn e_grid(exps: &[f64]) -> Vec<f64> {
        exps.iter().map(|e| e.exp()).collect()
    }

    #[test]
    fn weights_reject_the_origin_where_they_vanish() {
        assert!(w(WeightKind::PlainAbs, 3).eval(0.0).is_err());
        assert!(w(WeightKind::AbsLogWeight, 2).eval(0.0).is_err());
        assert_eq!(w(WeightKind::A1Weight, 2).eval(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            w(WeightKind::AbsLogWeight, 2).eval(0.5).unwrap(),
            0.5 * (1.0 + 2f64.ln())
        );
        assert!(w(WeightKind::A1Weight, 2).eval(1e6).unwrap() > 0.0);
    }

    #[test]
    fn gaussian_hardy_quotient_is_below_the_classical_constant() {
        let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
        let q = rayleigh_quotient(&u, &w(WeightKind::PlainAbs, 3)).unwrap();
        assert!(q > 0.0 && q <= hardy_constant::<f64>(3).unwrap());
        let q3 = rayleigh_quotient(&u.scaled(3.0), &w(WeightKind::PlainAbs, 3)).unwrap();
        assert_relative_eq!(q, q3, max_relative = 1e-12);
        // For exp(-r²) in n = 3: ‖u/r‖² = 4π·√(π/2)/2, ‖u′‖² = 4π·3√(π/2)/8.
        assert_relative_eq!(q, 4.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn divergent_numerators_are_reported() {
        let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
        for (k, d) in [
            (WeightKind::PlainAbs, 1),
            (WeightKind::PlainAbs, 2),
            (WeightKind::AbsSquared, 4),
        ] {
            assert!(matches!(
                rayleigh_quotient(&u, &w(k, d)),
                Err(Error::Integrability(_))
            ));
        }
        let bump = RadialFunction::<f64>::annular_bump(2.0, 1.0).unwrap();
        assert!(rayleigh_quotient(&bump, &w(WeightKind::PlainAbs, 1))
            .unwrap()
            .is_finite());
        assert!(rayleigh_quotient(&bump, &w(WeightKind::AbsLogWeight, 1))
            .unwrap()
            .is_finite());
    }

    #[test]
    fn capacity_family_closed_forms() {
        let big_r = 5f64.exp();
        let u = capacity_family(big_r).unwrap();
        assert_eq!(u.value(1.0), 1.0);
        assert_eq!(u.value(big_r), 0.0);
        let g = gradient_norm_sq(&u, 2).unwrap();
        assert!((g - 2.0 * std::f64::consts::PI / 5.0).abs() <= 1e-8);
        assert!(matches!(capacity_family(2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn a1_quotient_on_the_capacity_family_grows_with_log_r() {
        let weight = w(WeightKind::A1Weight, 2);
        // Floor ∫₀¹ 2πr/w² dr, by a fine midpoint rule.
        let n = 200_000;
        let floor: f64 = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) / n as f64;
                2.0 * std::f64::consts::PI * r / weight.eval(r).unwrap().powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let q = rayleigh_quotient(&capacity_family(10f64.exp()).unwrap(), &weight).unwrap();
        assert!(q >= 0.1 * floor * 10.0 / (2.0 * std::f64::consts::PI));
        let scan = blowup_scan(&weight, &e_grid(&[3.0, 5.0, 8.0, 12.0, 16.0])).unwrap();
        assert_eq!(
            scan.verdict,
            BlowupVerdict::Unbounded(UnboundedReason::LinearInLogR)
        );
        assert!(scan.linear_fit.unwrap().slope >= floor / (2.0 * std::f64::consts::PI));
    }

    #[test]
    fn scan_verdicts_match_the_known_cases() {
        let grid = e_grid(&[3.0, 5.0, 8.0, 12.0, 16.0]);
        let unbounded = [
            (WeightKind::AbsLogWeight, 2),
            (WeightKind::PlainAbs, 1),
            (WeightKind::ConstantOne, 1),
            (WeightKind::ConstantOne, 2),
        ];
        for (k, d) in unbounded {
            let s = blowup_scan(&w(k, d), &grid).unwrap();
            assert!(
                matches!(s.verdict, BlowupVerdict::Unbounded(_)),
                "{k:?} n={d}: {:?}",
                s.verdict
            );
        }
        let plain3 = blowup_scan(&w(WeightKind::PlainAbs, 3), &grid).unwrap();
        assert_eq!(plain3.verdict, BlowupVerdict::Bounded);
        let q = &plain3.trace.quotients;
        assert!(q.iter().all(|v| (v / q[0] - 1.0).abs() <= 1e-9));
        let rellich5 = blowup_scan(&w(WeightKind::AbsSquared, 5), &grid).unwrap();
        assert_eq!(rellich5.verdict, BlowupVerdict::Bounded);
        let one = blowup_scan(&w(WeightKind::ConstantOne, 1), &grid).unwrap();
        assert_eq!(
            one.verdict,
            BlowupVerdict::Unbounded(UnboundedReason::PowerInR)
        );
        assert_relative_eq!(one.power_fit.unwrap().slope, 2.0, max_relative = 1e-8);
        assert!(blowup_scan(&w(WeightKind::A1Weight, 2), &e_grid(&[3.0, 4.0, 5.0])).is_err());
        assert!(blowup_scan(
            &w(WeightKind::A1Weight, 2),
            &e_grid(&[3.0, 3.5, 4.0, 4.5, 5.0])
        )
        .is_err());
    }

    #[test]
    fn rellich_quotient_examples() {
        let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
        let q = rellich_quotient(&u, 5).unwrap();
        assert!(q > 0.0 && q <= rellich_constant::<f64>(5).unwrap());
        assert_relative_eq!(
            q,
            rellich_quotient(&u.scaled(-2.0), 5).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            q,
            rellich_quotient(&u.dilated(7.0), 5).unwrap(),
            max_relative = 1e-9
        );
        assert!(matches!(
            rellich_quotient(&u, 4),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn energy_identity_holds_with_the_corrected_source() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 2).unwrap();
        let data = RadialInitialData::gaussian_velocity(2, 1.0, 1.0).unwrap();
        for t in [0.5, 10.0, 1e3] {
            let e = energy_identity_check(&p, &data, t).unwrap();
            assert!(e.residual <= 1e-8, "t = {t}: {e:?}");
        }
        let zero = energy_identity_check(&p, &data, 0.0).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
        let early = energy_identity_check(&p, &data, 10.0).unwrap();
        let late = energy_identity_check(&p, &data, 1e3).unwrap();
        assert!(late.lhs > early.lhs && late.half_velocity_norm > early.half_velocity_norm);
        let theta2 = ModelParams::unit(2).unwrap();
        assert!(matches!(
            energy_identity_check(&theta2, &data, 1.0),
            Err(Error::Precondition(_))
        ));
        let disp = RadialInitialData::gaussian_displacement(2, 1.0, 1.0).unwrap();
        assert!(matches!(
            energy_identity_check(&p, &disp, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn quotient_trace_csv_has_a_header_and_one_row_per_member() {
        let s = blowup_scan(
            &w(WeightKind::PlainAbs, 3),
            &e_grid(&[0.0, 1.0, 2.0, 3.0, 4.0]),
        )
        .unwrap();
        let mut buf = Vec::new();
        s.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("R,quotient,grad_norm_sq"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn per_mode_identity_is_algebraic(r in 1e-3f64..50.0, t in 0.0f64..1e4, d in 0.1f64..3.0, m in 0.1f64..3.0, k in 0.1f64..3.0) {
            let p = ModelParams::new(d, m, k, 1.0, 2).unwrap();
            let mode = ModePair { w0: Complex::new(0.0, 0.0), w1: Complex::new(0.7, -0.2), xi_norm: r };
            let vt = evolve_mode(&p, &mode, t).0;
            let v = time_integral_mode(&p, &mode, t).unwrap();
            let lhs = 0.5 * p.inertia(r) * vt.norm_sqr() + 0.5 * p.stiffness(r) * v.norm_sqr();
            let rhs = p.inertia(r) * (mode.w1 * v.conj()).re;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn quotient_is_scale_invariant(c in 0.01f64..100.0) {
            let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
            let weight = w(WeightKind::A1Weight, 2);
            let a = rayleigh_quotient(&u, &weight).unwrap();
            let b = rayleigh_quotient(&u.scaled(c), &weight).unwrap();
            prop_assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
}
