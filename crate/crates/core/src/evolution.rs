//! Exact per-mode solution operator, its time integral, and the conserved
//! energy.

use num_complex::Complex;
use serde::Serialize;

use crate::data::RadialInitialData;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::model::{plancherel_factor, ModelParams};
use crate::quadrature::{integrate, QuadOptions};
use crate::radial_norm::radial_breakpoints;
use crate::scalar::{cst, Real};
use crate::special::{sinc, versine_ratio};

/// Fourier data of one mode at frequency magnitude `xi_norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePair<T> {
    pub w0: Complex<T>,
    pub w1: Complex<T>,
    pub xi_norm: T,
}

impl<T: Real> ModePair<T> {
    pub fn new(w0: Complex<T>, w1: Complex<T>, xi_norm: T) -> Result<Self> {
        let finite = [w0.re, w0.im, w1.re, w1.im, xi_norm]
            .iter()
            .all(|v| v.is_finite());
        if !finite || xi_norm < T::zero() {
            return Err(Error::Domain(
                "mode values must be finite with |ξ| >= 0".into(),
            ));
        }
        Ok(ModePair { w0, w1, xi_norm })
    }
}

/// `(cos(t f(r)), sin(t f(r))/f(r))`, the second filled with `t` at `f = 0`.
#[inline]
pub fn multipliers<T: Real>(params: &ModelParams<T>, t: T, r: T) -> (T, T) {
    let f = params.f(r);
    let x = t * f;
    (x.cos(), t * sinc(x))
}

/// `(w(t), w_t(t))` for one mode.
pub fn evolve_mode<T: Real>(
    params: &ModelParams<T>,
    mode: &ModePair<T>,
    t: T,
) -> (Complex<T>, Complex<T>) {
    if t == T::zero() {
        return (mode.w0, mode.w1);
    }
    let f = params.f(mode.xi_norm);
    let x = t * f;
    let (s, c) = x.sin_cos();
    let prop = t * sinc(x);
    let w = mode.w0 * c + mode.w1 * prop;
    let wt = mode.w0 * (-f * s) + mode.w1 * c;
    (w, wt)
}

/// `v̂(t) = ∫₀ᵗ ŵ(s) ds = (1 - cos(tf))/f²·ŵ₁` for a mode with `ŵ₀ = 0`.
pub fn time_integral_mode<T: Real>(
    params: &ModelParams<T>,
    mode: &ModePair<T>,
    t: T,
) -> Result<Complex<T>> {
    if mode.w0 != Complex::new(T::zero(), T::zero()) {
        return Err(Error::Precondition("time integral requires w0 = 0".into()));
    }
    if t < T::zero() {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    Ok(mode.w1 * (t * t * versine_ratio(t * params.f(mode.xi_norm))))
}

/// `(1 + δr^{2θ})|w_t|² + (μr⁴ + κr²)|w|²`, twice the energy density of a mode.
#[inline]
pub fn mode_energy<T: Real>(params: &ModelParams<T>, r: T, w: Complex<T>, wt: Complex<T>) -> T {
    params.inertia(r) * wt.norm_sqr() + params.stiffness(r) * w.norm_sqr()
}

/// The four quadratic terms of the conserved energy and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport<T> {
    /// `½‖u_t‖²`
    pub kinetic: T,
    /// `δ/2 ‖(−Δ)^{θ/2} u_t‖²`
    pub fractional_kinetic: T,
    /// `μ/2 ‖Δu‖²`
    pub bending: T,
    /// `κ/2 ‖∇u‖²`
    pub stretching: T,
    pub total: T,
}

impl<T: Real> EnergyReport<T> {
    fn from_parts(p: [T; 4]) -> Self {
        EnergyReport {
            kinetic: p[0],
            fractional_kinetic: p[1],
            bending: p[2],
            stretching: p[3],
            total: (p[0] + p[1]) + (p[2] + p[3]),
        }
    }

    /// Relative change of the total against a reference report.
    pub fn drift_from(&self, reference: &EnergyReport<T>) -> T {
        if reference.total == T::zero() {
            return self.total.abs();
        }
        ((self.total - reference.total) / reference.total).abs()
    }
}

/// The solution state whose energy is requested.
pub enum EnergyState<'a, T> {
    /// Radial data evolved to time `t`, integrated to relative accuracy `rel_tol`.
    Radial {
        data: &'a RadialInitialData<T>,
        t: T,
        rel_tol: T,
    },
    /// A grid state `(u, u_t)`.
    Grid {
        u: &'a GridField<T>,
        u_t: &'a GridField<T>,
    },
}

/// Physical-side energy of a state, computed spectrally.
pub fn total_energy<T: Real>(
    params: &ModelParams<T>,
    state: EnergyState<'_, T>,
) -> Result<EnergyReport<T>> {
    match state {
        EnergyState::Radial { data, t, rel_tol } => radial_energy(params, data, t, rel_tol),
        EnergyState::Grid { u, u_t } => crate::grid::grid_energy(params, u, u_t),
    }
}

fn energy_density<T: Real>(params: &ModelParams<T>, r: T, w: Complex<T>, wt: Complex<T>) -> [T; 4] {
    let half = cst::<T>(0.5);
    let r2 = r * r;
    [
        half * wt.norm_sqr(),
        half * params.delta * r.powf(cst::<T>(2.0) * params.theta) * wt.norm_sqr(),
        half * params.mu * r2 * r2 * w.norm_sqr(),
        half * params.kappa * r2 * w.norm_sqr(),
    ]
}

fn radial_energy<T: Real>(
    params: &ModelParams<T>,
    data: &RadialInitialData<T>,
    t: T,
    rel_tol: T,
) -> Result<EnergyReport<T>> {
    if t < T::zero() {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let n = params.dim;
    // The energy integrand carries up to r⁴ more than the norm integrand.
    let plan = radial_breakpoints(params, data, t, rel_tol, 8, cst(4.0))?;
    let omega = crate::model::unit_sphere_area::<T>(n)?;
    let res = integrate(
        |r: T| {
            let mode = ModePair {
                w0: data.w0(r),
                w1: data.w1(r),
                xi_norm: r,
            };
            let (w, wt) = evolve_mode(params, &mode, t);
            let jac = r.powi(n as i32 - 1);
            let e = energy_density(params, r, w, wt);
            [e[0] * jac, e[1] * jac, e[2] * jac, e[3] * jac]
        },
        &plan.points,
        QuadOptions::relative(rel_tol),
    );
    let scale = omega * plancherel_factor::<T>(n);
    let report = EnergyReport::from_parts(res.value.map(|v| v * scale));
    // The tail bound covers twice the energy density beyond r_max.
    if plan.tail * scale > rel_tol * report.total {
        log::warn!("energy tail beyond r = {} may exceed rel_tol", plan.r_max);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(dim: usize) -> ModelParams<f64> {
        ModelParams::unit(dim).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn multiplier_examples() {
        let p = unit(1);
        assert_eq!(multipliers(&p, 5.0, 0.0), (1.0, 5.0));
        let (cs, pr) = multipliers(&p, std::f64::consts::PI, 1.0);
        assert_relative_eq!(cs, -1.0);
        assert!(pr.abs() < 1e-15);
        for i in 0..50 {
            for j in 0..50 {
                let t = 0.01 * 1.3f64.powi(i);
                let r = 1e-3 * 1.3f64.powi(j);
                assert!(multipliers(&p, t, r).1.abs() <= t * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn evolve_mode_examples() {
        let p = unit(1);
        let m = ModePair::new(c(0.3, -1.0), c(2.0, 0.5), 0.7).unwrap();
        assert_eq!(evolve_mode(&p, &m, 0.0), (m.w0, m.w1));
        let z = ModePair::new(c(0.0, 0.0), c(1.0, 0.0), 0.0).unwrap();
        assert_eq!(evolve_mode(&p, &z, 7.0).0, c(7.0, 0.0));
        let e0 = mode_energy(&p, m.xi_norm, m.w0, m.w1);
        for t in [1.0, 1e2, 1e6] {
            let (w, wt) = evolve_mode(&p, &m, t);
            assert_relative_eq!(mode_energy(&p, m.xi_norm, w, wt), e0, max_relative = 1e-12);
        }
    }

    #[test]
    fn time_integral_examples() {
        let p = unit(1);
        let m0 = ModePair::new(c(0.0, 0.0), c(1.0, 0.0), 0.0).unwrap();
        assert_eq!(time_integral_mode(&p, &m0, 2.0).unwrap(), c(2.0, 0.0));
        let m1 = ModePair::new(c(0.0, 0.0), c(1.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(
            time_integral_mode(&p, &m1, std::f64::consts::PI)
                .unwrap()
                .re,
            2.0,
            max_relative = 1e-15
        );
        let bad = ModePair::new(c(1.0, 0.0), c(1.0, 0.0), 1.0).unwrap();
        assert!(time_integral_mode(&p, &bad, 1.0).is_err());

        let m = ModePair::new(c(0.0, 0.0), c(1.0, 0.0), 0.5).unwrap();
        let (t, h) = (10.0, 1e-5);
        let fd = (time_integral_mode(&p, &m, t + h).unwrap()
            - time_integral_mode(&p, &m, t - h).unwrap())
            / (2.0 * h);
        let w = evolve_mode(&p, &m, t).0;
        assert_relative_eq!(fd.re, w.re, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_velocity_energy_at_rest() {
        // u1 = exp(-x²): kinetic = ½∫exp(-2x²) = ½√(π/2); no potential energy at t = 0.
        let p = unit(1);
        let d = RadialInitialData::gaussian_velocity(1, 1.0, 1.0).unwrap();
        let e = total_energy(
            &p,
            EnergyState::Radial {
                data: &d,
                t: 0.0,
                rel_tol: 1e-12,
            },
        )
        .unwrap();
        assert_relative_eq!(
            e.kinetic,
            0.5 * (std::f64::consts::PI / 2.0).sqrt(),
            max_relative = 1e-10
        );
        assert_eq!(e.bending, 0.0);
        assert_eq!(e.stretching, 0.0);
        let z = RadialInitialData::compact_band(0.0, 1.0, 0.0).unwrap();
        let ez = total_energy(
            &p,
            EnergyState::Radial {
                data: &z,
                t: 3.0,
                rel_tol: 1e-10,
            },
        )
        .unwrap();
        assert_eq!(ez.total, 0.0);
    }

    #[test]
    fn radial_energy_is_conserved() {
        for dim in [1, 2, 3] {
            let p = unit(dim);
            let d = RadialInitialData::gaussian_velocity(dim, 1.0, 1.0).unwrap();
            let e0 = total_energy(
                &p,
                EnergyState::Radial {
                    data: &d,
                    t: 0.0,
                    rel_tol: 1e-13,
                },
            )
            .unwrap();
            for t in [1.0, 1e3, 1e6] {
                let e = total_energy(
                    &p,
                    EnergyState::Radial {
                        data: &d,
                        t,
                        rel_tol: 1e-13,
                    },
                )
                .unwrap();
                assert!(
                    e.drift_from(&e0) <= 1e-10,
                    "dim {dim} t {t}: drift {}",
                    e.drift_from(&e0)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn per_mode_energy_is_invariant(r in 0.0f64..20.0, t in 0.0f64..1e6,
                                       a in -3.0f64..3.0, b in -3.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = unit(2);
            let m = ModePair::new(c(a, b), c(x, y), r).unwrap();
            let e0 = mode_energy(&p, r, m.w0, m.w1);
            let (w, wt) = evolve_mode(&p, &m, t);
            let e = mode_energy(&p, r, w, wt);
            prop_assert!((e - e0).abs() <= 1e-12 * e0.max(1e-300) + 1e-300);
        }

        #[test]
        fn evolution_is_linear(r in 0.0f64..10.0, t in 0.0f64..1e4, k in -2.0f64..2.0) {
            let p = unit(1);
            let m1 = ModePair::new(c(1.0, 0.5), c(-0.3, 2.0), r).unwrap();
            let m2 = ModePair::new(c(0.2, -1.0), c(1.5, 0.1), r).unwrap();
            let sum = ModePair::new(m1.w0 * k + m2.w0, m1.w1 * k + m2.w1, r).unwrap();
            let (a, at) = evolve_mode(&p, &m1, t);
            let (b, bt) = evolve_mode(&p, &m2, t);
            let (s, st) = evolve_mode(&p, &sum, t);
            let tol = 1e-12 * (1.0 + t);
            prop_assert!((s - (a * k + b)).norm() <= tol * (1.0 + s.norm()));
            prop_assert!((st - (at * k + bt)).norm() <= tol * (1.0 + st.norm()));
        }

        #[test]
        fn group_property(r in 1e-3f64..10.0, t1 in 0.0f64..1e3, s in 0.0f64..1e3) {
            let p = unit(1);
            let m = ModePair::new(c(0.7, 0.0), c(0.0, -1.2), r).unwrap();
            let (w1, wt1) = evolve_mode(&p, &m, t1);
            let mid = ModePair::new(w1, wt1, r).unwrap();
            let (a, at) = evolve_mode(&p, &mid, s);
            let (b, bt) = evolve_mode(&p, &m, t1 + s);
            let scale = 1.0 + b.norm() + bt.norm();
            prop_assert!((a - b).norm() <= 1e-10 * scale);
            prop_assert!((at - bt).norm() <= 1e-10 * scale);
        }
    }
}
