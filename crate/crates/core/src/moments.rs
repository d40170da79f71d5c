//! Moment decomposition `ŵ₁(ξ) = P + A(ξ) − iB(ξ)` of the velocity datum and
//! the weighted `L¹` norms that control the fluctuation.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{kernel_transform, RadialFunction};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::scalar::{cst, Real};
use crate::special::radial_kernel_minus_one;

const MOMENT_TOL: f64 = 1e-12;

/// `P`, `γ`, `‖u₁‖_{1,γ}` and the empirical constant `M` of
/// `|A − iB| <= M|ξ|^γ‖u₁‖_{1,γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentDecomposition<T> {
    pub p_moment: T,
    pub gamma_exp: T,
    pub weighted_norm: T,
    pub m_constant: T,
    pub l1_norm: T,
}

impl<T: Real> MomentDecomposition<T> {
    /// Computes all fields for a radial profile, with `M` taken over
    /// [`default_xi_grid`].
    pub fn from_profile(u1: &RadialFunction<T>, dim: usize, gamma_exp: T) -> Result<Self> {
        let p_moment = zeroth_moment(u1, dim)?;
        let l1_norm = l1_norm(u1, dim)?;
        let weighted_norm = weighted_l1_norm(u1, dim, gamma_exp)?;
        let slack = T::one() - cst::<T>(1e-10);
        if weighted_norm < l1_norm * slack || l1_norm < p_moment.abs() * slack {
            return Err(Error::Integrability(format!(
                "norm chain violated: |P| = {}, ‖u‖₁ = {l1_norm}, ‖u‖_(1,γ) = {weighted_norm}",
                p_moment.abs()
            )));
        }
        let m_constant = moment_bound_check(u1, dim, gamma_exp, &default_xi_grid())?;
        Ok(MomentDecomposition {
            p_moment,
            gamma_exp,
            weighted_norm,
            m_constant,
            l1_norm,
        })
    }

    /// The same decomposition for `c·u₁`.
    pub fn scaled(&self, c: T) -> Self {
        MomentDecomposition {
            p_moment: self.p_moment * c,
            weighted_norm: self.weighted_norm * c.abs(),
            l1_norm: self.l1_norm * c.abs(),
            ..*self
        }
    }
}

/// Log-spaced `|ξ|` from 1e-3 to 1e3, eight points per decade.
pub fn default_xi_grid<T: Real>() -> Vec<T> {
    (0..=48)
        .map(|i| cst::<T>(10f64.powf(-3.0 + i as f64 / 8.0)))
        .collect()
}

fn radial_integral<T, G>(
    u1: &RadialFunction<T>,
    dim: usize,
    extra_moment: T,
    g: G,
) -> Result<(T, T)>
where
    T: Real,
    G: Fn(T) -> T + Sync,
{
    u1.integrate_radial(dim, 1, extra_moment, cst(MOMENT_TOL), g)
}

/// `P = ∫ u₁ dx`.
pub fn zeroth_moment<T: Real>(u1: &RadialFunction<T>, dim: usize) -> Result<T> {
    let (p, err) = radial_integral(u1, dim, T::zero(), |r| u1.value(r))?;
    let l1 = l1_norm(u1, dim)?;
    if err > cst::<T>(1e-8) * l1 {
        return Err(Error::Integrability(format!(
            "moment error {err} exceeds 1e-8·‖u‖₁ = {}",
            l1 * cst(1e-8)
        )));
    }
    Ok(p)
}

/// `∫ u₁ dx` by the rectangle rule on the grid.
pub fn zeroth_moment_grid<T: Real>(u1: &GridField<T>) -> T {
    u1.integral().re
}

/// `‖u₁‖₁`.
pub fn l1_norm<T: Real>(u1: &RadialFunction<T>, dim: usize) -> Result<T> {
    Ok(radial_integral(u1, dim, T::zero(), |r| u1.value(r).abs())?.0)
}

/// `‖u₁‖_{1,γ} = ∫ (1 + |x|^γ)|u₁| dx`.
pub fn weighted_l1_norm<T: Real>(u1: &RadialFunction<T>, dim: usize, gamma_exp: T) -> Result<T> {
    check_gamma(gamma_exp)?;
    let (v, _) = radial_integral(u1, dim, gamma_exp, |r| {
        (T::one() + r.powf(gamma_exp)) * u1.value(r).abs()
    })?;
    Ok(v)
}

fn check_gamma<T: Real>(gamma_exp: T) -> Result<()> {
    if gamma_exp > T::zero() && gamma_exp <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "moment exponent must lie in (0, 1], got {gamma_exp}"
        )))
    }
}

/// `(A(ξ), B(ξ))` for a radial datum. `B` vanishes because `u₁` is even.
pub fn fluctuation<T: Real>(u1: &RadialFunction<T>, dim: usize, xi: &[T]) -> Result<(T, T)> {
    if xi.len() != dim {
        return Err(Error::Shape(format!(
            "ξ has {} components in dimension {dim}",
            xi.len()
        )));
    }
    let rho = xi.iter().fold(T::zero(), |s, &c| s + c * c).sqrt();
    Ok((fluctuation_radial(u1, dim, rho)?, T::zero()))
}

/// `A(|ξ|) = ω_n ∫ (K_n(|ξ|r) − 1) u₁(r) r^{n-1} dr`.
pub fn fluctuation_radial<T: Real>(u1: &RadialFunction<T>, dim: usize, rho: T) -> Result<T> {
    if rho == T::zero() {
        return Ok(T::zero());
    }
    kernel_transform(u1, dim, rho, |s| {
        radial_kernel_minus_one(dim, s).unwrap_or(T::nan())
    })
}

/// `(A(ξ), B(ξ))` for real grid data, by the rectangle rule.
pub fn fluctuation_grid<T: Real>(u1: &GridField<T>, xi: &[T]) -> Result<(T, T)> {
    if xi.len() != u1.dim {
        return Err(Error::Shape(format!(
            "ξ has {} components in dimension {}",
            xi.len(),
            u1.dim
        )));
    }
    let terms: Vec<(T, T)> = (0..u1.values.len())
        .into_par_iter()
        .map(|idx| {
            let x = u1.position(idx);
            let s = (0..u1.dim).fold(T::zero(), |acc, k| acc + x[k] * xi[k]);
            let half = (s * cst(0.5)).sin();
            let u = u1.values[idx].re;
            (-cst::<T>(2.0) * half * half * u, s.sin() * u)
        })
        .collect();
    let a: Vec<T> = terms.iter().map(|p| p.0).collect();
    let b: Vec<T> = terms.iter().map(|p| p.1).collect();
    let dv = u1.cell_volume();
    Ok((pairwise(&a) * dv, pairwise(&b) * dv))
}

fn pairwise<T: Real>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}

/// Largest `|A − iB| / (|ξ|^γ ‖u₁‖_{1,γ})` over the grid of `|ξ|` values.
/// Fails if the ratio exceeds the analytic cap `2^{1−γ} + 1`.
pub fn moment_bound_check<T: Real>(
    u1: &RadialFunction<T>,
    dim: usize,
    gamma_exp: T,
    xi_grid: &[T],
) -> Result<T> {
    check_gamma(gamma_exp)?;
    if xi_grid.is_empty() {
        return Err(Error::Domain("ξ grid is empty".into()));
    }
    if let Some(bad) = xi_grid.iter().find(|&&x| !(x > T::zero() && x.is_finite())) {
        return Err(Error::Domain(format!(
            "ξ grid must exclude 0 and be finite, found {bad}"
        )));
    }
    let norm = weighted_l1_norm(u1, dim, gamma_exp)?;
    if norm == T::zero() {
        return Err(Error::Degenerate("u₁ vanishes".into()));
    }
    let ratios = xi_grid
        .par_iter()
        .map(|&xi| Ok(fluctuation_radial(u1, dim, xi)?.abs() / (xi.powf(gamma_exp) * norm)))
        .collect::<Result<Vec<T>>>()?;
    let m = ratios.iter().fold(T::zero(), |m, &r| m.max(r));
    let cap = cst::<T>(2.0).powf(T::one() - gamma_exp) + T::one();
    if !m.is_finite() || m > cap * (T::one() + cst(1e-9)) {
        return Err(Error::Integrability(format!(
            "empirical M = {m} exceeds the analytic cap {cap}"
        )));
    }
    Ok(m)
}
