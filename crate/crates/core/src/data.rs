//! Radially symmetric initial data: spectral profiles for the evolution and
//! physical-space profiles for moments and Hardy quotients.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::unit_sphere_area;
use crate::quadrature::{integrate, merge_breakpoints, QuadOptions};
use crate::scalar::{cst, from_usize, Real};
use crate::special::{gamma, gaussian_moment_tail, radial_kernel};

pub type SpectralFn<T> = Arc<dyn Fn(T) -> Complex<T> + Send + Sync>;
pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// How fast the spectral profiles decay; determines whether the truncated
/// tail of a radial integral can be certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayClass<T> {
    /// `|ŵ(r)| <= amplitude·exp(-rate·r²)` for both profiles.
    GaussianType { amplitude: T, rate: T },
    /// Both profiles vanish outside `[r_lo, r_hi]`.
    CompactBand { r_lo: T, r_hi: T },
    /// No usable tail information.
    Generic,
}

/// Spectral initial data `ŵ₀(r)`, `ŵ₁(r)` of a radial solution.
#[derive(Clone)]
pub struct RadialInitialData<T> {
    w0: Option<SpectralFn<T>>,
    w1: Option<SpectralFn<T>>,
    pub decay: DecayClass<T>,
    /// Radius below which the profiles have their features; caps panel widths.
    pub scale: T,
    pub label: String,
    /// Physical-space `u₁`, when known.
    pub u1_physical: Option<RadialFunction<T>>,
    /// Physical-space `u₀`, when known.
    pub u0_physical: Option<RadialFunction<T>>,
}

impl<T: Real> fmt::Debug for RadialInitialData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialInitialData")
            .field("label", &self.label)
            .field("decay", &self.decay)
            .field("scale", &self.scale)
            .field("has_w0", &self.w0.is_some())
            .field("has_w1", &self.w1.is_some())
            .finish()
    }
}

fn gaussian_hat<T: Real>(dim: usize, a: T, c: T) -> (T, T) {
    // c·exp(-a|x|²) has transform c(π/a)^{n/2} exp(-|ξ|²/(4a)).
    let amp = c * (T::PI() / a).powf(from_usize::<T>(dim) * cst(0.5));
    (amp, T::one() / (cst::<T>(4.0) * a))
}

impl<T: Real> RadialInitialData<T> {
    pub fn new(
        w0: Option<SpectralFn<T>>,
        w1: Option<SpectralFn<T>>,
        decay: DecayClass<T>,
        scale: T,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "profile scale must be positive, got {scale}"
            )));
        }
        let data = RadialInitialData {
            w0,
            w1,
            decay,
            scale,
            label: label.into(),
            u1_physical: None,
            u0_physical: None,
        };
        data.check_profiles()?;
        Ok(data)
    }

    /// `u₀ = 0`, `u₁(x) = c·exp(-a|x|²)`.
    pub fn gaussian_velocity(dim: usize, a: T, c: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::Domain(format!(
                "gaussian rate must be positive, got {a}"
            )));
        }
        let (amp, rate) = gaussian_hat(dim, a, c);
        let w1: SpectralFn<T> =
            Arc::new(move |r: T| Complex::new(amp * (-rate * r * r).exp(), T::zero()));
        let mut d = Self::new(
            None,
            Some(w1),
            DecayClass::GaussianType {
                amplitude: amp.abs(),
                rate,
            },
            (T::one() / rate).sqrt(),
            format!("gaussian-velocity(a={a})"),
        )?;
        d.u1_physical = Some(RadialFunction::gaussian(a, c)?);
        Ok(d)
    }

    /// `u₀(x) = c·exp(-a|x|²)`, `u₁ = 0`.
    pub fn gaussian_displacement(dim: usize, a: T, c: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::Domain(format!(
                "gaussian rate must be positive, got {a}"
            )));
        }
        let (amp, rate) = gaussian_hat(dim, a, c);
        let w0: SpectralFn<T> =
            Arc::new(move |r: T| Complex::new(amp * (-rate * r * r).exp(), T::zero()));
        let mut d = Self::new(
            Some(w0),
            None,
            DecayClass::GaussianType {
                amplitude: amp.abs(),
                rate,
            },
            (T::one() / rate).sqrt(),
            format!("gaussian-displacement(a={a})"),
        )?;
        d.u0_physical = Some(RadialFunction::gaussian(a, c)?);
        Ok(d)
    }

    /// `u₀ = 0`, `ŵ₁ = amplitude` on `r ∈ [r_lo, r_hi]` and zero elsewhere.
    pub fn compact_band(r_lo: T, r_hi: T, amplitude: T) -> Result<Self> {
        if !(r_lo >= T::zero() && r_hi > r_lo && r_hi.is_finite()) {
            return Err(Error::Domain(format!("invalid band [{r_lo}, {r_hi}]")));
        }
        let w1: SpectralFn<T> = Arc::new(move |r: T| {
            if r >= r_lo && r <= r_hi {
                Complex::new(amplitude, T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        Self::new(
            None,
            Some(w1),
            DecayClass::CompactBand { r_lo, r_hi },
            r_hi - r_lo,
            format!("compact-band({r_lo},{r_hi})"),
        )
    }

    /// `u₀ = 0`, `u₁` a smooth bump supported on `|x| ∈ [r0 - width, r0 + width]`.
    /// The spectral profile is a numerical Hankel transform and carries no
    /// certified decay.
    pub fn annular_bump(dim: usize, r0: T, width: T) -> Result<Self> {
        let u1 = RadialFunction::annular_bump(r0, width)?;
        let phys = u1.clone();
        radial_kernel::<T>(dim, T::zero())?;
        let w1: SpectralFn<T> = Arc::new(move |rho: T| {
            Complex::new(
                hankel_transform(&phys, dim, rho).unwrap_or(T::nan()),
                T::zero(),
            )
        });
        let mut d = Self::new(
            None,
            Some(w1),
            DecayClass::Generic,
            T::one() / width,
            format!("annular-bump({r0},{width})"),
        )?;
        d.u1_physical = Some(u1);
        Ok(d)
    }

    /// Same data with `u₁` multiplied by `c`.
    pub fn scaled_velocity(&self, c: T) -> Self {
        let mut d = self.clone();
        if let Some(w1) = self.w1.clone() {
            d.w1 = Some(Arc::new(move |r| w1(r) * c));
        }
        d.decay = match self.decay {
            DecayClass::GaussianType { amplitude, rate } if self.w0.is_none() => {
                DecayClass::GaussianType {
                    amplitude: amplitude * c.abs(),
                    rate,
                }
            }
            DecayClass::GaussianType { amplitude, rate } => DecayClass::GaussianType {
                amplitude: amplitude * c.abs().max(T::one()),
                rate,
            },
            other => other,
        };
        if let Some(u) = &self.u1_physical {
            d.u1_physical = Some(u.scaled(c));
        }
        d
    }

    #[inline]
    pub fn w0(&self, r: T) -> Complex<T> {
        self.w0
            .as_ref()
            .map_or(Complex::new(T::zero(), T::zero()), |f| f(r))
    }

    #[inline]
    pub fn w1(&self, r: T) -> Complex<T> {
        self.w1
            .as_ref()
            .map_or(Complex::new(T::zero(), T::zero()), |f| f(r))
    }

    pub fn has_w0(&self) -> bool {
        self.w0.is_some()
    }

    pub fn has_w1(&self) -> bool {
        self.w1.is_some()
    }

    /// Points where the profiles are not smooth.
    pub fn kinks(&self) -> Vec<T> {
        match self.decay {
            DecayClass::CompactBand { r_lo, r_hi } => vec![r_lo, r_hi],
            _ => Vec::new(),
        }
    }

    /// Spot-checks finiteness and, for Gaussian-type data, the stored
    /// envelope on a grid.
    pub fn check_profiles(&self) -> Result<()> {
        let top = match self.decay {
            DecayClass::CompactBand { r_hi, .. } => r_hi * cst(1.5),
            _ => self.scale * cst(8.0),
        };
        for i in 0..=200 {
            let r = top * from_usize::<T>(i) / cst(200.0);
            let (a, b) = (self.w0(r), self.w1(r));
            if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
                return Err(Error::Domain(format!("profile not finite at r = {r}")));
            }
            if let DecayClass::GaussianType { amplitude, rate } = self.decay {
                let env = amplitude * (-rate * r * r).exp() * (T::one() + cst(1e-9));
                if a.norm() > env || b.norm() > env {
                    return Err(Error::Domain(format!(
                        "profile exceeds its Gaussian envelope at r = {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where a physical radial function lives, for truncating integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Support<T> {
    /// Vanishes for `r > radius`.
    Compact { radius: T },
    /// `|u(r)| <= amplitude·exp(-rate·r²)`.
    Gaussian { amplitude: T, rate: T },
}

/// A real radial function `u(|x|)` with optional first and second
/// derivatives in `r`.
#[derive(Clone)]
pub struct RadialFunction<T> {
    value: RealFn<T>,
    d1: Option<RealFn<T>>,
    d2: Option<RealFn<T>>,
    pub support: Support<T>,
    /// Points where `u` or its derivatives are not smooth.
    pub breakpoints: Vec<T>,
    /// Characteristic feature size.
    pub scale: T,
}

impl<T: Real> fmt::Debug for RadialFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialFunction")
            .field("support", &self.support)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl<T: Real> RadialFunction<T> {
    pub fn new(
        value: RealFn<T>,
        d1: Option<RealFn<T>>,
        d2: Option<RealFn<T>>,
        support: Support<T>,
        breakpoints: Vec<T>,
        scale: T,
    ) -> Self {
        RadialFunction {
            value,
            d1,
            d2,
            support,
            breakpoints,
            scale,
        }
    }

    /// `c·exp(-a r²)`.
    pub fn gaussian(a: T, c: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::Domain(format!(
                "gaussian rate must be positive, got {a}"
            )));
        }
        let two = cst::<T>(2.0);
        Ok(Self::new(
            Arc::new(move |r| c * (-a * r * r).exp()),
            Some(Arc::new(move |r| -two * a * r * c * (-a * r * r).exp())),
            Some(Arc::new(move |r| {
                c * (two * a * (two * a * r * r - T::one())) * (-a * r * r).exp()
            })),
            Support::Gaussian {
                amplitude: c.abs(),
                rate: a,
            },
            Vec::new(),
            T::one() / a.sqrt(),
        ))
    }

    /// `exp(-1/(1-s²))` with `s = (r - r0)/width`, zero for `|s| >= 1`.
    pub fn annular_bump(r0: T, width: T) -> Result<Self> {
        if !(width > T::zero() && r0 - width >= T::zero()) {
            return Err(Error::Domain(format!(
                "annular bump needs 0 < width <= r0, got r0 = {r0}, width = {width}"
            )));
        }
        let bump = move |r: T| -> (T, T, T) {
            let s = (r - r0) / width;
            if s.abs() >= T::one() {
                return (T::zero(), T::zero(), T::zero());
            }
            let g = T::one() - s * s;
            let v = (-T::one() / g).exp();
            // d/ds exp(-1/g) = exp(-1/g)·(-2s/g²)
            let two = cst::<T>(2.0);
            let ds = -two * s / (g * g);
            let dds = (-two * g * g - two * s * (two * g * two * s)) / (g * g * g * g);
            let v1 = v * ds;
            let v2 = v * (ds * ds + dds);
            (v, v1 / width, v2 / (width * width))
        };
        Ok(Self::new(
            Arc::new(move |r| bump(r).0),
            Some(Arc::new(move |r| bump(r).1)),
            Some(Arc::new(move |r| bump(r).2)),
            Support::Compact { radius: r0 + width },
            vec![r0 - width, r0, r0 + width],
            width,
        ))
    }

    /// Indicator of the ball of the given radius.
    pub fn indicator(radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::Domain(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self::new(
            Arc::new(move |r| if r <= radius { T::one() } else { T::zero() }),
            None,
            None,
            Support::Compact { radius },
            vec![radius],
            radius,
        ))
    }

    /// `u(r/R)`.
    pub fn dilated(&self, big_r: T) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.d1.clone(), self.d2.clone());
        let support = match self.support {
            Support::Compact { radius } => Support::Compact {
                radius: radius * big_r,
            },
            Support::Gaussian { amplitude, rate } => Support::Gaussian {
                amplitude,
                rate: rate / (big_r * big_r),
            },
        };
        RadialFunction {
            value: Arc::new(move |r| v(r / big_r)),
            d1: d1.map(|f| -> RealFn<T> { Arc::new(move |r| f(r / big_r) / big_r) }),
            d2: d2.map(|f| -> RealFn<T> { Arc::new(move |r| f(r / big_r) / (big_r * big_r)) }),
            support,
            breakpoints: self.breakpoints.iter().map(|&b| b * big_r).collect(),
            scale: self.scale * big_r,
        }
    }

    /// `c·u`.
    pub fn scaled(&self, c: T) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.d1.clone(), self.d2.clone());
        let support = match self.support {
            Support::Gaussian { amplitude, rate } => Support::Gaussian {
                amplitude: amplitude * c.abs(),
                rate,
            },
            s => s,
        };
        RadialFunction {
            value: Arc::new(move |r| c * v(r)),
            d1: d1.map(|f| -> RealFn<T> { Arc::new(move |r| c * f(r)) }),
            d2: d2.map(|f| -> RealFn<T> { Arc::new(move |r| c * f(r)) }),
            support,
            breakpoints: self.breakpoints.clone(),
            scale: self.scale,
        }
    }

    #[inline]
    pub fn value(&self, r: T) -> T {
        (self.value)(r)
    }

    pub fn derivative(&self, r: T) -> Result<T> {
        self.d1
            .as_ref()
            .map(|f| f(r))
            .ok_or_else(|| Error::Domain("profile has no first derivative".into()))
    }

    pub fn second_derivative(&self, r: T) -> Result<T> {
        self.d2
            .as_ref()
            .map(|f| f(r))
            .ok_or_else(|| Error::Domain("profile has no second derivative".into()))
    }

    pub fn has_derivative(&self) -> bool {
        self.d1.is_some()
    }

    pub fn has_second_derivative(&self) -> bool {
        self.d2.is_some()
    }

    /// Truncation radius for `∫ |u|^power r^moment dr`, with a bound on the
    /// discarded tail no larger than `rel` times the full integral of the
    /// envelope. Compactly supported functions have no tail.
    pub fn truncation(&self, power: i32, moment: T, rel: T) -> Result<(T, T)> {
        match self.support {
            Support::Compact { radius } => Ok((radius, T::zero())),
            Support::Gaussian { amplitude, rate } => {
                let b = rate * from_usize::<T>(power as usize);
                let k = (moment + T::one()) * cst(0.5);
                let scale = amplitude.powi(power) * gamma(k) / (cst::<T>(2.0) * b.powf(k));
                let mut r = (T::one() / b).sqrt();
                for _ in 0..200 {
                    if let Some(tail) = gaussian_moment_tail(moment, b, r) {
                        let tail = tail * amplitude.powi(power);
                        if tail <= rel * scale {
                            return Ok((r, tail));
                        }
                    }
                    r *= cst(1.05);
                }
                Err(Error::Integrability(
                    "Gaussian tail could not be bounded".into(),
                ))
            }
        }
    }

    /// `ω_n ∫ g(r) r^{n-1} dr` for an integrand dominated by
    /// `|u|^power·r^extra_moment`. Returns the value and an absolute error
    /// estimate that includes the truncated tail.
    pub fn integrate_radial<G>(
        &self,
        dim: usize,
        power: i32,
        extra_moment: T,
        rel_tol: T,
        g: G,
    ) -> Result<(T, T)>
    where
        G: Fn(T) -> T + Sync,
    {
        let omega = unit_sphere_area::<T>(dim)?;
        let moment = from_usize::<T>(dim - 1) + extra_moment;
        let (r_cap, tail) = self.truncation(power, moment, rel_tol * cst(1e-3))?;
        let mut pts = vec![T::zero()];
        pts.extend(
            self.breakpoints
                .iter()
                .copied()
                .filter(|&b| b > T::zero() && b < r_cap),
        );
        let segments = 64usize;
        for i in 1..=segments {
            pts.push(r_cap * from_usize::<T>(i) / from_usize::<T>(segments));
        }
        let pts = merge_breakpoints(pts);
        let res = integrate(
            |r: T| {
                if r == T::zero() && dim > 1 {
                    T::zero()
                } else {
                    g(r) * r.powi(dim as i32 - 1)
                }
            },
            &pts,
            QuadOptions::relative(rel_tol).with_abs(T::min_positive_value()),
        );
        if !res.converged {
            return Err(Error::Integrability(format!(
                "radial quadrature did not converge (error {} on value {})",
                res.error, res.value
            )));
        }
        Ok((omega * res.value, omega * (res.error + tail)))
    }
}

/// Radial Fourier transform `û(ρ) = ω_n ∫ u(r) K_n(ρr) r^{n-1} dr` of a
/// radial function (convention `û(ξ) = ∫ e^{-ix·ξ} u(x) dx`).
pub fn hankel_transform<T: Real>(u: &RadialFunction<T>, dim: usize, rho: T) -> Result<T> {
    kernel_transform(u, dim, rho, |s| radial_kernel(dim, s).unwrap_or(T::nan()))
}

/// `ω_n ∫ u(r) k(ρr) r^{n-1} dr` for a kernel oscillating like `K_n`.
pub(crate) fn kernel_transform<T, K>(
    u: &RadialFunction<T>,
    dim: usize,
    rho: T,
    kernel: K,
) -> Result<T>
where
    T: Real,
    K: Fn(T) -> T + Sync,
{
    radial_kernel::<T>(dim, T::zero())?;
    let (r_cap, _) = u.truncation(1, from_usize::<T>(dim - 1), cst(1e-16))?;
    let mut pts = vec![T::zero()];
    pts.extend(
        u.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > T::zero() && b < r_cap),
    );
    // Resolve the kernel oscillation: about four panels per period.
    let period = if rho > T::zero() {
        cst::<T>(2.0) * T::PI() / rho
    } else {
        r_cap
    };
    let panels = ((r_cap / period).to_f64().unwrap_or(1.0) * 4.0)
        .ceil()
        .clamp(32.0, 1e6) as usize;
    for i in 1..=panels {
        pts.push(r_cap * from_usize::<T>(i) / from_usize::<T>(panels));
    }
    let pts = merge_breakpoints(pts);
    let res = integrate(
        |r: T| u.value(r) * kernel(rho * r) * r.powi(dim as i32 - 1),
        &pts,
        QuadOptions::relative(cst(1e-12)).with_abs(cst(1e-300)),
    );
    Ok(unit_sphere_area::<T>(dim)? * res.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_spectral_profile_matches_closed_form() {
        let d = RadialInitialData::<f64>::gaussian_velocity(1, 1.0, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(d.w1(0.0).re, pi.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(
            d.w1(1.0).re,
            pi.sqrt() * (-0.25f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(d.w0(3.0), Complex::new(0.0, 0.0));
        let d2 = RadialInitialData::<f64>::gaussian_velocity(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(d2.w1(0.0).re, pi, max_relative = 1e-15);
    }

    #[test]
    fn hankel_transform_reproduces_gaussian_transforms() {
        let pi = std::f64::consts::PI;
        for dim in 1..=5 {
            let u = RadialFunction::gaussian(1.0, 1.0).unwrap();
            for rho in [0.0, 0.5, 2.0, 5.0] {
                let exact = pi.powf(dim as f64 / 2.0) * (-rho * rho / 4.0f64).exp();
                let got = hankel_transform(&u, dim, rho).unwrap();
                assert!(
                    (got - exact).abs() <= 1e-10 * pi.powf(dim as f64 / 2.0),
                    "dim {dim} rho {rho}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn envelope_violation_is_rejected() {
        let w1: SpectralFn<f64> = Arc::new(|r: f64| Complex::new((-r * r).exp(), 0.0));
        let bad = RadialInitialData::new(
            None,
            Some(w1),
            DecayClass::GaussianType {
                amplitude: 1.0,
                rate: 2.0,
            },
            1.0,
            "bad",
        );
        assert!(bad.is_err());
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let u = RadialFunction::annular_bump(2.0, 0.5).unwrap();
        for r in [1.6, 1.9, 2.2, 2.45] {
            let h = 1e-5;
            let fd1 = (u.value(r + h) - u.value(r - h)) / (2.0 * h);
            let fd2 = (u.value(r + h) - 2.0 * u.value(r) + u.value(r - h)) / (h * h);
            assert_relative_eq!(
                u.derivative(r).unwrap(),
                fd1,
                max_relative = 1e-6,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                u.second_derivative(r).unwrap(),
                fd2,
                max_relative = 1e-4,
                epsilon = 1e-6
            );
        }
        assert_eq!(u.value(1.0), 0.0);
        assert!(RadialFunction::annular_bump(0.3, 0.5).is_err());
    }

    #[test]
    fn gaussian_derivatives_and_dilation() {
        let u = RadialFunction::gaussian(0.7, 2.0).unwrap();
        let r = 0.9;
        let h = 1e-5;
        let fd2 = (u.value(r + h) - 2.0 * u.value(r) + u.value(r - h)) / (h * h);
        assert_relative_eq!(u.second_derivative(r).unwrap(), fd2, max_relative = 1e-5);
        let v = u.dilated(3.0);
        assert_relative_eq!(v.value(2.7), u.value(0.9), max_relative = 1e-15);
        assert_relative_eq!(
            v.derivative(2.7).unwrap(),
            u.derivative(0.9).unwrap() / 3.0,
            max_relative = 1e-15
        );
    }
}
