//! Model coefficients, the dispersion relation and the universal constants
//! derived from it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{cst, from_usize, Real};
use crate::special::{gamma, sinc};

/// Coefficients of `u_tt + δ(−Δ)^θ u_tt + μΔ²u − κΔu = 0` in `dim` space
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T> {
    pub delta: T,
    pub mu: T,
    pub kappa: T,
    pub theta: T,
    pub dim: usize,
}

impl<T: Real> ModelParams<T> {
    pub fn new(delta: T, mu: T, kappa: T, theta: T, dim: usize) -> Result<Self> {
        let finite = [delta, mu, kappa, theta].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("model coefficients must be finite".into()));
        }
        if delta <= T::zero() {
            return Err(Error::Domain(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if kappa <= T::zero() {
            return Err(Error::Domain(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if mu < T::zero() {
            return Err(Error::Domain(format!("mu must be nonnegative, got {mu}")));
        }
        if theta <= T::zero() || theta > cst(2.0) {
            return Err(Error::Domain(format!(
                "theta must lie in (0, 2], got {theta}"
            )));
        }
        if dim < 1 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(ModelParams {
            delta,
            mu,
            kappa,
            theta,
            dim,
        })
    }

    /// δ = μ = κ = 1, θ = 2.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(T::one(), T::one(), T::one(), cst(2.0), dim)
    }

    pub fn with_dim(self, dim: usize) -> Result<Self> {
        Self::new(self.delta, self.mu, self.kappa, self.theta, dim)
    }

    pub(crate) fn require_positive_mu(&self, what: &str) -> Result<()> {
        if self.mu > T::zero() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{what} requires mu > 0")))
        }
    }

    /// `1 + δ r^{2θ}`.
    #[inline]
    pub fn inertia(&self, r: T) -> T {
        T::one() + self.delta * r.powf(cst::<T>(2.0) * self.theta)
    }

    /// `μ r⁴ + κ r²`.
    #[inline]
    pub fn stiffness(&self, r: T) -> T {
        let r2 = r * r;
        r2 * (self.mu * r2 + self.kappa)
    }

    /// `f(r)²/r² = (μr² + κ)/(1 + δr^{2θ})`.
    #[inline]
    fn q(&self, r: T) -> T {
        (self.mu * r * r + self.kappa) / self.inertia(r)
    }

    /// Dispersion `f(r) = √((μr⁴ + κr²)/(1 + δr^{2θ}))`, evaluated as
    /// `r·√((μr² + κ)/(1 + δr^{2θ}))`.
    pub fn eval_dispersion(&self, r: T) -> Result<T> {
        if !r.is_finite() || r < T::zero() {
            return Err(Error::Domain(format!(
                "dispersion needs finite r >= 0, got {r}"
            )));
        }
        Ok(self.f(r))
    }

    /// Unchecked dispersion for inner loops; `r` must be finite and `>= 0`.
    #[inline]
    pub fn f(&self, r: T) -> T {
        if r == T::zero() {
            return T::zero();
        }
        r * self.q(r).sqrt()
    }

    /// `(f′(r), f″(r))` in closed form.
    pub fn dispersion_derivatives(&self, r: T) -> Result<(T, T)> {
        if !r.is_finite() || r <= T::zero() {
            return Err(Error::Domain(format!(
                "derivatives need finite r > 0, got {r}"
            )));
        }
        Ok(self.derivs(r))
    }

    /// Unchecked `(f′, f″)`; `r` must be finite and positive.
    pub fn derivs(&self, r: T) -> (T, T) {
        let two = cst::<T>(2.0);
        let th2 = two * self.theta;
        let a = self.mu * r * r + self.kappa;
        let a1 = two * self.mu * r;
        let a2 = two * self.mu;
        let p = self.delta * r.powf(th2);
        let d = T::one() + p;
        // δ r^{2θ-1} and δ r^{2θ-2} written through p to stay finite at small r.
        let d1 = th2 * p / r;
        let d2 = th2 * (th2 - T::one()) * p / (r * r);
        let q = a / d;
        let num1 = a1 * d - a * d1;
        let q1 = num1 / (d * d);
        let q2 = (a2 * d - a * d2) / (d * d) - two * d1 * num1 / (d * d * d);
        let sq = q.sqrt();
        let f1 = sq + r * q1 / (two * sq);
        let f2 = q1 / sq + r * q2 / (two * sq) - r * q1 * q1 / (cst::<T>(4.0) * q * sq);
        (f1, f2)
    }

    /// `ε₀ = min{(κ/(2(μ+κ)δθ))^{1/(2θ)}, 1}`.
    pub fn epsilon0(&self) -> T {
        let two = cst::<T>(2.0);
        let base = self.kappa / (two * (self.mu + self.kappa) * self.delta * self.theta);
        base.powf(T::one() / (two * self.theta)).min(T::one())
    }

    /// Lower bound `κ/(2(μ+κ)^{1/2}(1+δ)^{3/2})` of `f′` on `(0, ε₀]`.
    pub fn fprime_lower_bound(&self) -> T {
        let one_d = T::one() + self.delta;
        self.kappa / (cst::<T>(2.0) * (self.mu + self.kappa).sqrt() * one_d * one_d.sqrt())
    }

    /// Constant `C` with `|f″(r)| <= C(1 + 1/r)` on `(0, ε₀]`: the sum of the
    /// coefficients of the five majorant terms of the closed-form `f″`.
    pub fn fsecond_constant(&self) -> T {
        let (d, m, k, th) = (self.delta, self.mu, self.kappa, self.theta);
        let two = cst::<T>(2.0);
        let smk = (m + k).sqrt();
        let c1 = (cst::<T>(6.0) * m + k) * smk * (T::one() + d).sqrt() / k;
        let c2 = (two * m + k) * (cst::<T>(4.0) * m + two * k) / (two * k)
            + (two * m + k) * (m + k) * th * d / k;
        let c3 = d * th * (two * m + k) / k.sqrt();
        let c4 = d * th * (two * th - T::one()).abs() * smk;
        let c5 = cst::<T>(3.0) * d * d * th * th * smk;
        c1 + c2 + c3 + c4 + c5
    }

    /// Supremum of `|f′|` over `[0, r_max]`, found by dense sampling plus a
    /// 1% margin.
    pub fn max_group_velocity(&self, r_max: T) -> T {
        let mut best = self.kappa.sqrt();
        let mut r = cst::<T>(1e-4).min(r_max);
        while r <= r_max {
            best = best.max(self.derivs(r).0.abs());
            r *= cst(1.02);
        }
        best * cst(1.01)
    }
}

/// Sinc supremum `L` and half-level threshold `δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SincConstants<T> {
    pub l: T,
    pub delta0: T,
}

impl<T: Real> SincConstants<T> {
    pub const DEFAULT_DELTA0: f64 = 0.9;

    /// Validates `|sin η/η| >= 1/2` on `(0, δ₀]` by dense sampling.
    pub fn new(delta0: T) -> Result<Self> {
        if !(delta0 > T::zero() && delta0 < T::one()) {
            return Err(Error::Domain(format!(
                "delta0 must lie in (0, 1), got {delta0}"
            )));
        }
        let n = 4096;
        for i in 1..=n {
            let eta = delta0 * from_usize::<T>(i) / from_usize::<T>(n);
            if sinc(eta).abs() < cst(0.5) {
                return Err(Error::Domain(format!(
                    "sinc falls below 1/2 before delta0 = {delta0}"
                )));
            }
        }
        Ok(SincConstants {
            l: T::one(),
            delta0,
        })
    }
}

impl<T: Real> Default for SincConstants<T> {
    fn default() -> Self {
        SincConstants {
            l: T::one(),
            delta0: cst(Self::DEFAULT_DELTA0),
        }
    }
}

/// Low-band radius `β(t)` and mid/high split `γ(t)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandBoundaries<T> {
    pub beta: T,
    pub gamma_band: T,
    pub t: T,
}

pub fn band_boundaries<T: Real>(
    params: &ModelParams<T>,
    sinc_consts: &SincConstants<T>,
    t: T,
) -> Result<BandBoundaries<T>> {
    if !(t > T::E()) {
        return Err(Error::Precondition(format!(
            "band boundaries need t > e, got {t}"
        )));
    }
    let s = (params.mu + params.kappa).sqrt();
    let beta = sinc_consts.delta0 / (s * t);
    let gamma_band = sinc_consts.delta0 / (s * t.ln());
    debug_assert!(
        t * params.f(beta) <= sinc_consts.delta0 * (T::one() + cst(1e-12)) || beta > T::one()
    );
    Ok(BandBoundaries {
        beta,
        gamma_band,
        t,
    })
}

/// Surface area `ω_n = 2π^{n/2}/Γ(n/2)` of the unit sphere in ℝⁿ.
pub fn unit_sphere_area<T: Real>(dim: usize) -> Result<T> {
    match dim {
        0 => Err(Error::Domain("dimension must be at least 1".into())),
        1 => Ok(cst(2.0)),
        2 => Ok(cst::<T>(2.0) * T::PI()),
        3 => Ok(cst::<T>(4.0) * T::PI()),
        n => {
            let half = from_usize::<T>(n) * cst(0.5);
            Ok(cst::<T>(2.0) * T::PI().powf(half) / gamma(half))
        }
    }
}

/// `(2π)^{-n}`, the factor converting spectral to physical squared norms.
pub fn plancherel_factor<T: Real>(dim: usize) -> T {
    (cst::<T>(2.0) * T::PI()).powi(-(dim as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> ModelParams<f64> {
        ModelParams::unit(1).unwrap()
    }

    #[test]
    fn rejects_invalid_coefficients() {
        assert!(ModelParams::new(0.0, 1.0, 1.0, 2.0, 1).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0, 2.0, 1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 2.0, 1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 2.5, 1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 2.0, 0).is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.0, 1.0, 2).is_ok());
    }

    #[test]
    fn dispersion_values() {
        let p = unit();
        assert_eq!(p.eval_dispersion(1.0).unwrap(), 1.0);
        assert_eq!(p.eval_dispersion(0.0).unwrap(), 0.0);
        assert!(p.eval_dispersion(f64::NAN).is_err());
        assert!(p.eval_dispersion(f64::INFINITY).is_err());
        // f(r)/r = √κ·(1 + O(r²))
        for r in [1e-2, 1e-4, 1e-6] {
            let ratio = p.eval_dispersion(r).unwrap() / r;
            assert!((ratio - 1.0).abs() <= 2.0 * r * r);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = unit();
        let r = 0.3;
        let (d1, d2) = p.dispersion_derivatives(r).unwrap();
        let h = 1e-5;
        let fd1 = (p.f(r + h) - p.f(r - h)) / (2.0 * h);
        let h2 = 1e-4;
        let fd2 = (p.f(r + h2) - 2.0 * p.f(r) + p.f(r - h2)) / (h2 * h2);
        assert_relative_eq!(d1, fd1, max_relative = 1e-6);
        assert_relative_eq!(d2, fd2, max_relative = 1e-4);
        assert!(p.dispersion_derivatives(0.0).is_err());

        let q = ModelParams::new(2.0, 0.5, 1.5, 0.7, 1).unwrap();
        for r in [0.05, 0.8, 3.0] {
            let (d1, d2) = q.derivs(r);
            let fd1 = (q.f(r + h) - q.f(r - h)) / (2.0 * h);
            let fd2 = (q.f(r + h2) - 2.0 * q.f(r) + q.f(r - h2)) / (h2 * h2);
            assert_relative_eq!(d1, fd1, max_relative = 1e-6);
            assert_relative_eq!(d2, fd2, max_relative = 1e-4, epsilon = 1e-7);
        }
    }

    #[test]
    fn epsilon0_examples() {
        assert_relative_eq!(
            unit().epsilon0(),
            0.125_f64.powf(0.25),
            max_relative = 1e-15
        );
        assert_relative_eq!(unit().epsilon0(), 0.594604, max_relative = 1e-6);
        let big = ModelParams::new(1e-6, 0.0, 1.0, 0.1, 1).unwrap();
        assert_eq!(big.epsilon0(), 1.0);
        let q = ModelParams::new(1.0, 0.0, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(q.epsilon0(), 0.5_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn prop21_constants_hold_on_a_log_grid() {
        let sets = [
            (1.0, 1.0, 1.0, 2.0),
            (1.0, 0.0, 1.0, 1.0),
            (0.5, 1.0, 2.0, 0.5),
            (2.0, 0.0, 1.0, 2.0),
            (1.0, 1.0, 1.0, 0.5),
        ];
        for (d, m, k, th) in sets {
            let p = ModelParams::new(d, m, k, th, 1).unwrap();
            let e0 = p.epsilon0();
            let lb = p.fprime_lower_bound();
            let c = p.fsecond_constant();
            for i in 0..1000 {
                let r = e0 * 10f64.powf(-6.0 + 6.0 * i as f64 / 999.0);
                let (f1, f2) = p.derivs(r);
                assert!(f1 >= lb, "f' = {f1} < {lb} at r = {r}");
                assert!(r * f2.abs() <= c * (1.0 + r));
            }
        }
        assert_relative_eq!(unit().fprime_lower_bound(), 0.125, max_relative = 1e-15);
    }

    #[test]
    fn band_boundary_examples() {
        let p = unit();
        let s = SincConstants::default();
        let b = band_boundaries(&p, &s, 10.0).unwrap();
        assert_relative_eq!(b.beta, 0.9 / (2f64.sqrt() * 10.0), max_relative = 1e-15);
        assert_relative_eq!(b.beta, 0.0636396, max_relative = 1e-6);
        let g = band_boundaries(&p, &s, std::f64::consts::E.powi(2)).unwrap();
        assert_relative_eq!(g.gamma_band, 0.3181981, max_relative = 1e-6);
        assert!(band_boundaries(&p, &s, 2.0).is_err());
        let mut t = 10.0;
        while t <= 1e6 {
            let b = band_boundaries(&p, &s, t).unwrap();
            assert!(t * p.f(b.beta) <= s.delta0);
            assert!(b.beta < b.gamma_band);
            assert_relative_eq!(b.beta * t, 0.9 / 2f64.sqrt(), max_relative = 1e-14);
            assert_relative_eq!(
                b.gamma_band * t.ln(),
                0.9 / 2f64.sqrt(),
                max_relative = 1e-14
            );
            t *= 1.7;
        }
    }

    #[test]
    fn sinc_constants() {
        let s = SincConstants::<f64>::new(0.9).unwrap();
        assert_eq!(s.l, 1.0);
        assert!(SincConstants::<f64>::new(1.0).is_err());
        let mut eta = 1e-3;
        while eta <= 1e3 {
            assert!(sinc::<f64>(eta).abs() <= s.l);
            eta *= 1.01;
        }
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(unit_sphere_area::<f64>(1).unwrap(), 2.0);
        assert_relative_eq!(
            unit_sphere_area::<f64>(2).unwrap(),
            2.0 * std::f64::consts::PI
        );
        let pi = std::f64::consts::PI;
        assert_relative_eq!(
            unit_sphere_area::<f64>(4).unwrap(),
            2.0 * pi * pi,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            unit_sphere_area::<f64>(5).unwrap(),
            2.0 * pi.powf(2.5) / statrs::function::gamma::gamma(2.5),
            max_relative = 1e-13
        );
        assert!(unit_sphere_area::<f64>(0).is_err());
    }

    proptest! {
        #[test]
        fn dispersion_is_positive_and_finite(r in 1e-8f64..1e6, d in 0.1f64..5.0, m in 0.0f64..5.0,
                                             k in 0.1f64..5.0, th in 0.05f64..2.0) {
            let p = ModelParams::new(d, m, k, th, 1).unwrap();
            let v = p.f(r);
            prop_assert!(v.is_finite() && v > 0.0);
            let direct = ((m * r.powi(4) + k * r * r) / (1.0 + d * r.powf(2.0 * th))).sqrt();
            prop_assert!((v - direct).abs() <= 1e-12 * direct.max(1e-300));
        }

        #[test]
        fn f32_agrees_with_f64(r in 1e-3f64..1e3) {
            let p64 = unit();
            let p32 = ModelParams::<f32>::unit(1).unwrap();
            let a = p64.f(r);
            let b = p32.f(r as f32) as f64;
            prop_assert!((a - b).abs() <= 1e-5 * a);
        }
    }
}
