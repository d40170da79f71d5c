//! Special functions: Gamma, small-argument-safe trigonometric ratios,
//! Bessel-type radial kernels and Gaussian moment tails.

use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2. Relative accuracy is about 1e-15 in `f64`.
pub fn gamma<T: Real>(x: T) -> T {
    let half = cst::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut acc = cst::<T>(LANCZOS_COEFFS[0]);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += cst::<T>(c) / (x + cst(i as f64));
    }
    let t = x + cst::<T>(LANCZOS_G) + half;
    cst::<T>((2.0 * std::f64::consts::PI).sqrt()) * t.powf(x + half) * (-t).exp() * acc
}

/// Below this argument the ratios `sin x / x` and `(1 - cos x)/x²` switch to
/// their Taylor series.
pub const SERIES_SWITCH: f64 = 1e-4;

/// `sin(x)/x`, equal to 1 at the origin.
#[inline]
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < cst(SERIES_SWITCH) {
        let x2 = x * x;
        T::one() - x2 / cst(6.0) + x2 * x2 / cst(120.0)
    } else {
        x.sin() / x
    }
}

/// `(1 - cos x)/x²`, equal to 1/2 at the origin. Evaluated as
/// `½·sinc(x/2)²`, which avoids the cancellation in `1 - cos x`.
#[inline]
pub fn versine_ratio<T: Real>(x: T) -> T {
    if x.abs() < cst(SERIES_SWITCH) {
        let x2 = x * x;
        cst::<T>(0.5) - x2 / cst(24.0)
    } else {
        let s = sinc(x * cst(0.5));
        cst::<T>(0.5) * s * s
    }
}

/// Spherical average of `exp(i s ω·e)` over the unit sphere of ℝⁿ,
/// `Γ(n/2)(2/s)^{n/2-1} J_{n/2-1}(s)`. Radial Fourier transforms are
/// `û(ρ) = ω_n ∫ u(r) K_n(ρ r) r^{n-1} dr` with this kernel.
///
/// Supported for `1 <= dim <= 5`.
pub fn radial_kernel<T: Real>(dim: usize, s: T) -> Result<T> {
    let s_abs = s.abs();
    let v = match dim {
        1 => s.cos(),
        2 => cst(libm::j0(s.as_f64())),
        3 => sinc(s),
        4 => {
            if s_abs < cst(1e-4) {
                T::one() - s * s / cst(8.0)
            } else {
                let sf = s.as_f64();
                cst(2.0 * libm::j1(sf) / sf)
            }
        }
        5 => {
            if s_abs < cst(1e-2) {
                let s2 = s * s;
                T::one() - s2 / cst(10.0) + s2 * s2 / cst(280.0)
            } else {
                cst::<T>(3.0) * (s.sin() - s * s.cos()) / (s * s * s)
            }
        }
        _ => {
            return Err(Error::Domain(format!(
                "radial Fourier kernel implemented for dimensions 1..=5, got {dim}"
            )))
        }
    };
    Ok(v)
}

/// Upper bound on `∫_R^∞ r^m e^{-b r²} dr` for `m >= 0`, `b > 0`.
///
/// Uses `Γ(k, x) <= x^{k-1} e^{-x} / (1 - (k-1)/x)` with `k = (m+1)/2`,
/// `x = bR²`, valid when `x > k - 1`. Returns `None` when `R` is too small
/// for the bound to apply.
pub fn gaussian_moment_tail<T: Real>(m: T, b: T, r: T) -> Option<T> {
    if b <= T::zero() || r <= T::zero() || m < T::zero() {
        return None;
    }
    let k = (m + T::one()) * cst(0.5);
    let x = b * r * r;
    let head = x.powf(k - T::one()) * (-x).exp();
    let gamma_upper = if k <= T::one() {
        head
    } else {
        let denom = T::one() - (k - T::one()) / x;
        if denom <= cst(0.05) {
            return None;
        }
        head / denom
    };
    Some(gamma_upper / (cst::<T>(2.0) * b.powf(k)))
}

/// `K_n(s) - 1` without cancellation at small `s`, from the series
/// `Σ_{k≥1} (-s²/4)^k / (k! (n/2)_k)`.
pub fn radial_kernel_minus_one<T: Real>(dim: usize, s: T) -> Result<T> {
    if s.abs() >= T::one() {
        return Ok(radial_kernel(dim, s)? - T::one());
    }
    radial_kernel::<T>(dim, T::zero())?;
    let q = -s * s * cst(0.25);
    let half_n = cst::<T>(dim as f64 * 0.5);
    let mut term = T::one();
    let mut sum = T::zero();
    for k in 0..30 {
        let kf = cst::<T>(k as f64);
        term = term * q / ((kf + T::one()) * (kf + half_n));
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() {
            break;
        }
    }
    Ok(sum)
}
