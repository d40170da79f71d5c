//! Periodic-box discretization: DFT evolution of arbitrary (non-radial)
//! data, grid norms and energies, and a binary file format.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EnergyReport;
use crate::model::ModelParams;
use crate::scalar::{cst, from_usize, Real};
use crate::special::sinc;

/// Complex samples on `[-L/2, L/2)^dim`, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub dim: usize,
    pub box_length: T,
    pub samples_per_axis: usize,
    pub values: Vec<Complex<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    box_length: f64,
    samples_per_axis: usize,
}

impl<T: Real> GridField<T> {
    pub fn new(
        dim: usize,
        box_length: T,
        samples_per_axis: usize,
        values: Vec<Complex<T>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(box_length > T::zero() && box_length.is_finite()) {
            return Err(Error::Domain(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        if samples_per_axis < 16 || !samples_per_axis.is_power_of_two() {
            return Err(Error::Domain(format!(
                "samples per axis must be a power of two >= 16, got {samples_per_axis}"
            )));
        }
        let expected = samples_per_axis.pow(dim as u32);
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        Ok(GridField {
            dim,
            box_length,
            samples_per_axis,
            values,
        })
    }

    pub fn zeros(dim: usize, box_length: T, samples_per_axis: usize) -> Result<Self> {
        let len = samples_per_axis.checked_pow(dim as u32).unwrap_or(0);
        Self::new(
            dim,
            box_length,
            samples_per_axis,
            vec![Complex::new(T::zero(), T::zero()); len],
        )
    }

    /// Samples `u(x)` at the grid nodes.
    pub fn from_fn<F>(dim: usize, box_length: T, samples_per_axis: usize, u: F) -> Result<Self>
    where
        F: Fn(&[T]) -> Complex<T> + Sync,
    {
        let mut g = Self::zeros(dim, box_length, samples_per_axis)?;
        let shape = g.clone_shape();
        g.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let x = shape.position(idx);
            *v = u(&x[..dim]);
        });
        Ok(g)
    }

    fn clone_shape(&self) -> GridField<T> {
        GridField {
            dim: self.dim,
            box_length: self.box_length,
            samples_per_axis: self.samples_per_axis,
            values: Vec::new(),
        }
    }

    /// Coordinates of flat index `idx`; entries past `dim` are zero.
    pub fn position(&self, idx: usize) -> [T; 3] {
        let h = self.spacing();
        let half = self.box_length * cst(0.5);
        let n = self.samples_per_axis;
        let mut x = [T::zero(); 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            x[axis] = -half + h * from_usize::<T>(rest % n);
            rest /= n;
        }
        x
    }

    /// Samples a radial function `u(|x|)`.
    pub fn from_radial<F>(dim: usize, box_length: T, samples_per_axis: usize, u: F) -> Result<Self>
    where
        F: Fn(T) -> T + Sync,
    {
        Self::from_fn(dim, box_length, samples_per_axis, |x| {
            let r = x.iter().fold(T::zero(), |s, &c| s + c * c).sqrt();
            Complex::new(u(r), T::zero())
        })
    }

    pub fn spacing(&self) -> T {
        self.box_length / from_usize::<T>(self.samples_per_axis)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.samples_per_axis == other.samples_per_axis
            && self.box_length == other.box_length
    }

    /// `‖u‖²` by the rectangle rule.
    pub fn norm_sq(&self) -> T {
        pairwise(&self.values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()) * self.cell_volume()
    }

    /// `∫ u dx` by the rectangle rule.
    pub fn integral(&self) -> Complex<T> {
        let re: Vec<T> = self.values.iter().map(|v| v.re).collect();
        let im: Vec<T> = self.values.iter().map(|v| v.im).collect();
        Complex::new(pairwise(&re), pairwise(&im)) * self.cell_volume()
    }

    /// Largest `|Im u| / max |u|`.
    pub fn imaginary_residue(&self) -> T {
        let max = self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if max == T::zero() {
            return T::zero();
        }
        self.values.iter().fold(T::zero(), |m, v| m.max(v.im.abs())) / max
    }

    /// `|k|` of flat spectral index `idx`.
    fn wavenumber(&self, idx: usize) -> T {
        let n = self.samples_per_axis;
        let dk = cst::<T>(2.0) * T::PI() / self.box_length;
        let mut rest = idx;
        let mut k2 = T::zero();
        for _ in 0..self.dim {
            let m = rest % n;
            rest /= n;
            let signed = if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            let k = dk * cst::<T>(signed.abs());
            k2 += k * k;
        }
        k2.sqrt()
    }

    /// Largest wavenumber magnitude on the grid.
    pub fn max_wavenumber(&self) -> T {
        T::PI() / self.spacing() * from_usize::<T>(self.dim).sqrt()
    }

    /// Time below which the periodic box does not feel wrap-around:
    /// `L/(2 sup|f′|)` with the supremum over resolved wavenumbers.
    pub fn validity_time(&self, params: &ModelParams<T>) -> T {
        self.box_length / (cst::<T>(2.0) * params.max_group_velocity(self.max_wavenumber()))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            dim: self.dim,
            box_length: self.box_length.as_f64(),
            samples_per_axis: self.samples_per_axis,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.as_f64().to_le_bytes());
            buf.extend_from_slice(&v.im.as_f64().to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let count = header
            .samples_per_axis
            .checked_pow(header.dim as u32)
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        if bytes.len() != count * 16 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                count * 16,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8-byte chunk"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8-byte chunk"));
                Complex::new(cst::<T>(re), cst::<T>(im))
            })
            .collect();
        Self::new(
            header.dim,
            cst(header.box_length),
            header.samples_per_axis,
            values,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn pairwise<T: Real>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

/// In-place multidimensional DFT. Each axis is transformed line by line; lines
/// are independent, so the result does not depend on the thread schedule.
fn fft_nd<T: Real>(values: &mut [Complex<T>], dim: usize, n: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        if stride == 1 {
            values.par_chunks_mut(n).for_each(|line| fft.process(line));
        } else {
            values.par_chunks_mut(block).for_each(|chunk| {
                let mut line = vec![Complex::new(T::zero(), T::zero()); n];
                for offset in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = chunk[offset + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, slot) in line.iter().enumerate() {
                        chunk[offset + j * stride] = *slot;
                    }
                }
            });
        }
    }
    if inverse {
        let scale = T::one() / from_usize::<T>(values.len());
        values.par_iter_mut().for_each(|v| *v *= scale);
    }
}

type SpectrumPair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

fn spectra<T: Real>(field0: &GridField<T>, field1: &GridField<T>) -> Result<SpectrumPair<T>> {
    if !field0.same_shape(field1) {
        return Err(Error::Shape("initial fields differ in shape".into()));
    }
    let n = field0.samples_per_axis;
    let mut a = field0.values.clone();
    let mut b = field1.values.clone();
    fft_nd(&mut a, field0.dim, n, false);
    fft_nd(&mut b, field0.dim, n, false);
    Ok((a, b))
}

/// `(u(t), u_t(t))` on the grid.
pub fn evolve_grid_state<T: Real>(
    params: &ModelParams<T>,
    field0: &GridField<T>,
    field1: &GridField<T>,
    t: T,
) -> Result<(GridField<T>, GridField<T>)> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::Domain(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    if params.dim != field0.dim {
        return Err(Error::Shape(format!(
            "model dimension {} vs grid dimension {}",
            params.dim, field0.dim
        )));
    }
    let (a, b) = spectra(field0, field1)?;
    if t > field0.validity_time(params) {
        log::warn!(
            "t = {t} exceeds the grid validity window {}; wrap-around may contaminate the result",
            field0.validity_time(params)
        );
    }
    let (mut u, mut ut): (Vec<_>, Vec<_>) = a
        .par_iter()
        .zip(b.par_iter())
        .enumerate()
        .map(|(idx, (&w0, &w1))| {
            let k = field0.wavenumber(idx);
            let f = params.f(k);
            let (s, c) = (t * f).sin_cos();
            (w0 * c + w1 * (t * sinc(t * f)), w0 * (-f * s) + w1 * c)
        })
        .unzip();
    fft_nd(&mut u, field0.dim, field0.samples_per_axis, true);
    fft_nd(&mut ut, field0.dim, field0.samples_per_axis, true);
    let make = |values| GridField {
        values,
        ..field0.clone()
    };
    Ok((make(u), make(ut)))
}

/// `u(t)` on the grid.
pub fn evolve_grid<T: Real>(
    params: &ModelParams<T>,
    field0: &GridField<T>,
    field1: &GridField<T>,
    t: T,
) -> Result<GridField<T>> {
    evolve_grid_state(params, field0, field1, t).map(|s| s.0)
}

/// Energy of a grid state, computed from its discrete spectrum.
pub fn grid_energy<T: Real>(
    params: &ModelParams<T>,
    u: &GridField<T>,
    u_t: &GridField<T>,
) -> Result<EnergyReport<T>> {
    let (a, b) = spectra(u, u_t)?;
    let half = cst::<T>(0.5);
    let two_theta = cst::<T>(2.0) * params.theta;
    let parts: Vec<[T; 4]> = a
        .iter()
        .zip(b.iter())
        .enumerate()
        .map(|(idx, (w, wt))| {
            let k = u.wavenumber(idx);
            let k2 = k * k;
            [
                half * wt.norm_sqr(),
                half * params.delta * k.powf(two_theta) * wt.norm_sqr(),
                half * params.mu * k2 * k2 * w.norm_sqr(),
                half * params.kappa * k2 * w.norm_sqr(),
            ]
        })
        .collect();
    // Discrete Parseval: Σ|u_j|² h^n = (h^n/N) Σ|U_m|².
    let scale = u.cell_volume() / from_usize::<T>(u.values.len());
    let col = |i: usize| pairwise(&parts.iter().map(|p| p[i]).collect::<Vec<_>>()) * scale;
    let (k, fk, bd, st) = (col(0), col(1), col(2), col(3));
    Ok(EnergyReport {
        kinetic: k,
        fractional_kinetic: fk,
        bending: bd,
        stretching: st,
        total: (k + fk) + (bd + st),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian(dim: usize, l: f64, n: usize) -> GridField<f64> {
        GridField::from_radial(dim, l, n, |r| (-r * r).exp()).unwrap()
    }

    #[test]
    fn validates_shapes() {
        assert!(GridField::<f64>::zeros(4, 1.0, 16).is_err());
        assert!(GridField::<f64>::zeros(1, 1.0, 24).is_err());
        assert!(GridField::<f64>::zeros(1, 1.0, 8).is_err());
        assert!(GridField::<f64>::new(2, 1.0, 16, vec![Complex::new(0.0, 0.0); 17]).is_err());
        let p = ModelParams::unit(1).unwrap();
        let a = GridField::<f64>::zeros(1, 10.0, 32).unwrap();
        let b = GridField::<f64>::zeros(1, 10.0, 64).unwrap();
        assert!(evolve_grid(&p, &a, &b, 1.0).is_err());
    }

    #[test]
    fn zero_time_round_trips() {
        for dim in 1..=3 {
            let p = ModelParams::unit(dim).unwrap();
            let g = gaussian(dim, 12.0, if dim == 3 { 32 } else { 64 });
            let z = GridField::zeros(dim, 12.0, g.samples_per_axis).unwrap();
            let out = evolve_grid(&p, &g, &z, 0.0).unwrap();
            let err = g
                .values
                .iter()
                .zip(&out.values)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(err <= 1e-12, "dim {dim}: {err}");
            assert!(out.imaginary_residue() <= 1e-12);
        }
    }

    #[test]
    fn constant_velocity_grows_linearly() {
        let p = ModelParams::unit(2).unwrap();
        let c = 0.7;
        let u0 = GridField::<f64>::zeros(2, 4.0, 16).unwrap();
        let u1 = GridField::from_fn(2, 4.0, 16, |_: &[f64]| Complex::new(c, 0.0)).unwrap();
        let t = 3.0;
        let u = evolve_grid(&p, &u0, &u1, t).unwrap();
        assert_relative_eq!(u.norm_sq().sqrt(), c * t * 4.0, max_relative = 1e-12);
    }

    #[test]
    fn real_data_stays_real_and_energy_is_conserved() {
        let p = ModelParams::unit(2).unwrap();
        let u0 = GridField::from_fn(2, 40.0, 64, |x: &[f64]| {
            Complex::new((-(x[0] - 1.0).powi(2) - 2.0 * x[1] * x[1]).exp(), 0.0)
        })
        .unwrap();
        let u1 = GridField::from_fn(2, 40.0, 64, |x: &[f64]| {
            Complex::new(x[0] * (-x[0] * x[0] - x[1] * x[1]).exp(), 0.0)
        })
        .unwrap();
        let e0 = grid_energy(&p, &u0, &u1).unwrap();
        let t = 5.0;
        assert!(t < u0.validity_time(&p));
        let (u, ut) = evolve_grid_state(&p, &u0, &u1, t).unwrap();
        assert!(u.imaginary_residue() <= 1e-12);
        let e = grid_energy(&p, &u, &ut).unwrap();
        assert!(e.drift_from(&e0) <= 1e-10);
    }

    #[test]
    fn file_round_trip() {
        let g = gaussian(2, 10.0, 16);
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let first = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..first]).unwrap();
        assert_eq!(header["samples_per_axis"], 16);
        let back = GridField::<f64>::read_from(&buf[..]).unwrap();
        assert_eq!(back, g);
        assert!(GridField::<f64>::read_from(&buf[..buf.len() - 3]).is_err());
    }
}
