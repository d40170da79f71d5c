//! Globally adaptive Gauss–Kronrod (7/15) quadrature over a caller-supplied
//! panel partition.
//!
//! Oscillatory radial integrands are handled by pre-partitioning the range
//! with [`phase_breakpoints`], so that no panel spans more than a fixed
//! amount of phase, and then refining the worst panels until the global
//! error estimate meets the tolerance. Panels are evaluated independently
//! (in parallel for large partitions) and summed in positional order, so the
//! result does not depend on the thread count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::scalar::{cst, Real};

/// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Partitions above this size are evaluated on the rayon pool.
const PARALLEL_THRESHOLD: usize = 512;

/// A value that can be integrated: a real, a complex number, or a fixed-size
/// vector of reals.
pub trait Integrable<T: Real>: Copy + Send + Sync {
    const LEN: usize;
    fn zero() -> Self;
    fn component(&self, i: usize) -> T;
    fn from_components(f: impl FnMut(usize) -> T) -> Self;

    fn add(self, other: Self) -> Self {
        Self::from_components(|i| self.component(i) + other.component(i))
    }

    fn scale(self, s: T) -> Self {
        Self::from_components(|i| self.component(i) * s)
    }

    /// Largest component magnitude.
    fn magnitude(&self) -> T {
        (0..Self::LEN).fold(T::zero(), |m, i| m.max(self.component(i).abs()))
    }
}

impl<T: Real> Integrable<T> for T {
    const LEN: usize = 1;
    fn zero() -> Self {
        T::zero()
    }
    fn component(&self, _i: usize) -> T {
        *self
    }
    fn from_components(mut f: impl FnMut(usize) -> T) -> Self {
        f(0)
    }
}

impl<T: Real> Integrable<T> for Complex<T> {
    const LEN: usize = 2;
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn component(&self, i: usize) -> T {
        if i == 0 {
            self.re
        } else {
            self.im
        }
    }
    fn from_components(mut f: impl FnMut(usize) -> T) -> Self {
        Complex::new(f(0), f(1))
    }
}

impl<T: Real, const N: usize> Integrable<T> for [T; N] {
    const LEN: usize = N;
    fn zero() -> Self {
        [T::zero(); N]
    }
    fn component(&self, i: usize) -> T {
        self[i]
    }
    fn from_components(f: impl FnMut(usize) -> T) -> Self {
        std::array::from_fn(f)
    }
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_panels: usize,
}

impl<T: Real> QuadOptions<T> {
    pub fn relative(rel_tol: T) -> Self {
        QuadOptions {
            rel_tol,
            abs_tol: T::zero(),
            max_panels: 4_000_000,
        }
    }

    pub fn with_abs(mut self, abs_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T, V> {
    pub value: V,
    /// Estimated absolute error (largest component).
    pub error: T,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel<T, V> {
    a: T,
    b: T,
    value: V,
    error: T,
    /// Rounding-error floor included in `error`.
    floor: T,
}

impl<T: Real, V> Panel<T, V> {
    /// Splitting cannot reduce an error that sits on the rounding floor.
    fn saturated(&self) -> bool {
        self.error <= self.floor
    }
}

fn gk15<T, V, F>(f: &F, a: T, b: T) -> Panel<T, V>
where
    T: Real,
    V: Integrable<T>,
    F: Fn(T) -> V,
{
    let half = (b - a) * cst(0.5);
    let center = a + half;
    let fc = f(center);
    let mut fv1 = [V::zero(); 7];
    let mut fv2 = [V::zero(); 7];
    for j in 0..7 {
        let dx = half * cst(XGK[j]);
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
    }
    let value = V::from_components(|c| {
        let mut resk = fc.component(c) * cst(WGK[7]);
        for j in 0..7 {
            resk += cst::<T>(WGK[j]) * (fv1[j].component(c) + fv2[j].component(c));
        }
        resk * half
    });

    let mut error = T::zero();
    let mut floor_max = T::zero();
    for c in 0..V::LEN {
        let fcc = fc.component(c);
        let mut resk = fcc * cst(WGK[7]);
        let mut resg = fcc * cst(WG[3]);
        let mut resabs = fcc.abs() * cst(WGK[7]);
        for j in 0..7 {
            let (f1, f2) = (fv1[j].component(c), fv2[j].component(c));
            resk += cst::<T>(WGK[j]) * (f1 + f2);
            resabs += cst::<T>(WGK[j]) * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += cst::<T>(WG[j / 2]) * (f1 + f2);
            }
        }
        let mean = resk * cst(0.5);
        let mut resasc = cst::<T>(WGK[7]) * (fcc - mean).abs();
        for j in 0..7 {
            let (f1, f2) = (fv1[j].component(c), fv2[j].component(c));
            resasc += cst::<T>(WGK[j]) * ((f1 - mean).abs() + (f2 - mean).abs());
        }
        let h = half.abs();
        resasc *= h;
        resabs *= h;
        let mut err = ((resk - resg) * half).abs();
        if resasc != T::zero() && err != T::zero() {
            let scale = (cst::<T>(200.0) * err / resasc).powf(cst(1.5));
            err = resasc * scale.min(T::one());
        }
        let floor = cst::<T>(50.0) * T::epsilon() * resabs;
        if resabs > T::min_positive_value() / (cst::<T>(50.0) * T::epsilon()) {
            err = err.max(floor);
            floor_max = floor_max.max(floor);
        }
        error = error.max(err);
    }
    Panel {
        a,
        b,
        value,
        error,
        floor: floor_max,
    }
}

struct HeapEntry<T> {
    error: T,
    index: usize,
}

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for HeapEntry<T> {}
impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Pairwise summation in slice order.
fn pairwise_sum<T: Real, V: Integrable<T>>(values: &[V]) -> V {
    match values.len() {
        0 => V::zero(),
        1 => values[0],
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum::<T, V>(l).add(pairwise_sum::<T, V>(r))
        }
    }
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from
/// the given partition. Breakpoints must be strictly increasing.
pub fn integrate<T, V, F>(f: F, breakpoints: &[T], opts: QuadOptions<T>) -> QuadResult<T, V>
where
    T: Real,
    V: Integrable<T>,
    F: Fn(T) -> V + Sync,
{
    if breakpoints.len() < 2 {
        return QuadResult {
            value: V::zero(),
            error: T::zero(),
            panels: 0,
            converged: true,
        };
    }
    let mut panels: Vec<Panel<T, V>> = if breakpoints.len() > PARALLEL_THRESHOLD {
        breakpoints
            .par_windows(2)
            .map(|w| gk15(&f, w[0], w[1]))
            .collect()
    } else {
        breakpoints
            .windows(2)
            .map(|w| gk15(&f, w[0], w[1]))
            .collect()
    };

    let total_value = |ps: &[Panel<T, V>]| {
        let vals: Vec<V> = ps.iter().map(|p| p.value).collect();
        pairwise_sum::<T, V>(&vals)
    };
    let total_error = |ps: &[Panel<T, V>]| ps.iter().fold(T::zero(), |s, p| s + p.error);

    let mut value = total_value(&panels);
    let mut error = total_error(&panels);
    let tolerance = |v: &V| opts.abs_tol.max(opts.rel_tol * v.magnitude());

    let mut heap: BinaryHeap<HeapEntry<T>> = panels
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.saturated())
        .map(|(index, p)| HeapEntry {
            error: p.error,
            index,
        })
        .collect();
    let total_floor = |ps: &[Panel<T, V>]| ps.iter().fold(T::zero(), |s, p| s + p.floor);
    let accept = |e: T, v: &V, fl: T| e <= tolerance(v).max(fl * cst(2.0));

    let mut converged = accept(error, &value, total_floor(&panels));
    let mut since_resum = 0usize;
    while !converged && panels.len() < opts.max_panels {
        let Some(worst) = heap.pop() else { break };
        let p = panels[worst.index];
        let mid = p.a + (p.b - p.a) * cst(0.5);
        if !(mid > p.a && mid < p.b) || (p.b - p.a) <= T::epsilon() * cst(64.0) * mid.abs() {
            // Cannot split further; leave it out of the queue.
            continue;
        }
        let mut left = gk15(&f, p.a, mid);
        let mut right = gk15(&f, mid, p.b);
        let pair = left.value.add(right.value);
        let shift = pair.add(p.value.scale(-T::one())).magnitude();
        if shift <= cst::<T>(1e-5) * pair.magnitude()
            && left.error + right.error >= cst::<T>(0.99) * p.error
        {
            // Splitting no longer helps: the estimate is dominated by evaluation noise.
            left.floor = left.error;
            right.floor = right.error;
        }
        value = value
            .add(p.value.scale(-T::one()))
            .add(left.value)
            .add(right.value);
        error = error - p.error + left.error + right.error;
        panels[worst.index] = left;
        if !left.saturated() {
            heap.push(HeapEntry {
                error: left.error,
                index: worst.index,
            });
        }
        panels.push(right);
        if !right.saturated() {
            heap.push(HeapEntry {
                error: right.error,
                index: panels.len() - 1,
            });
        }

        since_resum += 1;
        if since_resum >= 4096 || heap.is_empty() || error <= tolerance(&value) {
            since_resum = 0;
            error = total_error(&panels);
            value = total_value(&panels);
            converged = accept(error, &value, total_floor(&panels));
        }
    }

    panels.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(Ordering::Equal));
    let value = total_value(&panels);
    let error = total_error(&panels);
    let converged = accept(error, &value, total_floor(&panels));
    QuadResult {
        value,
        error,
        panels: panels.len(),
        converged,
    }
}

/// Partitions `[a, b]` so that `phase` changes by at most `max_step` across
/// each panel (checked at both ends and the midpoint), with panels no wider
/// than `max_width`.
pub fn phase_breakpoints<T, P>(a: T, b: T, phase: P, max_step: T, max_width: T) -> Vec<T>
where
    T: Real,
    P: Fn(T) -> T,
{
    let mut points = vec![a];
    if !(b > a) {
        return points;
    }
    let mut r = a;
    let mut p0 = phase(a);
    let mut h = max_width.min(b - a);
    let min_step = T::epsilon() * cst(256.0);
    while r < b {
        let mut step = h.min(b - r);
        let (next, p_next) = loop {
            let r1 = if b - r <= step { b } else { r + step };
            let pm = phase(r + (r1 - r) * cst(0.5));
            let p1 = phase(r1);
            let ok = (pm - p0).abs() <= max_step
                && (p1 - pm).abs() <= max_step
                && (p1 - p0).abs() <= max_step;
            if ok || step <= min_step * (T::one() + r.abs()) {
                break (r1, p1);
            }
            step *= cst(0.5);
        };
        let taken = next - r;
        r = next;
        p0 = p_next;
        points.push(r);
        h = (taken * cst(2.0)).min(max_width);
    }
    points
}

/// Breakpoints `a, a·q, a·q², …, b` (with `a > 0`), for integrands whose
/// scale grows with the radius.
pub fn geometric_breakpoints<T: Real>(a: T, b: T, ratio: T) -> Vec<T> {
    let mut points = vec![a];
    let mut r = a;
    while r * ratio < b {
        r *= ratio;
        points.push(r);
    }
    if b > a {
        points.push(b);
    }
    points
}

/// Merges sorted breakpoint lists and drops duplicates.
pub fn merge_breakpoints<T: Real>(mut points: Vec<T>) -> Vec<T> {
    points.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    points.dedup_by(|x, y| (*x - *y).abs() <= T::epsilon() * (T::one() + y.abs()));
    points
}
