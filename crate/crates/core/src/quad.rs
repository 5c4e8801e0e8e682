//! Adaptive Gauss–Kronrod (7/15) quadrature, generic over the scalar type.
//!
//! Global adaptivity: the panel with the largest error estimate is bisected
//! until the summed estimate meets `max(abs_tol, rel_tol * |I|)` or the
//! subdivision budget is spent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scalar::{lit, to_f64, Scalar};

pub const DEFAULT_ABS_TOL: f64 = 1e-11;
pub const DEFAULT_REL_TOL: f64 = 1e-13;
pub const MAX_SUBDIVISIONS: usize = 20_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub subdivisions: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: DEFAULT_ABS_TOL, rel: DEFAULT_REL_TOL, max_subdivisions: MAX_SUBDIVISIONS }
    }
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Scalar> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Panel<T> {}
impl<T: Scalar> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        to_f64(self.error).total_cmp(&to_f64(other.error))
    }
}

fn kronrod<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * lit(WGK[7]);
    let mut res_g = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        res_k = res_k + (f1 + f2) * lit(WGK[j]);
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * lit(WG[j / 2]);
        }
    }
    let value = res_k * half_len;
    let error = ((res_k - res_g) * half_len).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: Tolerance) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), subdivisions: 0, converged: true };
    }
    if b < a {
        let r = integrate(f, b, a, tol);
        return QuadResult { value: -r.value, ..r };
    }
    let (value, error) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 1;
    let abs_tol = lit::<T>(tol.abs);
    let rel_tol = lit::<T>(tol.rel);
    let half = lit::<T>(0.5);
    loop {
        let target = abs_tol.max(rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if subdivisions >= tol.max_subdivisions {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = half * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further at this precision
            heap.push(Panel { error: T::zero(), ..worst });
            total_err = heap.iter().fold(T::zero(), |acc, p| acc + p.error);
            continue;
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;
    }
    // re-sum to shed the drift of the running updates
    let value = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
    let error = heap.iter().fold(T::zero(), |acc, p| acc + p.error);
    let converged = error <= abs_tol.max(rel_tol * value.abs());
    QuadResult { value, error, subdivisions, converged }
}

/// Integrates over consecutive pieces `[p_0, p_1], [p_1, p_2], ...`; the
/// integrand need only be smooth inside each piece.
pub fn integrate_pieces<T: Scalar, F: FnMut(T) -> T>(mut f: F, points: &[T], tol: Tolerance) -> QuadResult<T> {
    let mut out = QuadResult { value: T::zero(), error: T::zero(), subdivisions: 0, converged: true };
    for w in points.windows(2) {
        let r = integrate(&mut f, w[0], w[1], tol);
        out.value = out.value + r.value;
        out.error = out.error + r.error;
        out.subdivisions += r.subdivisions;
        out.converged &= r.converged;
    }
    out
}

/// Convenience `f64` integration with the default tolerances.
pub fn quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, Tolerance::default()).value
}
