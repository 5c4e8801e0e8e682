//! Special functions used by the closed forms: the two real branches of the
//! Lambert W function, the upper incomplete gamma function of integer order
//! (including negative arguments), the Gaussian Q-function and the finite
//! series `R(y, l) = sum_{q=0}^{l} (y+q)^q (delta e^{-delta})^q / q!`.

use crate::error::{domain, Error, Result};
use crate::scalar::{count, lit, ln_factorial, CompensatedSum, Scalar};

/// Real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchIndex {
    /// `W_0`, values in `[-1, inf)`.
    Principal,
    /// `W_{-1}`, values in `(-inf, -1]`.
    Lower,
}

impl BranchIndex {
    pub fn order(self) -> i32 {
        match self {
            BranchIndex::Principal => 0,
            BranchIndex::Lower => -1,
        }
    }
}

const BRANCH_POINT_SLACK: f64 = 1e-12;
const BRANCH_SERIES_BAND: f64 = 1e-6;
const BRANCH_SERIES_TERMS: usize = 16;
const MAX_ITERATIONS: usize = 50;

/// Coefficients `mu_k` of `W = sum mu_k p^k`, `p = +-sqrt(2(1 + e z))`, from
/// the recurrence of Corless et al.
fn branch_point_coefficients<T: Scalar>() -> [T; BRANCH_SERIES_TERMS] {
    let mut mu = [T::zero(); BRANCH_SERIES_TERMS];
    let mut alpha = [T::zero(); BRANCH_SERIES_TERMS];
    mu[0] = -T::one();
    mu[1] = T::one();
    alpha[0] = lit(2.0);
    alpha[1] = -T::one();
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    for k in 2..BRANCH_SERIES_TERMS {
        alpha[k] = (2..k).fold(T::zero(), |acc, j| acc + mu[j] * mu[k + 1 - j]);
        let kf = count::<T>(k);
        mu[k] = (kf - T::one()) / (kf + T::one()) * (mu[k - 2] / two + alpha[k - 2] / four)
            - alpha[k] / two
            - mu[k - 1] / (kf + T::one());
    }
    mu
}

fn branch_point_series<T: Scalar>(p: T, terms: usize) -> T {
    let mu = branch_point_coefficients::<T>();
    mu[..terms].iter().rev().fold(T::zero(), |acc, &m| acc * p + m)
}

/// Real Lambert W: the `w` on the requested branch with `w e^w = z`.
///
/// Principal branch accepts `z >= -1/e`, the lower branch `-1/e <= z < 0`.
/// Arguments up to `1e-12` below `-1/e` are treated as the branch point.
pub fn lambert_w<T: Scalar>(branch: BranchIndex, z: T) -> Result<T> {
    if z.is_nan() {
        return Err(domain("lambert_w of NaN"));
    }
    let e = T::E();
    let shifted = T::one() + e * z; // 1 + e z, zero at the branch point
    if shifted < -e * lit::<T>(BRANCH_POINT_SLACK) {
        return Err(domain(format!("lambert_w argument {z} is below -1/e")));
    }
    if branch == BranchIndex::Lower && z >= T::zero() {
        return Err(domain(format!("lower lambert_w branch needs z < 0, got {z}")));
    }
    if z == T::zero() {
        return Ok(T::zero());
    }
    if z.is_infinite() {
        return Ok(z);
    }

    let shifted = shifted.max(T::zero());
    let p = {
        let root = (lit::<T>(2.0) * shifted).sqrt();
        match branch {
            BranchIndex::Principal => root,
            BranchIndex::Lower => -root,
        }
    };
    if shifted < lit(BRANCH_SERIES_BAND) {
        return Ok(branch_point_series(p, BRANCH_SERIES_TERMS));
    }

    if branch == BranchIndex::Principal && z > e {
        return Ok(newton_log_form(z));
    }

    let quarter = lit::<T>(0.25);
    let mut w = match branch {
        BranchIndex::Principal if z < -quarter => branch_point_series(p, 4),
        BranchIndex::Principal => z.ln_1p(),
        BranchIndex::Lower if z < -quarter => branch_point_series(p, 4),
        BranchIndex::Lower => {
            let l1 = (-z).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    };
    halley(&mut w, z);
    Ok(w)
}

fn halley<T: Scalar>(w: &mut T, z: T) {
    let two = lit::<T>(2.0);
    let tol = lit::<T>(8.0) * T::epsilon();
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = *w * ew - z;
        if f == T::zero() {
            return;
        }
        let wp1 = *w + T::one();
        let denom = ew * wp1 - (*w + two) * f / (two * wp1);
        let step = f / denom;
        if !step.is_finite() {
            return;
        }
        *w = *w - step;
        if step.abs() <= tol * (T::one() + w.abs()) {
            return;
        }
    }
}

/// Newton iteration on `w + ln w = ln z`; avoids `e^w` overflow for large z.
fn newton_log_form<T: Scalar>(z: T) -> T {
    let lz = z.ln();
    let l2 = lz.ln();
    let mut w = lz - l2 + l2 / lz;
    let tol = lit::<T>(8.0) * T::epsilon();
    for _ in 0..MAX_ITERATIONS {
        let f = w + w.ln() - lz;
        let step = f / (T::one() + T::one() / w);
        w = w - step;
        if step.abs() <= tol * w.abs() {
            break;
        }
    }
    w
}

/// `Gamma(s, x)` for integer `s >= 1` and any real `x`, through the finite
/// sum `(s-1)! e^{-x} sum_{k<s} x^k / k!`.
pub fn upper_incomplete_gamma_int<T: Scalar>(order: u32, x: T) -> Result<T> {
    let (value, _) = upper_incomplete_gamma_terms(order, x)?;
    Ok(value)
}

/// Returns `Gamma(s, x)` together with the sum of the magnitudes of the terms
/// that make it up, for cancellation bookkeeping.
pub(crate) fn upper_incomplete_gamma_terms<T: Scalar>(order: u32, x: T) -> Result<(T, T)> {
    if order == 0 {
        return Err(domain("incomplete gamma order must be at least 1"));
    }
    if x.is_nan() {
        return Err(domain("incomplete gamma of NaN"));
    }
    let n = (order - 1) as usize;
    let mut sum = CompensatedSum::new();
    let mut term = T::one();
    sum.add(term);
    for k in 1..=n {
        term = term * x / count::<T>(k);
        sum.add(term);
    }
    let scale = (ln_factorial::<T>(n) - x).exp();
    let value = scale * sum.value();
    let magnitude = scale * sum.magnitude();
    if !value.is_finite() || !magnitude.is_finite() {
        return Err(Error::Overflow(format!("Gamma({order}, {x}) exceeds the floating range")));
    }
    Ok((value, magnitude))
}

/// Gaussian tail probability `P(N(0,1) > x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

const LOG_GUARD: f64 = 690.0; // ~ ln(1e300)

/// `R(y, l) = sum_{q=0}^{l} (y+q)^q (delta e^{-delta})^q / q!`, with `0^0 = 1`.
///
/// Terms are accumulated directly unless one of them would exceed `1e300`,
/// in which case the sum is carried out relative to the largest log-magnitude.
pub fn r_series<T: Scalar>(y: T, l: usize, delta: T) -> T {
    let ln_z = delta.ln() - delta;
    let terms: Vec<(bool, T)> = (0..=l)
        .map(|q| {
            let base = y + count::<T>(q);
            if q == 0 {
                (false, T::zero())
            } else if base == T::zero() {
                (false, T::neg_infinity())
            } else {
                let qf = count::<T>(q);
                let negative = base < T::zero() && q % 2 == 1;
                (negative, qf * base.abs().ln() + qf * ln_z - ln_factorial::<T>(q))
            }
        })
        .collect();
    let max_log = terms.iter().map(|t| t.1).fold(T::neg_infinity(), T::max);
    let mut sum = CompensatedSum::new();
    if max_log > lit(LOG_GUARD) {
        for &(neg, lm) in &terms {
            sum.add_log(neg, lm - max_log);
        }
        return sum.value() * max_log.exp();
    }
    let z = delta * (-delta).exp();
    for q in 0..=l {
        let bz = (y + count::<T>(q)) * z;
        let term = (1..=q).fold(T::one(), |acc, k| acc * bz / count::<T>(k));
        sum.add(term);
    }
    sum.value()
}
