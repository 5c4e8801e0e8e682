//! Link-level metrics of the on-off node and the outage-minimizing choice of
//! the transmit draw.
//!
//! The uplink SNR of a transmit slot is `snr_bar * u * h` with `h ~ Exp(1)`,
//! where `u` is [`EffectiveParams::ul_ratio`] (radiated power over mean stored
//! harvest; `u = delta` for an ideal node).

use serde::{Deserialize, Serialize};

use crate::dist::{finite_exact, Kind, LimitingDistribution};
use crate::error::{invalid, Error, Result};
use crate::scalar::{to_f64, Scalar, Wide};
use crate::storage::{BufferSize, EffectiveParams, Imperfections};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Mean uplink power gain `Omega_UL`.
    pub ul_gain_mean: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// `Omega_UL * X_eff / noise_power`.
    pub snr_bar: f64,
    /// Error-rate model `a Q(sqrt(b snr))`.
    pub mod_a: f64,
    pub mod_b: f64,
    /// Fixed rate `R0` in bits per channel use.
    pub rate: f64,
    /// `2^R0 - 1`.
    pub snr_threshold: f64,
}

impl LinkParams {
    /// Link described by its average SNR. The gain/noise pair is set to the
    /// consistent choice `noise_power = 1`.
    pub fn from_snr(snr_bar: f64, harvest_mean_eff: f64, mod_a: f64, mod_b: f64, rate: f64) -> Result<Self> {
        if !(harvest_mean_eff > 0.0 && harvest_mean_eff.is_finite()) {
            return Err(invalid(format!("mean harvest must be positive, got {harvest_mean_eff}")));
        }
        Self::build(snr_bar / harvest_mean_eff, 1.0, snr_bar, mod_a, mod_b, rate)
    }

    pub fn from_physical(
        ul_gain_mean: f64,
        noise_power: f64,
        harvest_mean_eff: f64,
        mod_a: f64,
        mod_b: f64,
        rate: f64,
    ) -> Result<Self> {
        if !(ul_gain_mean > 0.0 && noise_power > 0.0 && harvest_mean_eff > 0.0) {
            return Err(invalid("uplink gain, noise power and mean harvest must be positive"));
        }
        let snr_bar = ul_gain_mean * harvest_mean_eff / noise_power;
        Self::build(ul_gain_mean, noise_power, snr_bar, mod_a, mod_b, rate)
    }

    fn build(ul_gain_mean: f64, noise_power: f64, snr_bar: f64, mod_a: f64, mod_b: f64, rate: f64) -> Result<Self> {
        if !(snr_bar > 0.0 && snr_bar.is_finite()) {
            return Err(invalid(format!("average SNR must be positive, got {snr_bar}")));
        }
        if !(mod_a > 0.0 && mod_b > 0.0 && mod_a.is_finite() && mod_b.is_finite()) {
            return Err(invalid(format!("modulation constants must be positive, got a = {mod_a}, b = {mod_b}")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate must be non-negative, got {rate}")));
        }
        Ok(Self { ul_gain_mean, noise_power, snr_bar, mod_a, mod_b, rate, snr_threshold: rate.exp2() - 1.0 })
    }

    /// Same link at a different average SNR.
    pub fn with_snr(&self, snr_bar: f64) -> Result<Self> {
        let scale = snr_bar / self.snr_bar;
        Self::build(self.ul_gain_mean * scale, self.noise_power, snr_bar, self.mod_a, self.mod_b, self.rate)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Probability that the stored energy exceeds the draw, for an infinite
/// buffer: the chain transmits in every slot eventually when `delta <= 1`.
pub fn infinite_transmission_probability(delta: f64) -> f64 {
    if delta > 1.0 {
        1.0 / delta
    } else {
        1.0
    }
}

/// `1 - int_0^M g`; for an infinite buffer, `1 / delta`.
pub fn transmission_probability<T: Scalar>(dist: &LimitingDistribution<T>) -> T {
    match dist.kind {
        Kind::Infinite => T::one() / dist.params.delta,
        Kind::FiniteExact | Kind::FiniteApprox => T::one() - dist.density_mass(T::zero(), dist.params.m_eff),
    }
}

/// Average error rate `E[a Q(sqrt(b snr_bar u h))]` over `h ~ Exp(1)`.
/// Independent of the buffer.
pub fn aer(link: &LinkParams, ul_ratio: f64) -> f64 {
    let y = link.mod_b * link.snr_bar * ul_ratio;
    // 1 - sqrt(y/(2+y)) without cancellation at high SNR
    let root = (y / (2.0 + y)).sqrt();
    0.5 * link.mod_a * (2.0 / (2.0 + y)) / (1.0 + root)
}

/// `P(snr < threshold)` on a transmit slot.
pub fn channel_outage(link: &LinkParams, ul_ratio: f64) -> f64 {
    -(-link.snr_threshold / (ul_ratio * link.snr_bar)).exp_m1()
}

/// Missed transmissions plus channel outages of the transmitted slots.
pub fn total_outage(p_trans: f64, p_channel: f64) -> f64 {
    (1.0 - p_trans) + p_trans * p_channel
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit, natural-log units.
    pub residual: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("a slope fit needs at least two paired points"));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("slope fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(SlopeFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Log-log slope of the channel outage against the average SNR over
/// `snr_grid` (linear values, spanning at least two decades for a
/// meaningful diversity estimate).
pub fn diversity_slope(link: &LinkParams, ul_ratio: f64, snr_grid: &[f64]) -> Result<SlopeFit> {
    let outages = snr_grid
        .iter()
        .map(|&s| Ok(channel_outage(&link.with_snr(s)?, ul_ratio)))
        .collect::<Result<Vec<f64>>>()?;
    log_log_fit(snr_grid, &outages)
}

/// Closed-form metrics of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub p_trans: f64,
    pub aer: f64,
    pub p_out_channel: f64,
    pub p_out_total: f64,
}

/// Finite-buffer transmission probability through the exact solution in
/// quad precision.
pub fn finite_transmission_probability(eff: &EffectiveParams, l: u32) -> Result<f64> {
    let buf = BufferSize::Sections(l).resolve(eff)?;
    let exact = finite_exact::<Wide>(eff, &buf)?;
    Ok(to_f64(exact.transmission_probability()))
}

pub fn metrics(eff: &EffectiveParams, buffer: BufferSize, link: &LinkParams) -> Result<Metrics> {
    let p_trans = match buffer {
        BufferSize::Infinite => infinite_transmission_probability(eff.delta),
        BufferSize::Sections(l) => finite_transmission_probability(eff, l)?,
    };
    let u = eff.ul_ratio();
    let p_out_channel = channel_outage(link, u);
    Ok(Metrics { p_trans, aer: aer(link, u), p_out_channel, p_out_total: total_outage(p_trans, p_out_channel) })
}

/// Node and link held fixed while the draw is swept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageModel {
    pub buffer: BufferSize,
    pub link: LinkParams,
    pub imperfections: Imperfections,
    /// Mean stored harvest `beta X`.
    pub harvest_mean_eff: f64,
}

impl OutageModel {
    pub fn effective(&self, delta: f64) -> Result<EffectiveParams> {
        EffectiveParams::from_delta(delta, self.harvest_mean_eff, &self.imperfections)
    }

    pub fn total_outage(&self, delta: f64) -> Result<f64> {
        Ok(metrics(&self.effective(delta)?, self.buffer, &self.link)?.p_out_total)
    }
}

/// Outage level above which the optimum is reported as high-outage.
pub const HIGH_OUTAGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub delta: f64,
    pub outage: f64,
    pub high_outage: bool,
}

const GOLDEN_ITERATIONS: usize = 60;

/// Minimizes the total outage over `delta`: the best grid point, then a
/// golden-section search in the bracket formed by its neighbours. Ties go to
/// the smaller `delta`. Grid points whose evaluation fails are skipped.
pub fn optimal_delta(model: &OutageModel, grid: &[f64]) -> Result<Optimum> {
    if grid.is_empty() {
        return Err(invalid("the delta grid is empty"));
    }
    if grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("the delta grid must be positive, finite and strictly increasing"));
    }
    let values: Vec<f64> = grid.iter().map(|&d| model.total_outage(d).unwrap_or(f64::INFINITY)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    if !values[best].is_finite() {
        return Err(Error::InvalidParameter("no grid point could be evaluated".into()));
    }
    let mut delta = grid[best];
    let mut outage = values[best];
    if grid.len() > 1 {
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let f = |d: f64| model.total_outage(d).unwrap_or(f64::INFINITY);
        let (d, v) = golden_section(f, lo, hi);
        if v < outage {
            delta = d;
            outage = v;
        }
    }
    Ok(Optimum { delta, outage, high_outage: outage > HIGH_OUTAGE })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
