//! Seeded Monte Carlo simulation of the buffer chain and the uplink.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` with its
//! stream set to `r`, so replication `r` sees the same numbers whatever the
//! number of replications or threads. Every slot draws the harvest; transmit
//! slots additionally draw the uplink fade (and, in symbol mode, the noise).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dist::{num, Kind, LimitingDistribution};
use crate::error::{Error, Result};
use crate::perf::LinkParams;
use crate::scalar::{to_f64, Scalar};
use crate::special::gaussian_q;
use crate::storage::{step, transmits, BufferSpec, EffectiveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ErrorCounting {
    /// Accumulates `a Q(sqrt(b snr))` for the drawn fade.
    AnalyticConditional,
    /// Sends `bits_per_slot` symbols per transmit slot through Gaussian noise.
    SymbolLevel { bits_per_slot: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Slots per replication, warmup included.
    pub n_slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub n_replications: u32,
    pub histogram_bins: usize,
    pub error_counting: ErrorCounting,
}

pub const MIN_HISTOGRAM_BINS: usize = 10;
pub const DEFAULT_REPLICATIONS: u32 = 10;
pub const DEFAULT_HISTOGRAM_BINS: usize = 100;
const MIN_WARMUP: u64 = 1000;
/// Confidence intervals are built from at least this many batch means.
const MIN_BATCHES: u32 = 20;
/// Slots counted as sitting at the capacity: within this fraction of it.
const ATOM_SLACK: f64 = 1e-12;
/// Span of the histogram of an infinite buffer, in draws, before the last
/// bin becomes open-ended.
const INFINITE_SPAN: f64 = 10.0;

impl SimConfig {
    /// `total_slots` of counted slots split over `n_replications`, with the
    /// default warmup for the buffer and analytic error counting.
    pub fn with_total_slots(total_slots: u64, n_replications: u32, seed: u64, buf: &BufferSpec, delta: f64) -> Result<Self> {
        if n_replications == 0 {
            return Err(Error::Config("at least one replication is needed".into()));
        }
        if total_slots == 0 {
            return Err(Error::Config("the simulation needs a positive number of slots".into()));
        }
        let warmup = default_warmup(buf, delta);
        let per = total_slots.div_ceil(n_replications as u64);
        let cfg = Self {
            n_slots: per + warmup,
            warmup_slots: warmup,
            seed,
            n_replications,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            error_counting: ErrorCounting::AnalyticConditional,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots <= self.warmup_slots {
            return Err(Error::Config(format!(
                "n_slots ({}) must exceed warmup_slots ({})",
                self.n_slots, self.warmup_slots
            )));
        }
        if self.histogram_bins < MIN_HISTOGRAM_BINS {
            return Err(Error::Config(format!("at least {MIN_HISTOGRAM_BINS} histogram bins are needed")));
        }
        if self.n_replications == 0 {
            return Err(Error::Config("at least one replication is needed".into()));
        }
        if let ErrorCounting::SymbolLevel { bits_per_slot: 0 } = self.error_counting {
            return Err(Error::Config("symbol-level counting needs at least one bit per slot".into()));
        }
        Ok(())
    }
}

/// Ten buffer fill times, `10 l / delta` slots, and at least 1000.
pub fn default_warmup(buf: &BufferSpec, delta: f64) -> u64 {
    match buf {
        BufferSpec::Infinite => MIN_WARMUP,
        BufferSpec::Finite { sections, .. } => ((10.0 * *sections as f64 / delta).ceil() as u64).max(MIN_WARMUP),
    }
}

/// Sample mean with a 95% confidence radius from batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_radius: f64,
    /// Number of trials behind `value`.
    pub trials: u64,
}

impl Estimate {
    /// Within three confidence radii, with a floor of one trial's weight so a
    /// zero-variance estimate is not held to exact equality.
    pub fn agrees(&self, reference: f64) -> bool {
        let floor = if self.trials > 0 { 1.0 / self.trials as f64 } else { f64::INFINITY };
        (self.value - reference).abs() <= 3.0 * self.ci_radius + floor
    }

    fn to_json(self) -> Value {
        json!({ "value": num(self.value), "ci_radius": num(self.ci_radius), "trials": self.trials })
    }
}

/// Post-warmup occupancy of the buffer below the capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    /// The last bin also holds everything above its upper edge.
    pub open_top: bool,
}

impl Histogram {
    fn layout(buf: &BufferSpec, m_eff: f64) -> (f64, bool) {
        match buf.capacity() {
            Some(k) => (k, false),
            None => (INFINITE_SPAN * m_eff, true),
        }
    }

    fn edges(top: f64, bins: usize) -> Vec<f64> {
        (0..=bins).map(|i| top * i as f64 / bins as f64).collect()
    }

    fn bin_of(level: f64, top: f64, bins: usize) -> usize {
        (((level / top) * bins as f64) as usize).min(bins - 1)
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin masses of `dist` on the same grid as a simulated histogram; the
    /// second value is the atom.
    pub fn from_distribution<T: Scalar>(dist: &LimitingDistribution<T>, bins: usize) -> (Histogram, f64) {
        let m = to_f64(dist.params.m_eff);
        let (top, open_top) = match dist.params.capacity {
            Some(k) => (to_f64(k), false),
            None => (INFINITE_SPAN * m, true),
        };
        let edges = Self::edges(top, bins);
        let masses = analytic_bin_masses(dist, &edges, open_top);
        (Histogram { edges, masses, open_top }, to_f64(dist.atom()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,mass\n");
        for (c, m) in self.centers().iter().zip(&self.masses) {
            out.push_str(&format!("{},{}\n", c.to_decimal(), m.to_decimal()));
        }
        out
    }
}

fn analytic_bin_masses<T: Scalar>(dist: &LimitingDistribution<T>, edges: &[f64], open_top: bool) -> Vec<f64> {
    let n = edges.len() - 1;
    (0..n)
        .map(|i| {
            let lo = T::from_f64(edges[i]).unwrap_or_else(T::zero);
            let hi = if open_top && i == n - 1 { T::infinity() } else { T::from_f64(edges[i + 1]).unwrap_or_else(T::zero) };
            to_f64(dist.density_mass(lo, hi))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub p_trans: Estimate,
    pub atom_freq: Estimate,
    /// Error rate per transmitted symbol.
    pub aer: Estimate,
    /// Outage fraction of the transmit slots.
    pub channel_outage: Estimate,
    pub total_outage: Estimate,
    pub histogram: Histogram,
    pub slots_counted: u64,
    /// Infinite buffer with `delta <= 1`: the histogram describes a
    /// transient, not a limit.
    pub non_stationary: bool,
}

impl SimResult {
    pub fn to_json(&self) -> Value {
        json!({
            "p_trans": self.p_trans.to_json(),
            "atom_freq": self.atom_freq.to_json(),
            "aer": self.aer.to_json(),
            "channel_outage": self.channel_outage.to_json(),
            "total_outage": self.total_outage.to_json(),
            "slots_counted": self.slots_counted,
            "non_stationary": self.non_stationary,
            "histogram": {
                "edges": self.histogram.edges.iter().map(|&e| num(e)).collect::<Vec<_>>(),
                "masses": self.histogram.masses.iter().map(|&m| num(m)).collect::<Vec<_>>(),
                "open_top": self.histogram.open_top,
            },
        })
    }
}

#[derive(Debug, Clone, Default)]
struct Batch {
    slots: u64,
    tx: u64,
    atom: u64,
    channel_out: u64,
    /// Summed error rate over transmit slots.
    errors: f64,
}

struct Replication {
    batches: Vec<Batch>,
    counts: Vec<u64>,
}

fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite
    -mean * (1.0 - rng.gen::<f64>()).ln()
}

fn replication(
    r: u32,
    eff: &EffectiveParams,
    buf: &BufferSpec,
    link: &LinkParams,
    cfg: &SimConfig,
    batches: u32,
    top: f64,
) -> Replication {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64);
    let counted = cfg.n_slots - cfg.warmup_slots;
    let bins = cfg.histogram_bins;
    let mut counts = vec![0u64; bins];
    let mut out = vec![Batch::default(); batches as usize];
    let atom_level = buf.capacity().map(|k| k * (1.0 - ATOM_SLACK));
    let snr_scale = link.snr_bar * eff.ul_ratio();
    let sqrt_b = link.mod_b.sqrt();
    let mut level = 0.0;
    for slot in 0..cfg.n_slots {
        let tx = transmits(level, eff.m_eff);
        if slot >= cfg.warmup_slots {
            let idx = slot - cfg.warmup_slots;
            let b = &mut out[(idx * batches as u64 / counted) as usize];
            b.slots += 1;
            if atom_level.is_some_and(|a| level >= a) {
                b.atom += 1;
            } else {
                counts[Histogram::bin_of(level, top, bins)] += 1;
            }
            if tx {
                b.tx += 1;
                let snr = snr_scale * exponential(&mut rng, 1.0);
                if snr < link.snr_threshold {
                    b.channel_out += 1;
                }
                let arg = sqrt_b * snr.sqrt();
                b.errors += match cfg.error_counting {
                    ErrorCounting::AnalyticConditional => link.mod_a * gaussian_q(arg),
                    ErrorCounting::SymbolLevel { bits_per_slot } => {
                        let wrong = (0..bits_per_slot).filter(|_| rng.sample::<f64, _>(StandardNormal) > arg).count();
                        link.mod_a * wrong as f64 / bits_per_slot as f64
                    }
                };
            }
        } else if tx {
            // keep the stream layout independent of the warmup boundary
            let _ = exponential(&mut rng, 1.0);
            if let ErrorCounting::SymbolLevel { bits_per_slot } = cfg.error_counting {
                for _ in 0..bits_per_slot {
                    let _: f64 = rng.sample(StandardNormal);
                }
            }
        }
        let harvest = exponential(&mut rng, eff.harvest_mean_eff);
        level = step(level, harvest, eff, buf);
    }
    Replication { batches: out, counts }
}

/// Pooled ratio `sum(num) / sum(den)` with a radius from the spread of the
/// per-batch ratios.
fn ratio_estimate(pairs: &[(f64, u64)]) -> Estimate {
    let total_num: f64 = pairs.iter().map(|p| p.0).sum();
    let total_den: u64 = pairs.iter().map(|p| p.1).sum();
    let value = if total_den > 0 { total_num / total_den as f64 } else { 0.0 };
    let ratios: Vec<f64> = pairs.iter().filter(|p| p.1 > 0).map(|p| p.0 / p.1 as f64).collect();
    let n = ratios.len();
    let ci_radius = if n < 2 {
        f64::INFINITY
    } else {
        let mean = ratios.iter().sum::<f64>() / n as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
        t * (var / n as f64).sqrt()
    };
    Estimate { value, ci_radius, trials: total_den }
}

/// Runs the replications in parallel and pools them in replication order.
pub fn simulate(eff: &EffectiveParams, buf: &BufferSpec, link: &LinkParams, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let counted = cfg.n_slots - cfg.warmup_slots;
    let batches = MIN_BATCHES.div_ceil(cfg.n_replications).min(counted.min(u32::MAX as u64) as u32).max(1);
    let (top, open_top) = Histogram::layout(buf, eff.m_eff);
    let reps: Vec<Replication> = (0..cfg.n_replications)
        .into_par_iter()
        .map(|r| replication(r, eff, buf, link, cfg, batches, top))
        .collect();

    let all: Vec<&Batch> = reps.iter().flat_map(|r| r.batches.iter()).collect();
    let per_slot = |f: &dyn Fn(&Batch) -> f64| ratio_estimate(&all.iter().map(|b| (f(b), b.slots)).collect::<Vec<_>>());
    let per_tx = |f: &dyn Fn(&Batch) -> f64| ratio_estimate(&all.iter().map(|b| (f(b), b.tx)).collect::<Vec<_>>());

    let slots_counted: u64 = all.iter().map(|b| b.slots).sum();
    let mut counts = vec![0u64; cfg.histogram_bins];
    for r in &reps {
        for (c, x) in counts.iter_mut().zip(&r.counts) {
            *c += x;
        }
    }
    let histogram = Histogram {
        edges: Histogram::edges(top, cfg.histogram_bins),
        masses: counts.iter().map(|&c| c as f64 / slots_counted as f64).collect(),
        open_top,
    };
    Ok(SimResult {
        p_trans: per_slot(&|b| b.tx as f64),
        atom_freq: per_slot(&|b| b.atom as f64),
        aer: per_tx(&|b| b.errors),
        channel_outage: per_tx(&|b| b.channel_out as f64),
        total_outage: per_slot(&|b| (b.slots - b.tx + b.channel_out) as f64),
        histogram,
        slots_counted,
        non_stationary: matches!(buf, BufferSpec::Infinite) && eff.delta <= 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    /// Sum over bins of |empirical - analytic| mass.
    pub l1: f64,
    /// Largest cdf gap over the bin edges and the capacity (atom included).
    pub sup_cdf: f64,
    /// |empirical - analytic| atom.
    pub atom: f64,
}

/// Distance between a simulated histogram and a limiting distribution.
pub fn distribution_distance<T: Scalar>(result: &SimResult, dist: &LimitingDistribution<T>) -> Result<Distance> {
    histogram_distance(&result.histogram, result.atom_freq.value, dist)
}

pub fn histogram_distance<T: Scalar>(hist: &Histogram, atom: f64, dist: &LimitingDistribution<T>) -> Result<Distance> {
    match (dist.kind, dist.params.capacity) {
        (Kind::Infinite, _) | (_, None) => {
            if !hist.open_top {
                return Err(Error::SupportMismatch("finite-buffer histogram against an unbounded distribution".into()));
            }
        }
        (_, Some(k)) => {
            let k = to_f64(k);
            let top = *hist.edges.last().unwrap_or(&0.0);
            if hist.open_top || (top - k).abs() > 1e-9 * k {
                return Err(Error::SupportMismatch(format!("histogram covers [0, {top}) but the capacity is {k}")));
            }
        }
    }
    let reference = analytic_bin_masses(dist, &hist.edges, hist.open_top);
    let analytic_atom = to_f64(dist.atom());
    let mut l1 = 0.0;
    let mut sup: f64 = 0.0;
    let (mut emp_cdf, mut ana_cdf) = (0.0, 0.0);
    for (e, a) in hist.masses.iter().zip(&reference) {
        l1 += (e - a).abs();
        emp_cdf += e;
        ana_cdf += a;
        sup = sup.max((emp_cdf - ana_cdf).abs());
    }
    sup = sup.max((emp_cdf + atom - ana_cdf - analytic_atom).abs());
    Ok(Distance { l1, sup_cdf: sup, atom: (atom - analytic_atom).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::finite_exact;
    use crate::perf::{aer, channel_outage, infinite_transmission_probability};

    fn unit(delta: f64) -> EffectiveParams {
        EffectiveParams::ideal(1.0, 1.0 / delta).unwrap()
    }

    fn link() -> LinkParams {
        LinkParams::from_snr(10.0, 1.0, 1.0, 2.0, 1.0).unwrap()
    }

    fn cfg(total: u64, buf: &BufferSpec, delta: f64) -> SimConfig {
        SimConfig::with_total_slots(total, DEFAULT_REPLICATIONS, 7, buf, delta).unwrap()
    }

    #[test]
    fn config_validation() {
        let buf = BufferSpec::Infinite;
        assert!(SimConfig::with_total_slots(0, 10, 1, &buf, 1.2).is_err());
        let mut c = cfg(1000, &buf, 1.2);
        c.histogram_bins = 5;
        assert!(c.validate().is_err());
        c.histogram_bins = 10;
        c.warmup_slots = c.n_slots;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_warmup_scales_with_fill_time() {
        let e = unit(0.1);
        assert_eq!(default_warmup(&BufferSpec::finite(20, &e).unwrap(), 0.1), 2000);
        assert_eq!(default_warmup(&BufferSpec::finite(4, &e).unwrap(), 0.965), 1000);
    }

    #[test]
    fn reproducible_and_replication_stable() {
        let e = unit(0.965);
        let buf = BufferSpec::finite(4, &e).unwrap();
        let c = cfg(20_000, &buf, 0.965);
        let a = simulate(&e, &buf, &link(), &c).unwrap();
        let b = simulate(&e, &buf, &link(), &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        // replication 0 alone equals replication 0 of a larger run
        let one = SimConfig { n_replications: 1, ..c };
        let two = SimConfig { n_replications: 2, ..c };
        let r1 = replication(0, &e, &buf, &link(), &one, 1, 4.0);
        let r2 = replication(0, &e, &buf, &link(), &two, 1, 4.0);
        assert_eq!(r1.counts, r2.counts);
    }

    #[test]
    fn masses_and_atom_sum_to_one() {
        let e = unit(1.2);
        let buf = BufferSpec::finite(3, &e).unwrap();
        let r = simulate(&e, &buf, &link(), &cfg(50_000, &buf, 1.2)).unwrap();
        let total: f64 = r.histogram.masses.iter().sum::<f64>() + r.atom_freq.value;
        assert!((total - 1.0).abs() < 1e-12);
        for est in [r.p_trans, r.atom_freq, r.aer, r.channel_outage, r.total_outage] {
            assert!((0.0..=1.0).contains(&est.value));
        }
    }

    #[test]
    fn infinite_buffer_transmission_probability() {
        let e = unit(1.25);
        let buf = BufferSpec::Infinite;
        let r = simulate(&e, &buf, &link(), &cfg(1_000_000, &buf, 1.25)).unwrap();
        assert!(r.p_trans.agrees(infinite_transmission_probability(1.25)), "{:?}", r.p_trans);
        assert!(!r.non_stationary);
    }

    #[test]
    fn unstable_infinite_buffer_transmits_always() {
        let e = unit(0.7);
        let buf = BufferSpec::Infinite;
        let r = simulate(&e, &buf, &link(), &cfg(1_000_000, &buf, 0.7)).unwrap();
        assert!(r.p_trans.value >= 0.999);
        assert!(r.non_stationary);
    }

    #[test]
    fn link_metrics_match_closed_forms() {
        let e = unit(0.8);
        let buf = BufferSpec::finite(4, &e).unwrap();
        let r = simulate(&e, &buf, &link(), &cfg(1_000_000, &buf, 0.8)).unwrap();
        assert!(r.aer.agrees(aer(&link(), 0.8)), "{:?}", r.aer);
        assert!(r.channel_outage.agrees(channel_outage(&link(), 0.8)), "{:?}", r.channel_outage);
    }

    #[test]
    fn counting_modes_agree() {
        let e = unit(0.8);
        let buf = BufferSpec::finite(4, &e).unwrap();
        let c = cfg(1_000_000, &buf, 0.8);
        let a = simulate(&e, &buf, &link(), &c).unwrap();
        let s = simulate(
            &e,
            &buf,
            &link(),
            &SimConfig { error_counting: ErrorCounting::SymbolLevel { bits_per_slot: 1 }, ..c },
        )
        .unwrap();
        let combined = (a.aer.ci_radius.powi(2) + s.aer.ci_radius.powi(2)).sqrt();
        assert!((a.aer.value - s.aer.value).abs() <= 3.0 * combined, "{:?} {:?}", a.aer, s.aer);
    }

    #[test]
    fn self_distance_is_zero() {
        let e = unit(0.965);
        let buf = BufferSpec::finite(4, &e).unwrap();
        let d = finite_exact::<f64>(&e, &buf).unwrap();
        let (h, atom) = Histogram::from_distribution(&d.dist, 100);
        let dist = histogram_distance(&h, atom, &d.dist).unwrap();
        assert!(dist.l1 < 1e-12 && dist.sup_cdf < 1e-12 && dist.atom < 1e-12);
    }

    #[test]
    fn support_mismatch() {
        let e = unit(1.2);
        let b4 = BufferSpec::finite(4, &e).unwrap();
        let d3 = finite_exact::<f64>(&e, &BufferSpec::finite(3, &e).unwrap()).unwrap();
        let r = simulate(&e, &b4, &link(), &cfg(20_000, &b4, 1.2)).unwrap();
        assert!(matches!(distribution_distance(&r, &d3.dist), Err(Error::SupportMismatch(_))));
        let inf = crate::dist::infinite_pdf::<f64>(&e).unwrap();
        assert!(matches!(distribution_distance(&r, &inf.dist), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn histogram_csv_shape() {
        let e = unit(1.2);
        let buf = BufferSpec::finite(3, &e).unwrap();
        let r = simulate(&e, &buf, &link(), &cfg(20_000, &buf, 1.2)).unwrap();
        let csv = r.histogram.to_csv();
        assert!(csv.starts_with("bin_center,mass\n"));
        assert_eq!(csv.lines().count(), DEFAULT_HISTOGRAM_BINS + 1);
    }
}
