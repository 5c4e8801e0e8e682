//! Parameter objects and the one-slot buffer recursion.
//!
//! A non-ideal node (power amplifier inefficiency `alpha`, circuit power
//! `P_C`, storage efficiency `beta`) behaves exactly like an ideal one whose
//! per-slot draw is `M~ = P_C + alpha M` and whose harvest is scaled by `beta`.
//! [`EffectiveParams`] holds those ideal-system equivalents; everything
//! downstream works on them. Energies are joules per unit-length slot, so
//! energy and power are interchangeable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Downlink energy harvesting profile with exponential (Rayleigh block
/// fading) per-slot harvest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhProfile {
    /// AP transmit power `P_DL` in watts.
    pub dl_power: f64,
    /// Mean downlink power gain `Omega_DL`.
    pub dl_gain_mean: f64,
    /// RF-to-DC conversion efficiency `eta`.
    pub rf_dc_efficiency: f64,
    /// Mean harvested energy per slot, `eta P_DL Omega_DL`.
    pub harvest_mean: f64,
    /// `1 / harvest_mean`.
    pub harvest_rate: f64,
}

impl EhProfile {
    pub fn new(dl_power: f64, dl_gain_mean: f64, rf_dc_efficiency: f64) -> Result<Self> {
        if !(rf_dc_efficiency > 0.0 && rf_dc_efficiency < 1.0) {
            return Err(invalid(format!("RF-to-DC efficiency must lie in (0,1), got {rf_dc_efficiency}")));
        }
        if !(dl_power > 0.0 && dl_power.is_finite()) {
            return Err(invalid(format!("downlink power must be positive, got {dl_power}")));
        }
        if !(dl_gain_mean > 0.0 && dl_gain_mean.is_finite()) {
            return Err(invalid(format!("downlink gain must be positive, got {dl_gain_mean}")));
        }
        let harvest_mean = rf_dc_efficiency * dl_power * dl_gain_mean;
        Ok(Self { dl_power, dl_gain_mean, rf_dc_efficiency, harvest_mean, harvest_rate: 1.0 / harvest_mean })
    }

    /// Profile pinned by its mean harvest; the downlink gain is backed out.
    pub fn from_harvest_mean(harvest_mean: f64, dl_power: f64, rf_dc_efficiency: f64) -> Result<Self> {
        if !(harvest_mean > 0.0 && harvest_mean.is_finite()) {
            return Err(invalid(format!("mean harvest must be positive, got {harvest_mean}")));
        }
        let gain = harvest_mean / (rf_dc_efficiency * dl_power);
        let mut profile = Self::new(dl_power, gain, rf_dc_efficiency)?;
        profile.harvest_mean = harvest_mean;
        profile.harvest_rate = 1.0 / harvest_mean;
        Ok(profile)
    }
}

/// On-off policy: transmit at `target_power` whenever the buffer holds more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub target_power: f64,
}

impl Policy {
    pub fn new(target_power: f64) -> Result<Self> {
        if !(target_power > 0.0 && target_power.is_finite()) {
            return Err(invalid(format!("target power must be positive, got {target_power}")));
        }
        Ok(Self { target_power })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imperfections {
    /// `alpha >= 1`: the amplifier draws `alpha P` to radiate `P`.
    pub pa_inefficiency: f64,
    /// `beta` in `(0, 1]`: fraction of the harvested energy that is stored.
    pub storage_efficiency: f64,
    /// Constant circuit draw `P_C` while transmitting, watts.
    pub circuit_power: f64,
}

impl Imperfections {
    pub const IDEAL: Imperfections = Imperfections { pa_inefficiency: 1.0, storage_efficiency: 1.0, circuit_power: 0.0 };

    pub fn new(pa_inefficiency: f64, storage_efficiency: f64, circuit_power: f64) -> Result<Self> {
        let imp = Self { pa_inefficiency, storage_efficiency, circuit_power };
        imp.validate()?;
        Ok(imp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pa_inefficiency >= 1.0 && self.pa_inefficiency.is_finite()) {
            return Err(invalid(format!("PA inefficiency must be >= 1, got {}", self.pa_inefficiency)));
        }
        if !(self.storage_efficiency > 0.0 && self.storage_efficiency <= 1.0) {
            return Err(invalid(format!("storage efficiency must lie in (0,1], got {}", self.storage_efficiency)));
        }
        if !(self.circuit_power >= 0.0 && self.circuit_power.is_finite()) {
            return Err(invalid(format!("circuit power must be >= 0, got {}", self.circuit_power)));
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        *self == Self::IDEAL
    }
}

/// Ideal-system equivalents of a (possibly non-ideal) node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// Energy drawn per transmission, `M~ = P_C + alpha M`.
    pub m_eff: f64,
    /// Mean stored harvest per slot, `beta X`.
    pub harvest_mean_eff: f64,
    /// `1 / harvest_mean_eff`.
    pub harvest_rate_eff: f64,
    /// `M~ / (beta X)`.
    pub delta: f64,
    /// Radiated uplink power `M`; sets the uplink SNR.
    pub tx_power: f64,
}

impl EffectiveParams {
    /// Effective parameters for a node described physically.
    pub fn new(profile: &EhProfile, policy: &Policy, imp: &Imperfections) -> Result<Self> {
        imp.validate()?;
        let m_eff = imp.circuit_power + imp.pa_inefficiency * policy.target_power;
        let harvest_mean_eff = imp.storage_efficiency * profile.harvest_mean;
        Self::from_parts(m_eff, harvest_mean_eff, policy.target_power)
    }

    /// Effective parameters reached by choosing `delta` (sweep coordinate)
    /// for a given stored-harvest mean; inverts `M = (M~ - P_C) / alpha`.
    pub fn from_delta(delta: f64, harvest_mean_eff: f64, imp: &Imperfections) -> Result<Self> {
        imp.validate()?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {delta}")));
        }
        let m_eff = delta * harvest_mean_eff;
        let tx_power = (m_eff - imp.circuit_power) / imp.pa_inefficiency;
        if !(tx_power > 0.0) {
            return Err(invalid(format!(
                "delta = {delta} leaves no power for transmission after the circuit draw"
            )));
        }
        Self::from_parts(m_eff, harvest_mean_eff, tx_power)
    }

    /// Ideal node (`alpha = beta = 1`, `P_C = 0`) with the given draw and mean harvest.
    pub fn ideal(m: f64, harvest_mean: f64) -> Result<Self> {
        Self::from_parts(m, harvest_mean, m)
    }

    fn from_parts(m_eff: f64, harvest_mean_eff: f64, tx_power: f64) -> Result<Self> {
        if !(m_eff > 0.0 && m_eff.is_finite()) {
            return Err(invalid(format!("effective draw must be positive, got {m_eff}")));
        }
        if !(harvest_mean_eff > 0.0 && harvest_mean_eff.is_finite()) {
            return Err(invalid(format!("effective mean harvest must be positive, got {harvest_mean_eff}")));
        }
        if !(tx_power > 0.0 && tx_power.is_finite()) {
            return Err(invalid(format!("transmit power must be positive, got {tx_power}")));
        }
        let harvest_rate_eff = 1.0 / harvest_mean_eff;
        Ok(Self { m_eff, harvest_mean_eff, harvest_rate_eff, delta: m_eff / harvest_mean_eff, tx_power })
    }

    /// Radiated power over mean stored harvest; the uplink SNR is
    /// `snr_bar * ul_ratio * h`. Equals `delta` for an ideal node.
    pub fn ul_ratio(&self) -> f64 {
        self.tx_power / self.harvest_mean_eff
    }
}

/// Buffer capacity. A finite buffer holds an integer number of draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BufferSpec {
    Infinite,
    Finite { capacity: f64, sections: u32 },
}

const CAPACITY_REL_TOL: f64 = 1e-12;

impl BufferSpec {
    /// `K = l M~`, `l >= 2`.
    pub fn finite(sections: u32, eff: &EffectiveParams) -> Result<Self> {
        if sections < 2 {
            return Err(invalid(format!("a finite buffer needs at least 2 sections, got {sections}")));
        }
        Ok(BufferSpec::Finite { capacity: sections as f64 * eff.m_eff, sections })
    }

    /// Finite buffer from an explicit capacity, which must be a whole
    /// multiple of `M~`.
    pub fn from_capacity(capacity: f64, eff: &EffectiveParams) -> Result<Self> {
        let ratio = capacity / eff.m_eff;
        let l = ratio.round();
        if !(l >= 2.0) || ((ratio - l) / l).abs() > CAPACITY_REL_TOL {
            return Err(invalid(format!(
                "capacity {capacity} is not an integer multiple (>= 2) of the draw {}",
                eff.m_eff
            )));
        }
        Ok(BufferSpec::Finite { capacity, sections: l as u32 })
    }

    pub fn capacity(&self) -> Option<f64> {
        match self {
            BufferSpec::Infinite => None,
            BufferSpec::Finite { capacity, .. } => Some(*capacity),
        }
    }

    pub fn sections(&self) -> Option<u32> {
        match self {
            BufferSpec::Infinite => None,
            BufferSpec::Finite { sections, .. } => Some(*sections),
        }
    }
}

/// Buffer size in units of the draw; resolved against [`EffectiveParams`]
/// when the draw is only known per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BufferSize {
    Infinite,
    Sections(u32),
}

impl BufferSize {
    pub fn resolve(self, eff: &EffectiveParams) -> Result<BufferSpec> {
        match self {
            BufferSize::Infinite => Ok(BufferSpec::Infinite),
            BufferSize::Sections(l) => BufferSpec::finite(l, eff),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BufferSize::Infinite => "inf".to_string(),
            BufferSize::Sections(l) => l.to_string(),
        }
    }
}

/// Whether a slot that starts with `level` stored transmits: strictly more
/// than the draw must be available.
#[inline]
pub fn transmits(level: f64, m_eff: f64) -> bool {
    level > m_eff
}

/// Buffer level at the start of the next slot. `harvest` is the stored
/// amount, i.e. already scaled by the storage efficiency.
#[inline]
pub fn step(level: f64, harvest: f64, eff: &EffectiveParams, buf: &BufferSpec) -> f64 {
    let after = if transmits(level, eff.m_eff) { level - eff.m_eff + harvest } else { level + harvest };
    match buf {
        BufferSpec::Infinite => after,
        BufferSpec::Finite { capacity, .. } => after.min(*capacity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn table_one(m: f64) -> EffectiveParams {
        let imp = Imperfections::new(1.5, 0.9, 0.2e-6).unwrap();
        let profile = EhProfile::from_harvest_mean(1e-5 / 0.9, 1.0, 0.7).unwrap();
        EffectiveParams::new(&profile, &Policy::new(m).unwrap(), &imp).unwrap()
    }

    #[test]
    fn table_one_substitution() {
        let eff = table_one(6.3e-6);
        assert!((eff.m_eff - 9.65e-6).abs() < 1e-18);
        assert!((eff.delta - 0.965).abs() < 1e-12);
        assert!((eff.harvest_rate_eff * eff.m_eff - eff.delta).abs() < 1e-12);
    }

    #[test]
    fn ideal_substitution_is_identity() {
        let profile = EhProfile::new(2.0, 3e-6, 0.5).unwrap();
        let eff = EffectiveParams::new(&profile, &Policy::new(4e-6).unwrap(), &Imperfections::IDEAL).unwrap();
        assert_eq!(eff.m_eff, 4e-6);
        assert!((eff.delta - 4e-6 * profile.harvest_rate).abs() < 1e-15);
        assert!((profile.harvest_rate * profile.harvest_mean - 1.0).abs() < 1e-12);
        assert_eq!(eff.ul_ratio(), eff.delta);
    }

    #[test]
    fn sweep_endpoint_power() {
        let imp = Imperfections::new(1.5, 0.9, 0.2e-6).unwrap();
        let eff = EffectiveParams::from_delta(1.5, 1e-5, &imp).unwrap();
        assert!((eff.m_eff - 1.5e-5).abs() < 1e-20);
        assert!((eff.tx_power - 9.8667e-6).abs() < 1e-9);
        assert!(EffectiveParams::from_delta(0.01, 1e-5, &imp).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(EhProfile::new(1.0, 1.0, 1.0).is_err());
        assert!(Policy::new(0.0).is_err());
        assert!(Imperfections::new(0.9, 0.9, 0.0).is_err());
        assert!(Imperfections::new(1.0, 0.0, 0.0).is_err());
        assert!(Imperfections::new(1.0, 1.0, -1.0).is_err());
        let eff = EffectiveParams::ideal(1.0, 1.0).unwrap();
        assert!(BufferSpec::finite(1, &eff).is_err());
        assert!(BufferSpec::from_capacity(4.0, &eff).is_ok());
        assert!(BufferSpec::from_capacity(4.5, &eff).is_err());
    }

    #[test]
    fn step_examples() {
        let eff = EffectiveParams::ideal(1.0, 0.8).unwrap();
        let k4 = BufferSpec::finite(4, &eff).unwrap();
        assert_eq!(step(0.0, 0.37, &eff, &BufferSpec::Infinite), 0.37);
        assert_eq!(step(2.0, 0.0, &eff, &k4), 1.0);
        assert_eq!(step(3.9, 2.0, &eff, &k4), 4.0);
        // tie at the draw: no transmission
        assert_eq!(step(1.0, 0.5, &eff, &k4), 1.5);
    }

    #[test]
    fn ideal_step_matches_storage_equation_bitwise() {
        let eff = EffectiveParams::ideal(0.7, 1.0).unwrap();
        let buf = BufferSpec::finite(5, &eff).unwrap();
        let k = buf.capacity().unwrap();
        let m = 0.7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let b: f64 = rng.gen::<f64>() * k;
            let x: f64 = -rng.gen::<f64>().ln();
            let p_ul = if b > m { m } else { 0.0 };
            let literal = (b - p_ul + x).min(k);
            assert_eq!(step(b, x, &eff, &buf).to_bits(), literal.to_bits());
        }
    }

    proptest! {
        #[test]
        fn step_stays_in_range(b in 0.0f64..=4.0, x in 0.0f64..20.0) {
            let eff = EffectiveParams::ideal(1.0, 1.0).unwrap();
            let buf = BufferSpec::finite(4, &eff).unwrap();
            let next = step(b, x, &eff, &buf);
            prop_assert!((0.0..=4.0).contains(&next));
            prop_assert!(step(b * 10.0, x, &eff, &BufferSpec::Infinite) >= 0.0);
        }

        #[test]
        fn step_monotone_in_harvest(b in 0.0f64..=4.0, x in 0.0f64..10.0, dx in 0.0f64..5.0) {
            let eff = EffectiveParams::ideal(1.0, 1.0).unwrap();
            let buf = BufferSpec::finite(4, &eff).unwrap();
            prop_assert!(step(b, x + dx, &eff, &buf) >= step(b, x, &eff, &buf));
        }

        #[test]
        fn step_monotone_in_level_within_regime(b in 0.0f64..=4.0, db in 0.0f64..1.0, x in 0.0f64..10.0) {
            let eff = EffectiveParams::ideal(1.0, 1.0).unwrap();
            let buf = BufferSpec::finite(4, &eff).unwrap();
            let b2 = (b + db).min(4.0);
            // the draw switches on above M~, so monotonicity holds per regime
            prop_assume!(transmits(b, 1.0) == transmits(b2, 1.0));
            prop_assert!(step(b2, x, &eff, &buf) >= step(b, x, &eff, &buf));
        }
    }
}
