//! Experiment configuration: JSON with unit-tagged physical quantities.
//! Unknown keys are rejected. Every field has a default; the defaults are
//! the reference operating point (10 uW mean harvest, 24.6 dB average SNR,
//! alpha = 1.5, beta = 0.9, P_C = 0.2 uW, R0 = 2.1 bit, BPSK).

use std::path::Path;

use anyhow::{bail, Context, Result};
use ehstore::perf::db_to_linear;
use ehstore::sim::ErrorCounting;
use ehstore::{BufferSize, EhProfile, Imperfections, LinkParams};
use serde::Deserialize;

/// Power in watts, microwatts or dBm. With unit-length slots this is also
/// the energy per slot in joules.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Power {
    W(f64),
    #[serde(rename = "uW")]
    Microwatts(f64),
    #[serde(rename = "dBm")]
    Dbm(f64),
}

impl Power {
    pub fn watts(self) -> f64 {
        match self {
            Power::W(w) => w,
            Power::Microwatts(u) => u * 1e-6,
            Power::Dbm(d) => 10f64.powf((d - 30.0) / 10.0),
        }
    }
}

pub fn to_microwatts(watts: f64) -> f64 {
    watts * 1e6
}

/// Dimensionless power ratio, linear or in dB (`dBi` accepted as dB).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Ratio {
    #[serde(rename = "linear")]
    Linear(f64),
    #[serde(rename = "dB", alias = "dBi")]
    Db(f64),
}

impl Ratio {
    pub fn linear(self) -> f64 {
        match self {
            Ratio::Linear(x) => x,
            Ratio::Db(d) => db_to_linear(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Mean harvested power before storage losses.
    pub harvest_mean: Power,
    pub dl_power: Power,
    pub rf_dc_efficiency: f64,
    pub pa_inefficiency: f64,
    pub storage_efficiency: f64,
    pub circuit_power: Power,
    /// Average uplink SNR per unit transmit-to-harvest ratio.
    pub snr_bar: Ratio,
    pub mod_a: f64,
    pub mod_b: f64,
    /// Fixed rate in bits per channel use.
    pub rate: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            harvest_mean: Power::Microwatts(10.0),
            dl_power: Power::Dbm(30.0),
            rf_dc_efficiency: 0.7,
            pa_inefficiency: 1.5,
            storage_efficiency: 0.9,
            circuit_power: Power::Microwatts(0.2),
            snr_bar: Ratio::Db(24.6),
            mod_a: 1.0,
            mod_b: 2.0,
            rate: 2.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DeltaSweep {
    Values { values: Vec<f64> },
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for DeltaSweep {
    fn default() -> Self {
        DeltaSweep::Range { start: 0.1, stop: 1.5, step: 0.05 }
    }
}

impl DeltaSweep {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            DeltaSweep::Values { values } => values.clone(),
            DeltaSweep::Range { start, stop, step } => {
                if !(*step > 0.0 && stop >= start) {
                    bail!("policy_sweep range needs step > 0 and stop >= start");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // trimmed to 12 decimals so 0.1 + 3 * 0.05 prints as 0.25
                (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
            }
        };
        if v.is_empty() {
            bail!("policy_sweep is empty");
        }
        if v.iter().any(|d| !(d.is_finite() && *d > 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
            bail!("policy_sweep values must be positive and strictly increasing");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BufferEntry {
    Sections(u32),
    Named(String),
}

impl BufferEntry {
    pub fn size(&self) -> Result<BufferSize> {
        match self {
            BufferEntry::Sections(l) if *l >= 2 => Ok(BufferSize::Sections(*l)),
            BufferEntry::Sections(l) => bail!("buffer of {l} draws: at least 2 are needed"),
            BufferEntry::Named(s) if s == "infinite" || s == "inf" => Ok(BufferSize::Infinite),
            BufferEntry::Named(s) => bail!("unknown buffer {s:?}; use a draw count or \"infinite\""),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountingMode {
    AnalyticConditional,
    SymbolLevel,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimRun {
    /// Counted slots per grid point, over all replications.
    pub slots: u64,
    pub replications: u32,
    pub seed: u64,
    pub histogram_bins: usize,
    pub error_counting: CountingMode,
    pub bits_per_slot: u32,
    /// Overrides the default warmup of ten buffer fill times.
    pub warmup_slots: Option<u64>,
}

impl Default for SimRun {
    fn default() -> Self {
        Self {
            slots: 1_000_000,
            replications: ehstore::sim::DEFAULT_REPLICATIONS,
            seed: 1,
            histogram_bins: ehstore::sim::DEFAULT_HISTOGRAM_BINS,
            error_counting: CountingMode::AnalyticConditional,
            bits_per_slot: 1,
            warmup_slots: None,
        }
    }
}

impl SimRun {
    pub fn counting(&self) -> ErrorCounting {
        match self.error_counting {
            CountingMode::AnalyticConditional => ErrorCounting::AnalyticConditional,
            CountingMode::SymbolLevel => ErrorCounting::SymbolLevel { bits_per_slot: self.bits_per_slot },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SimSetting {
    Run(SimRun),
    /// `"analytic-only"`.
    Mode(String),
}

impl Default for SimSetting {
    fn default() -> Self {
        SimSetting::Run(SimRun::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, format: Format::Csv }
    }
}

fn default_buffers() -> Vec<BufferEntry> {
    vec![BufferEntry::Sections(4), BufferEntry::Sections(7), BufferEntry::Sections(20)]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub policy_sweep: DeltaSweep,
    #[serde(default = "default_buffers")]
    pub buffers: Vec<BufferEntry>,
    #[serde(default)]
    pub sim: SimSetting,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            policy_sweep: DeltaSweep::default(),
            buffers: default_buffers(),
            sim: SimSetting::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Validated, SI-unit view of a configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub imperfections: Imperfections,
    pub link: LinkParams,
    /// `beta X`, joules per slot.
    pub harvest_mean_eff: f64,
    pub deltas: Vec<f64>,
    pub buffers: Vec<BufferSize>,
    pub sim: Option<SimRun>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let s = &self.system;
        let profile = EhProfile::from_harvest_mean(s.harvest_mean.watts(), s.dl_power.watts(), s.rf_dc_efficiency)?;
        let imperfections = Imperfections::new(s.pa_inefficiency, s.storage_efficiency, s.circuit_power.watts())?;
        let harvest_mean_eff = s.storage_efficiency * profile.harvest_mean;
        let link = LinkParams::from_snr(s.snr_bar.linear(), harvest_mean_eff, s.mod_a, s.mod_b, s.rate)?;
        let buffers = self.buffers.iter().map(BufferEntry::size).collect::<Result<Vec<_>>>()?;
        if buffers.is_empty() {
            bail!("no buffers configured");
        }
        let sim = match &self.sim {
            SimSetting::Run(run) => Some(run.clone()),
            SimSetting::Mode(m) if m == "analytic-only" => None,
            SimSetting::Mode(m) => bail!("unknown sim mode {m:?}; use an object or \"analytic-only\""),
        };
        Ok(Resolved { imperfections, link, harvest_mean_eff, deltas: self.policy_sweep.values()?, buffers, sim })
    }
}
