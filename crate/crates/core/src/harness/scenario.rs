//! Scenario files: a versioned TOML schema with documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, EfficiencyModel};
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, LogUnit, NoiseModel};
use crate::random::{DiscreteDistribution, Law};

pub const SCHEMA_VERSION: u32 = 1;

/// Discharge model used by every policy and for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DischargeModel {
    #[default]
    True,
    Step,
}

impl std::str::FromStr for DischargeModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(DischargeModel::True),
            "step" => Ok(DischargeModel::Step),
            other => Err(Error::validation("discharge_model", format!("expected `true` or `step`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    /// Battery grid step of the dynamic program (J).
    pub grid_step_j: f64,
    /// Equiprobable cells used to quantize a continuous gain law.
    pub gain_bins: usize,
    /// Monte Carlo trials used to fit the constant-ratio policies.
    pub fit_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Frame parameters shared by all frames; harvest and gain are overwritten
    /// per frame.
    pub template: FrameSpec,
    pub frames: usize,
    pub b0: f64,
    pub battery: BatteryModel,
    pub harvest: Law,
    pub gain: Law,
    pub seed: u64,
    pub trials: usize,
    pub discharge: DischargeModel,
    pub online: OnlineConfig,
}

impl Scenario {
    /// Battery model actually used by the policies.
    pub fn effective_battery(&self) -> BatteryModel {
        match (self.discharge, self.battery.variant) {
            (DischargeModel::Step, EfficiencyModel::InternalResistance) => self.battery.step_surrogate(),
            _ => self.battery,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        if self.frames == 0 {
            return Err(Error::validation("frames", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        if !(self.b0 >= 0.0 && self.b0 <= self.battery.capacity) {
            return Err(Error::validation("initial_energy_j", format!("{} outside [0, capacity]", self.b0)));
        }
        self.harvest.validate(self.frames, "harvest")?;
        self.gain.validate(self.frames, "gain")?;
        let o = &self.online;
        if !(o.grid_step_j > 0.0 && o.grid_step_j <= self.battery.capacity) {
            return Err(Error::validation("online.grid_step_j", "must lie in (0, capacity]"));
        }
        if o.gain_bins == 0 || o.fit_trials == 0 {
            return Err(Error::validation("online", "gain_bins and fit_trials must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_scenario()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile::from_scenario(self)).expect("scenario serializes")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml_str(&text)
}

// On-disk schema. Every key except `schema` has a default.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: u32,
    #[serde(default = "d_frames")]
    frames: usize,
    #[serde(default = "d_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    initial_energy_j: f64,
    #[serde(default)]
    discharge_model: DischargeModel,
    #[serde(default)]
    frame: FrameFile,
    #[serde(default)]
    noise: NoiseFile,
    #[serde(default)]
    battery: BatteryFile,
    #[serde(default = "d_harvest")]
    harvest: HarvestFile,
    #[serde(default = "d_gain")]
    gain: GainFile,
    #[serde(default)]
    online: OnlineFile,
}

fn d_frames() -> usize {
    5
}
fn d_trials() -> usize {
    1
}
fn d_harvest() -> HarvestFile {
    HarvestFile::Uniform { values: vec![0.1] }
}
fn d_gain() -> GainFile {
    GainFile::Exponential { mean: 1.0 }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FrameFile {
    duration_s: f64,
    symbols: f64,
    bandwidth_hz: f64,
    circuit_power_w: f64,
}

impl Default for FrameFile {
    fn default() -> Self {
        FrameFile { duration_s: 1.0, symbols: 1e6, bandwidth_hz: 1e6, circuit_power_w: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NoiseKind {
    Spectral,
    UnitPsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum UnitFile {
    Bits,
    Nats,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NoiseFile {
    kind: NoiseKind,
    n0_w_per_hz: f64,
    bandwidth_hz: f64,
    half_factor: bool,
    unit: UnitFile,
}

impl Default for NoiseFile {
    fn default() -> Self {
        NoiseFile { kind: NoiseKind::Spectral, n0_w_per_hz: 1e-15, bandwidth_hz: 1e6, half_factor: true, unit: UnitFile::Bits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BatteryKind {
    InternalResistance,
    Fixed,
    Step,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BatteryFile {
    model: BatteryKind,
    capacity_j: f64,
    resistance_ohm: f64,
    voltage_v: f64,
    eta_c: f64,
    eta_d: f64,
}

impl Default for BatteryFile {
    fn default() -> Self {
        let eta = 0.75f64.sqrt();
        BatteryFile { model: BatteryKind::InternalResistance, capacity_j: 0.1, resistance_ohm: 5.0, voltage_v: 1.5, eta_c: eta, eta_d: eta }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
enum HarvestFile {
    Deterministic { values: Vec<f64> },
    Uniform { values: Vec<f64> },
    Custom { values: Vec<f64>, probabilities: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
enum GainFile {
    Deterministic { values: Vec<f64> },
    Exponential {
        #[serde(default = "one")]
        mean: f64,
    },
    Custom { values: Vec<f64>, probabilities: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct OnlineFile {
    /// Defaults to 0.0005 of the capacity.
    grid_step_j: Option<f64>,
    gain_bins: Option<usize>,
    /// Defaults to `min(trials, 1000)`.
    fit_trials: Option<usize>,
}

fn law_from_file(values: Vec<f64>, probabilities: Option<Vec<f64>>, key: &str) -> Result<Law> {
    let d = match probabilities {
        Some(p) => DiscreteDistribution::new(values, p),
        None => DiscreteDistribution::uniform(values),
    }
    .map_err(|e| Error::validation(key, e.to_string()))?;
    Ok(Law::Discrete(d))
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::validation("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        let noise = match self.noise.kind {
            NoiseKind::UnitPsd => NoiseModel::UnitPsd,
            NoiseKind::Spectral => NoiseModel::SpectralDensity {
                n0: self.noise.n0_w_per_hz,
                bandwidth: self.noise.bandwidth_hz,
                half_factor: self.noise.half_factor,
                unit: match self.noise.unit {
                    UnitFile::Bits => LogUnit::Bits,
                    UnitFile::Nats => LogUnit::Nats,
                },
            },
        };
        let template = FrameSpec {
            harvested_power: 0.0,
            channel_gain: 1.0,
            duration: self.frame.duration_s,
            symbols: self.frame.symbols,
            circuit_power: self.frame.circuit_power_w,
            bandwidth: self.frame.bandwidth_hz,
            noise,
        };
        let b = &self.battery;
        let variant = match b.model {
            BatteryKind::InternalResistance => EfficiencyModel::InternalResistance,
            BatteryKind::Fixed => EfficiencyModel::FixedEfficiency { eta_c: b.eta_c, eta_d: b.eta_d },
            BatteryKind::Step => EfficiencyModel::StepDischarge,
        };
        let battery = BatteryModel::new(b.capacity_j, b.resistance_ohm, b.voltage_v, variant).map_err(|e| match e {
            Error::Domain { what, value } => Error::validation(format!("battery.{what}"), format!("invalid value {value}")),
            e => e,
        })?;
        let harvest = match self.harvest {
            HarvestFile::Deterministic { values } => Law::Deterministic(values),
            HarvestFile::Uniform { values } => law_from_file(values, None, "harvest")?,
            HarvestFile::Custom { values, probabilities } => law_from_file(values, Some(probabilities), "harvest")?,
        };
        let gain = match self.gain {
            GainFile::Deterministic { values } => Law::Deterministic(values),
            GainFile::Exponential { mean } => Law::Exponential { mean },
            GainFile::Custom { values, probabilities } => law_from_file(values, Some(probabilities), "gain")?,
        };
        let online = OnlineConfig {
            grid_step_j: self.online.grid_step_j.unwrap_or(0.0005 * battery.capacity),
            gain_bins: self.online.gain_bins.unwrap_or(8),
            fit_trials: self.online.fit_trials.unwrap_or(self.trials.min(1000)),
        };
        let s = Scenario {
            template,
            frames: self.frames,
            b0: self.initial_energy_j,
            battery,
            harvest,
            gain,
            seed: self.seed,
            trials: self.trials,
            discharge: self.discharge_model,
            online,
        };
        s.validate()?;
        Ok(s)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let noise = match s.template.noise {
            NoiseModel::UnitPsd => NoiseFile { kind: NoiseKind::UnitPsd, ..NoiseFile::default() },
            NoiseModel::SpectralDensity { n0, bandwidth, half_factor, unit } => NoiseFile {
                kind: NoiseKind::Spectral,
                n0_w_per_hz: n0,
                bandwidth_hz: bandwidth,
                half_factor,
                unit: if unit == LogUnit::Bits { UnitFile::Bits } else { UnitFile::Nats },
            },
        };
        let (model, eta_c, eta_d) = match s.battery.variant {
            EfficiencyModel::InternalResistance => (BatteryKind::InternalResistance, BatteryFile::default().eta_c, BatteryFile::default().eta_d),
            EfficiencyModel::FixedEfficiency { eta_c, eta_d } => (BatteryKind::Fixed, eta_c, eta_d),
            EfficiencyModel::StepDischarge => (BatteryKind::Step, BatteryFile::default().eta_c, BatteryFile::default().eta_d),
        };
        let discrete = |d: &DiscreteDistribution| (d.support.clone(), d.probabilities.clone());
        let harvest = match &s.harvest {
            Law::Deterministic(v) => HarvestFile::Deterministic { values: v.clone() },
            Law::Discrete(d) => {
                let (values, probabilities) = discrete(d);
                HarvestFile::Custom { values, probabilities }
            }
            Law::Exponential { mean } => HarvestFile::Uniform { values: vec![*mean] },
        };
        let gain = match &s.gain {
            Law::Deterministic(v) => GainFile::Deterministic { values: v.clone() },
            Law::Discrete(d) => {
                let (values, probabilities) = discrete(d);
                GainFile::Custom { values, probabilities }
            }
            Law::Exponential { mean } => GainFile::Exponential { mean: *mean },
        };
        ScenarioFile {
            schema: SCHEMA_VERSION,
            frames: s.frames,
            trials: s.trials,
            seed: s.seed,
            initial_energy_j: s.b0,
            discharge_model: s.discharge,
            frame: FrameFile {
                duration_s: s.template.duration,
                symbols: s.template.symbols,
                bandwidth_hz: s.template.bandwidth,
                circuit_power_w: s.template.circuit_power,
            },
            noise,
            battery: BatteryFile {
                model,
                capacity_j: s.battery.capacity,
                resistance_ohm: s.battery.resistance,
                voltage_v: s.battery.voltage,
                eta_c,
                eta_d,
            },
            harvest,
            gain,
            online: OnlineFile {
                grid_step_j: Some(s.online.grid_step_j),
                gain_bins: Some(s.online.gain_bins),
                fit_trials: Some(s.online.fit_trials),
            },
        }
    }
}
