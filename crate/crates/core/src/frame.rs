//! Frame data, the achievable-rate model, energy accounting and feasibility.
//!
//! A frame of length `tau` is split into a charging phase of length `rho*tau`
//! and a transmission phase. During charging a fraction `alpha_a` of the
//! harvested power bypasses the battery; during transmission a fraction
//! `alpha_b` goes to the transmitter and the battery may add `d_b` watts.

use crate::battery::BatteryModel;
use crate::error::{Error, Result};

/// Absolute slack (J or W) tolerated by [`check_feasible`].
pub const ENERGY_TOL: f64 = 1e-9;
/// Absolute slack tolerated on dimensionless ratios.
pub const RATIO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogUnit {
    Bits,
    Nats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Unit noise spectral density; the rate argument is energy per symbol.
    UnitPsd,
    /// Noise power `n0 * bandwidth`; the rate argument is average transmit power.
    SpectralDensity {
        n0: f64,
        bandwidth: f64,
        half_factor: bool,
        unit: LogUnit,
    },
}

impl NoiseModel {
    /// Default spectral model: `N0 = 1e-15 W/Hz` over 1 MHz, halved, base 2.
    pub fn default_spectral() -> Self {
        NoiseModel::SpectralDensity { n0: 1e-15, bandwidth: 1e6, half_factor: true, unit: LogUnit::Bits }
    }

    fn validate(&self) -> Result<()> {
        if let NoiseModel::SpectralDensity { n0, bandwidth, .. } = *self {
            if !(n0 > 0.0 && n0.is_finite()) {
                return Err(Error::validation("noise.n0_w_per_hz", format!("must be > 0, got {n0}")));
            }
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::validation("noise.bandwidth_hz", format!("must be > 0, got {bandwidth}")));
            }
        }
        Ok(())
    }
}

/// Achievable rate per symbol. `p` is energy per symbol for [`NoiseModel::UnitPsd`]
/// and average transmit power (W) for [`NoiseModel::SpectralDensity`].
pub fn rate_bits_per_symbol(p: f64, h: f64, n: &NoiseModel) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::domain("transmit power", p));
    }
    if !(h >= 0.0) {
        return Err(Error::domain("channel gain", h));
    }
    Ok(match *n {
        NoiseModel::UnitPsd => (h * p).ln_1p() / std::f64::consts::LN_2,
        NoiseModel::SpectralDensity { n0, bandwidth, half_factor, unit } => {
            let nats = (h * p / (n0 * bandwidth)).ln_1p();
            let v = match unit {
                LogUnit::Bits => nats / std::f64::consts::LN_2,
                LogUnit::Nats => nats,
            };
            if half_factor {
                0.5 * v
            } else {
                v
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    /// Harvested power `c` (W).
    pub harvested_power: f64,
    /// Channel power gain `h`.
    pub channel_gain: f64,
    /// Frame duration `tau` (s).
    pub duration: f64,
    /// Symbols per frame `N_s`.
    pub symbols: f64,
    /// Circuit power `p` (W), consumed while transmitting.
    pub circuit_power: f64,
    /// Channel bandwidth `W` (Hz), used for the time-splitting cap.
    pub bandwidth: f64,
    pub noise: NoiseModel,
}

/// `R(E) = coef * ln(1 + k E)` for transmit energy `E` sent over a whole
/// phase with `gamma = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RateFn {
    pub coef: f64,
    pub k: f64,
}

impl RateFn {
    pub fn eval(&self, e: f64) -> f64 {
        if e <= 0.0 {
            0.0
        } else {
            self.coef * (self.k * e).ln_1p()
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("frame.harvested_power_w", self.harvested_power, self.harvested_power >= 0.0),
            ("frame.channel_gain", self.channel_gain, self.channel_gain >= 0.0),
            ("frame.duration_s", self.duration, self.duration > 0.0),
            ("frame.symbols", self.symbols, self.symbols > 0.0),
            ("frame.circuit_power_w", self.circuit_power, self.circuit_power >= 0.0),
            ("frame.bandwidth_hz", self.bandwidth, self.bandwidth > 0.0),
        ];
        for (key, v, ok) in checks {
            if !ok || !v.is_finite() {
                return Err(Error::validation(key, format!("invalid value {v}")));
            }
        }
        if self.symbols > self.bandwidth * self.duration * (1.0 + 1e-12) {
            return Err(Error::validation(
                "frame.symbols",
                "symbols exceed bandwidth * duration, so no transmission fits in the frame",
            ));
        }
        self.noise.validate()
    }

    /// Largest charging fraction leaving room for all symbols: `1 - N_s / (W tau)`.
    pub fn rho_bandwidth_limit(&self) -> f64 {
        (1.0 - self.symbols / (self.bandwidth * self.duration)).max(0.0)
    }

    pub fn with_harvest_and_gain(&self, c: f64, h: f64) -> Self {
        FrameSpec { harvested_power: c, channel_gain: h, ..*self }
    }

    /// Rate for `energy_per_symbol` under this frame's noise model.
    pub fn symbol_rate(&self, energy_per_symbol: f64) -> f64 {
        let arg = match self.noise {
            NoiseModel::UnitPsd => energy_per_symbol,
            NoiseModel::SpectralDensity { .. } => energy_per_symbol * self.symbols / self.duration,
        };
        rate_bits_per_symbol(arg.max(0.0), self.channel_gain, &self.noise).unwrap_or(0.0)
    }

    pub(crate) fn rate_fn(&self) -> RateFn {
        let h = self.channel_gain;
        match self.noise {
            NoiseModel::UnitPsd => RateFn { coef: 1.0 / std::f64::consts::LN_2, k: h / self.symbols },
            NoiseModel::SpectralDensity { n0, bandwidth, half_factor, unit } => {
                let mut coef = if half_factor { 0.5 } else { 1.0 };
                if unit == LogUnit::Bits {
                    coef /= std::f64::consts::LN_2;
                }
                RateFn { coef, k: h / (self.duration * n0 * bandwidth) }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameDecision {
    pub rho: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub gamma: f64,
    /// Battery discharge power during the transmission phase (W).
    pub d_b: f64,
}

impl FrameDecision {
    /// Direct transmission with no battery interaction.
    pub fn direct() -> Self {
        FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b: 1.0, gamma: 0.0, d_b: 0.0 }
    }

    /// Battery energy delivered externally over the transmission phase.
    pub fn e_b(&self, f: &FrameSpec) -> f64 {
        self.d_b * (1.0 - self.rho) * f.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub stored_in_phase1: f64,
    pub internal_drain: f64,
    pub internal_store_phase2: f64,
    pub transmit_energy: f64,
    pub circuit_energy: f64,
    /// Harvested energy not delivered to the antenna: conversion losses,
    /// circuit energy and any harvested power left unused.
    pub loss_total: f64,
}

impl EnergyLedger {
    /// Change in stored battery energy over the frame.
    pub fn net_change(&self) -> f64 {
        self.stored_in_phase1 + self.internal_store_phase2 - self.internal_drain
    }
}

/// Phase-2 transmit power before clipping at zero.
fn phase2_power(d: &FrameDecision, f: &FrameSpec) -> f64 {
    d.alpha_b * f.harvested_power - f.circuit_power + d.d_b
}

fn phase1_power(d: &FrameDecision, f: &FrameSpec) -> f64 {
    d.alpha_a * f.harvested_power - f.circuit_power
}

pub fn energy_ledger(d: &FrameDecision, f: &FrameSpec, m: &BatteryModel) -> Result<EnergyLedger> {
    let c = f.harvested_power;
    let tau = f.duration;
    let t1 = d.rho * tau;
    let t2 = (1.0 - d.rho) * tau;
    let stored_in_phase1 = if t1 > 0.0 { m.internal_charge_power((1.0 - d.alpha_a) * c)? * t1 } else { 0.0 };
    let internal_store_phase2 = if t2 > 0.0 { m.internal_charge_power((1.0 - d.alpha_b) * c)? * t2 } else { 0.0 };
    let internal_drain = if t2 > 0.0 { m.internal_discharge_power(d.d_b)? * t2 } else { 0.0 };

    let mut transmit_energy = 0.0;
    let mut circuit_energy = 0.0;
    let pb = phase2_power(d, f);
    if pb > 0.0 && t2 > 0.0 {
        transmit_energy += pb * t2;
        circuit_energy += f.circuit_power * t2;
    }
    let pa = phase1_power(d, f);
    if d.gamma > 0.0 && pa > 0.0 && t1 > 0.0 {
        transmit_energy += pa * t1;
        circuit_energy += f.circuit_power * t1;
    }
    let loss_total = c * tau - stored_in_phase1 - internal_store_phase2 + internal_drain - transmit_energy;
    Ok(EnergyLedger {
        stored_in_phase1,
        internal_drain,
        internal_store_phase2,
        transmit_energy,
        circuit_energy,
        loss_total: loss_total.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    NotFinite,
    InitialEnergy,
    EnergyCausality,
    CapacityEnd,
    CapacityPeak,
    RhoBounds,
    Bandwidth,
    AlphaA,
    AlphaB,
    Gamma,
    Discharge,
    SimultaneousChargeDischarge,
    ChargePhaseMustCharge,
}

/// A violated constraint and its signed slack (negative means violated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub slack: f64,
}

pub fn check_feasible(
    d: &FrameDecision,
    f: &FrameSpec,
    m: &BatteryModel,
    b0: f64,
    enforce_bw: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if [d.rho, d.alpha_a, d.alpha_b, d.gamma, d.d_b, b0].iter().any(|v| !v.is_finite()) {
        return vec![Violation { constraint: Constraint::NotFinite, slack: f64::NAN }];
    }
    let c = f.harvested_power;
    let alpha_c = m.alpha_c(c);
    push(&mut out, Constraint::InitialEnergy, b0.min(m.capacity - b0), ENERGY_TOL);
    push(&mut out, Constraint::RhoBounds, d.rho.min(1.0 - d.rho), RATIO_TOL);
    if enforce_bw {
        push(&mut out, Constraint::Bandwidth, f.rho_bandwidth_limit() - d.rho, RATIO_TOL);
    }
    if d.rho > 0.0 {
        push(&mut out, Constraint::AlphaA, (d.alpha_a - alpha_c).min(1.0 - d.alpha_a), RATIO_TOL);
        if d.alpha_a >= 1.0 {
            out.push(Violation { constraint: Constraint::ChargePhaseMustCharge, slack: -d.rho });
        }
    }
    if d.rho < 1.0 {
        push(&mut out, Constraint::AlphaB, (d.alpha_b - alpha_c).min(1.0 - d.alpha_b), RATIO_TOL);
    }
    push(&mut out, Constraint::Gamma, d.gamma.min(1.0 - d.gamma - f64::EPSILON), RATIO_TOL);
    push(&mut out, Constraint::Discharge, d.d_b.min(m.max_discharge_power() - d.d_b), ENERGY_TOL);
    push(&mut out, Constraint::SimultaneousChargeDischarge, -((1.0 - d.alpha_b) * d.d_b).abs(), ENERGY_TOL);
    if !out.is_empty() {
        return out;
    }
    // Box constraints hold, so the battery maps are within their domains.
    let Ok(l) = energy_ledger(d, f, m) else {
        return vec![Violation { constraint: Constraint::NotFinite, slack: f64::NAN }];
    };
    let end = b0 + l.net_change();
    push(&mut out, Constraint::EnergyCausality, end, ENERGY_TOL);
    push(&mut out, Constraint::CapacityEnd, m.capacity - end, ENERGY_TOL);
    push(&mut out, Constraint::CapacityPeak, m.capacity - (b0 + l.stored_in_phase1), ENERGY_TOL);
    out
}

fn push(out: &mut Vec<Violation>, constraint: Constraint, slack: f64, tol: f64) {
    if slack < -tol {
        out.push(Violation { constraint, slack });
    }
}

/// Rate of a decision without feasibility checks.
pub fn decision_rate(d: &FrameDecision, f: &FrameSpec) -> f64 {
    let tau = f.duration;
    let mut rate = 0.0;
    if d.gamma > 0.0 {
        let ea = phase1_power(d, f).max(0.0) * d.rho * tau;
        rate += d.gamma * f.symbol_rate(ea / (d.gamma * f.symbols));
    }
    let eb = phase2_power(d, f).max(0.0) * (1.0 - d.rho) * tau;
    rate + (1.0 - d.gamma) * f.symbol_rate(eb / ((1.0 - d.gamma) * f.symbols))
}

/// Average rate per symbol of a feasible decision.
pub fn frame_rate(d: &FrameDecision, f: &FrameSpec, m: &BatteryModel, b0: f64) -> Result<f64> {
    let v = check_feasible(d, f, m, b0, false);
    if !v.is_empty() {
        return Err(Error::Infeasible(v));
    }
    Ok(decision_rate(d, f))
}
