//! Battery physics: rate-dependent charge/discharge efficiencies from a series
//! internal resistance, their internal power maps, and the comparison models.
//!
//! With terminal voltage `V` and resistance `r`, the charge efficiency is
//! `1.5 - 0.5*sqrt(1 + 4 r c / V^2)` and the discharge efficiency is
//! `0.5 + 0.5*sqrt(1 - 4 r d / V^2)`. Charging is possible up to `2 V^2 / r`
//! and discharging up to `V^2 / (4 r)`.

use crate::error::{Error, Result};
use crate::scalar::{bisect_increasing, golden_section_max};

/// Relative slack allowed when checking powers against the rate limits.
const LIMIT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EfficiencyModel {
    InternalResistance,
    /// Constant efficiencies with no rate limits.
    FixedEfficiency { eta_c: f64, eta_d: f64 },
    /// Resistive charging; discharge at the zero-rate efficiency up to `D_p`.
    StepDischarge,
}

impl EfficiencyModel {
    /// Round-trip efficiency 0.75 split evenly between the two directions.
    pub fn fixed_default() -> Self {
        let eta = 0.75f64.sqrt();
        EfficiencyModel::FixedEfficiency { eta_c: eta, eta_d: eta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryModel {
    /// Capacity in J; `f64::INFINITY` for an unbounded store.
    pub capacity: f64,
    /// Internal resistance in ohms.
    pub resistance: f64,
    /// Nominal voltage in V.
    pub voltage: f64,
    pub variant: EfficiencyModel,
}

impl BatteryModel {
    pub fn new(capacity: f64, resistance: f64, voltage: f64, variant: EfficiencyModel) -> Result<Self> {
        if !(capacity >= 0.0) {
            return Err(Error::validation("battery.capacity_j", format!("must be >= 0, got {capacity}")));
        }
        if !(resistance >= 0.0) || !resistance.is_finite() {
            return Err(Error::validation(
                "battery.resistance_ohm",
                format!("must be finite and >= 0, got {resistance}"),
            ));
        }
        if !(voltage > 0.0) || !voltage.is_finite() {
            return Err(Error::validation("battery.voltage_v", format!("must be > 0, got {voltage}")));
        }
        if let EfficiencyModel::FixedEfficiency { eta_c, eta_d } = variant {
            for (k, v) in [("battery.eta_c", eta_c), ("battery.eta_d", eta_d)] {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::validation(k, format!("must lie in (0, 1], got {v}")));
                }
            }
        }
        Ok(BatteryModel { capacity, resistance, voltage, variant })
    }

    pub fn internal_resistance(capacity: f64, resistance: f64, voltage: f64) -> Result<Self> {
        Self::new(capacity, resistance, voltage, EfficiencyModel::InternalResistance)
    }

    /// Same battery with the given variant.
    pub fn with_variant(&self, variant: EfficiencyModel) -> Self {
        BatteryModel { variant, ..*self }
    }

    /// Step-discharge version used by the offline solver; fixed-efficiency
    /// models are already step-shaped and are returned unchanged.
    pub fn step_surrogate(&self) -> Self {
        match self.variant {
            EfficiencyModel::InternalResistance => self.with_variant(EfficiencyModel::StepDischarge),
            _ => *self,
        }
    }

    fn k(&self) -> f64 {
        4.0 * self.resistance / (self.voltage * self.voltage)
    }

    fn resistive(&self) -> bool {
        !matches!(self.variant, EfficiencyModel::FixedEfficiency { .. }) && self.resistance > 0.0
    }

    /// `C_p = 2 V^2 / r`; infinite for lossless or fixed-efficiency batteries.
    pub fn max_charge_power(&self) -> f64 {
        if self.resistive() {
            2.0 * self.voltage * self.voltage / self.resistance
        } else {
            f64::INFINITY
        }
    }

    /// `D_p = V^2 / (4 r)`; infinite for lossless or fixed-efficiency batteries.
    pub fn max_discharge_power(&self) -> f64 {
        if self.resistive() {
            self.voltage * self.voltage / (4.0 * self.resistance)
        } else {
            f64::INFINITY
        }
    }

    /// Lower bound `alpha_c = 1 - C_p / c` on the power-splitting ratio, clamped at 0.
    pub fn alpha_c(&self, c: f64) -> f64 {
        if c <= 0.0 {
            0.0
        } else {
            (1.0 - self.max_charge_power() / c).max(0.0)
        }
    }

    fn check_charge(&self, c_p: f64) -> Result<()> {
        let cap = self.max_charge_power();
        if !(c_p >= 0.0) || c_p > cap * (1.0 + LIMIT_SLACK) {
            return Err(Error::domain("charge power", c_p));
        }
        Ok(())
    }

    fn check_discharge(&self, d_p: f64) -> Result<()> {
        let cap = self.max_discharge_power();
        if !(d_p >= 0.0) || d_p > cap * (1.0 + LIMIT_SLACK) {
            return Err(Error::domain("discharge power", d_p));
        }
        Ok(())
    }

    pub fn charge_efficiency(&self, c_p: f64) -> Result<f64> {
        self.check_charge(c_p)?;
        Ok(match self.variant {
            EfficiencyModel::FixedEfficiency { eta_c, .. } => eta_c,
            // k c_p = 8 c_p / C_p; the normalized form is exact at the endpoints.
            _ => (1.5 - 0.5 * (1.0 + 8.0 * c_p / self.max_charge_power()).sqrt()).max(0.0),
        })
    }

    pub fn discharge_efficiency(&self, d_p: f64) -> Result<f64> {
        self.check_discharge(d_p)?;
        Ok(match self.variant {
            EfficiencyModel::FixedEfficiency { eta_d, .. } => eta_d,
            EfficiencyModel::StepDischarge => self.zero_rate_discharge_efficiency(),
            EfficiencyModel::InternalResistance => 0.5 + 0.5 * (1.0 - d_p / self.max_discharge_power()).max(0.0).sqrt(),
        })
    }

    /// Discharge efficiency in the limit of vanishing power (`N_d0`).
    pub fn zero_rate_discharge_efficiency(&self) -> f64 {
        match self.variant {
            EfficiencyModel::FixedEfficiency { eta_d, .. } => eta_d,
            _ => 1.0,
        }
    }

    /// Power entering the ideal store when charging externally at `c_p`.
    pub fn internal_charge_power(&self, c_p: f64) -> Result<f64> {
        Ok(self.charge_efficiency(c_p)? * c_p)
    }

    /// Power leaving the ideal store when delivering `d_p` externally.
    pub fn internal_discharge_power(&self, d_p: f64) -> Result<f64> {
        let eta = self.discharge_efficiency(d_p)?;
        if d_p == 0.0 {
            return Ok(0.0);
        }
        Ok(d_p / eta)
    }

    /// Internal drain rate at full discharge, `D_p / N_d(D_p)`.
    pub fn max_internal_discharge_power(&self) -> f64 {
        let dp = self.max_discharge_power();
        if dp.is_infinite() {
            return f64::INFINITY;
        }
        dp / self.discharge_efficiency(dp).unwrap_or(1.0)
    }

    /// External power `d_b` whose internal drain equals `target`, capped at `D_p`.
    /// Found by bisection on `[0, D_p]`.
    pub fn invert_internal_discharge(&self, target: f64) -> Result<f64> {
        if !(target >= 0.0) {
            return Err(Error::domain("internal discharge target", target));
        }
        let dp = self.max_discharge_power();
        if dp.is_infinite() {
            return Ok(target * self.zero_rate_discharge_efficiency());
        }
        if target >= self.max_internal_discharge_power() {
            return Ok(dp);
        }
        Ok(bisect_increasing(
            |d| self.internal_discharge_power(d).unwrap_or(f64::INFINITY),
            target,
            0.0,
            dp,
            1e-13,
        ))
    }

    /// External charge power in `[0, min(c, C_p)]` that maximizes the internal
    /// charge power. For the resistive curve the stationary point solves
    /// `s^2 - 2s - 1/3 = 0` with `s = sqrt(1 + 4 r c_p / V^2)`.
    pub fn optimal_charge_power(&self, c: f64) -> f64 {
        let limit = c.max(0.0).min(self.max_charge_power());
        if !self.resistive() {
            return limit;
        }
        let s = 1.0 + (4.0f64 / 3.0).sqrt();
        let stationary = (s * s - 1.0) / self.k();
        limit.min(stationary)
    }

    /// Golden-section version of [`optimal_charge_power`](Self::optimal_charge_power),
    /// valid for any concave internal charge curve.
    pub fn optimal_charge_power_numeric(&self, c: f64) -> f64 {
        let limit = c.max(0.0).min(self.max_charge_power());
        if limit.is_infinite() {
            return limit;
        }
        golden_section_max(|x| self.internal_charge_power(x).unwrap_or(f64::NEG_INFINITY), 0.0, limit, 1e-13).0
    }

    /// Internal charge power `f(c)` with its first two derivatives.
    pub(crate) fn charge_curve(&self, c: f64) -> (f64, f64, f64) {
        match self.variant {
            EfficiencyModel::FixedEfficiency { eta_c, .. } => (eta_c * c, eta_c, 0.0),
            _ => {
                let k = self.k();
                if k == 0.0 {
                    return (c, 1.0, 0.0);
                }
                let y = (1.0 + k * c).sqrt();
                let f = c * (1.5 - 0.5 * y);
                let f1 = 1.5 - 0.5 * y - c * k / (4.0 * y);
                let f2 = -k / (2.0 * y) + c * k * k / (8.0 * y * y * y);
                (f, f1, f2)
            }
        }
    }

    /// External charge power whose internal charge power is `s`, on the
    /// increasing branch `[0, upper]` of the charge curve.
    pub(crate) fn charge_for_internal(&self, s: f64, upper: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.variant {
            EfficiencyModel::FixedEfficiency { eta_c, .. } => return (s / eta_c).min(upper),
            _ if self.k() == 0.0 => return s.min(upper),
            _ => {}
        }
        if s >= self.charge_curve(upper).0 {
            return upper;
        }
        // Safeguarded Newton: the curve is concave and increasing on the branch,
        // so Newton from the left converges monotonically; bisection catches stalls.
        let (mut lo, mut hi) = (0.0, upper);
        let mut x = s;
        if x >= hi {
            x = 0.5 * hi;
        }
        for _ in 0..100 {
            let (f, f1, _) = self.charge_curve(x);
            if f < s {
                lo = x;
            } else {
                hi = x;
            }
            let mut nx = if f1 > 0.0 { x - (f - s) / f1 } else { 0.5 * (lo + hi) };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo < 1e-16 {
                return nx;
            }
            x = nx;
        }
        x
    }

    /// External power delivered when the store is drained at internal rate `q`,
    /// with first and second derivatives. Uses the circuit relation
    /// `q - r q^2 / V^2` rather than a numeric inverse. Beyond the maximum
    /// internal rate the output is clamped at `D_p` (zero slope).
    pub(crate) fn discharge_curve(&self, q: f64) -> (f64, f64, f64) {
        match self.variant {
            EfficiencyModel::FixedEfficiency { eta_d, .. } => (eta_d * q, eta_d, 0.0),
            EfficiencyModel::StepDischarge => {
                let n0 = self.zero_rate_discharge_efficiency();
                let qmax = self.max_internal_discharge_power();
                if q >= qmax {
                    (self.max_discharge_power(), 0.0, 0.0)
                } else {
                    (n0 * q, n0, 0.0)
                }
            }
            EfficiencyModel::InternalResistance => {
                if self.resistance == 0.0 {
                    return (q, 1.0, 0.0);
                }
                let a = self.resistance / (self.voltage * self.voltage);
                let qmax = self.max_internal_discharge_power();
                if q >= qmax {
                    (self.max_discharge_power(), 0.0, 0.0)
                } else {
                    (q - a * q * q, 1.0 - 2.0 * a * q, -2.0 * a)
                }
            }
        }
    }
}
