//! Single-frame rate maximization and its brute-force oracle.
//!
//! The optimum charges at the power that maximizes internal charge power,
//! sends all phase-2 harvested power to the transmitter and drains the
//! battery (subject to `D_p`). Only the time split `rho` remains, and the
//! phase-2 transmit energy is concave in it. When the battery would fill
//! before the best split, charging slows to fill it exactly by the end of
//! the charging phase.

use crate::battery::BatteryModel;
use crate::error::{Error, Result};
use crate::frame::{decision_rate, FrameDecision, FrameSpec, ENERGY_TOL};
use crate::scalar::golden_section_max;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limiting {
    RateOptimal,
    CapacityLimited,
    BandwidthLimited,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleFrameSolution {
    pub decision: FrameDecision,
    /// Bits (or nats) per symbol.
    pub rate: f64,
    pub rho_r: f64,
    /// `f64::INFINITY` when nothing can be stored.
    pub rho_b: f64,
    pub limiting: Limiting,
    /// False when the circuit cannot run; the decision then only charges.
    pub transmission_feasible: bool,
}

/// Charging-phase quantities shared by the single-frame and online solvers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChargePlan {
    pub alpha_a: f64,
    pub charge_power: f64,
    /// Internal power stored while charging.
    pub store_rate: f64,
}

impl ChargePlan {
    pub fn new(f: &FrameSpec, m: &BatteryModel) -> Self {
        let c = f.harvested_power;
        let charge_power = m.optimal_charge_power(c);
        let store_rate = m.charge_curve(charge_power).0;
        let alpha_a = if c > 0.0 { (1.0 - charge_power / c).clamp(0.0, 1.0) } else { 0.0 };
        ChargePlan { alpha_a, charge_power, store_rate }
    }
}

/// Phase-2 discharge power when `available` internal joules are drained over
/// what remains of the frame after charging for `rho`.
fn drain_power(m: &BatteryModel, available: f64, rho: f64, tau: f64) -> Result<f64> {
    let t2 = (1.0 - rho) * tau;
    if t2 <= 0.0 || available <= 0.0 {
        return Ok(0.0);
    }
    let d = m.invert_internal_discharge(available / t2)?;
    Ok(d.min(m.max_discharge_power()))
}

fn check_initial(m: &BatteryModel, b0: f64) -> Result<f64> {
    if !(b0 >= -ENERGY_TOL && b0 <= m.capacity + ENERGY_TOL) {
        return Err(Error::validation("initial_energy_j", format!("{b0} outside [0, {}]", m.capacity)));
    }
    Ok(b0.clamp(0.0, m.capacity))
}

/// Decision that only charges the battery (as much as capacity allows) and
/// does not transmit.
pub(crate) fn charge_only(f: &FrameSpec, m: &BatteryModel, b0: f64) -> FrameDecision {
    let plan = ChargePlan::new(f, m);
    let c = f.harvested_power;
    let room = (m.capacity - b0).max(0.0);
    let mut cp = plan.charge_power;
    if plan.store_rate * f.duration > room {
        cp = m.charge_for_internal(room / f.duration, plan.charge_power);
    }
    let alpha = if c > 0.0 { (1.0 - cp / c).clamp(m.alpha_c(c), 1.0) } else { 1.0 };
    FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b: alpha, gamma: 0.0, d_b: 0.0 }
}

pub fn solve_single_frame(f: &FrameSpec, m: &BatteryModel, b0: f64, enforce_bw: bool) -> Result<SingleFrameSolution> {
    f.validate()?;
    let b0 = check_initial(m, b0)?;
    let c = f.harvested_power;
    let p = f.circuit_power;
    let tau = f.duration;
    let plan = ChargePlan::new(f, m);
    let cap = if enforce_bw { f.rho_bandwidth_limit() } else { 1.0 };
    let rho_b = if plan.store_rate > 0.0 { ((m.capacity - b0) / (plan.store_rate * tau)).max(0.0) } else { f64::INFINITY };

    // Past rho_b the battery fills anyway, so charging slows down to store
    // exactly the remaining room and the circuit runs for less time.
    let room = (m.capacity - b0).max(0.0);
    let stored = |rho: f64| (plan.store_rate * rho * tau).min(room);
    let energy = |rho: f64| -> f64 {
        let d = drain_power(m, b0 + stored(rho), rho, tau).unwrap_or(0.0);
        (c - p + d) * (1.0 - rho) * tau
    };

    // The drain cap at D_p can break concavity, so bracket on a coarse grid
    // before polishing.
    let n = 64;
    let h = cap / n as f64;
    let k = (0..=n).map(|i| (i, energy(i as f64 * h))).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a }).0;
    let lo = (k as f64 - 1.0).max(0.0) * h;
    let hi = ((k + 1) as f64 * h).min(cap);
    let (mut rho_r, best) = golden_section_max(energy, lo, hi, 1e-12);
    if energy(lo) >= best - 1e-12 * best.abs() {
        rho_r = lo;
    }

    let rho = rho_r;
    let limiting = if rho > rho_b {
        Limiting::CapacityLimited
    } else if enforce_bw && cap < 1.0 && rho >= cap - 1e-9 {
        Limiting::BandwidthLimited
    } else {
        Limiting::RateOptimal
    };
    let d_b = drain_power(m, b0 + stored(rho), rho, tau)?;
    if (c - p + d_b) * (1.0 - rho) * tau <= 0.0 {
        return Ok(SingleFrameSolution {
            decision: charge_only(f, m, b0),
            rate: 0.0,
            rho_r,
            rho_b,
            limiting,
            transmission_feasible: false,
        });
    }
    let alpha_a = if rho <= 0.0 {
        1.0
    } else if rho > rho_b {
        let cp = m.charge_for_internal(room / (rho * tau), plan.charge_power);
        (1.0 - cp / c).clamp(plan.alpha_a, 1.0)
    } else {
        plan.alpha_a
    };
    let decision = FrameDecision { rho, alpha_a, alpha_b: 1.0, gamma: 0.0, d_b };
    Ok(SingleFrameSolution {
        decision,
        rate: decision_rate(&decision, f),
        rho_r,
        rho_b,
        limiting,
        transmission_feasible: true,
    })
}

/// Resolution of the brute-force search.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub rho_step: f64,
    pub alpha_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { rho_step: 1e-3, alpha_step: 1e-3 }
    }
}

/// Exhaustive search over `(rho, alpha_a)` with the discharge either zero or
/// draining everything available. Drain powers come from the closed-form
/// discharge curve, not the bisection used by [`solve_single_frame`].
pub fn brute_force_single_frame(f: &FrameSpec, m: &BatteryModel, b0: f64, grid: GridSpec) -> Result<SingleFrameSolution> {
    if !(grid.rho_step > 0.0 && grid.alpha_step > 0.0) {
        return Err(Error::validation("grid", "steps must be positive"));
    }
    f.validate()?;
    let b0 = check_initial(m, b0)?;
    let c = f.harvested_power;
    let tau = f.duration;
    let cap = f.rho_bandwidth_limit();
    let alpha_c = m.alpha_c(c);
    let n_rho = (cap / grid.rho_step + 1e-9).floor() as usize;
    let n_alpha = ((1.0 - alpha_c) / grid.alpha_step + 1e-9).floor() as usize;

    let mut best = FrameDecision::direct();
    let mut best_rate = decision_rate(&best, f);
    for i in 0..=n_rho {
        let rho = i as f64 * grid.rho_step;
        let t2 = (1.0 - rho) * tau;
        for j in 0..=n_alpha {
            let alpha_a = if j == n_alpha { 1.0 } else { alpha_c + j as f64 * grid.alpha_step };
            if rho > 0.0 && alpha_a >= 1.0 {
                continue;
            }
            let stored = if rho > 0.0 { m.charge_curve((1.0 - alpha_a) * c).0 * rho * tau } else { 0.0 };
            if b0 + stored > m.capacity {
                continue;
            }
            let full = if t2 > 0.0 { m.discharge_curve((b0 + stored) / t2).0 } else { 0.0 };
            for d_b in [0.0, full] {
                let d = FrameDecision { rho, alpha_a: if rho > 0.0 { alpha_a } else { 1.0 }, alpha_b: 1.0, gamma: 0.0, d_b };
                let r = decision_rate(&d, f);
                if r > best_rate {
                    best_rate = r;
                    best = d;
                }
            }
            if rho == 0.0 {
                break;
            }
        }
    }
    Ok(SingleFrameSolution {
        decision: best,
        rate: best_rate,
        rho_r: best.rho,
        rho_b: f64::INFINITY,
        limiting: Limiting::RateOptimal,
        transmission_feasible: best_rate > 0.0,
    })
}
