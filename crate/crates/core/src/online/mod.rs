//! Online policies that observe the current frame and the battery level but
//! only the distribution of future frames.

mod dp;

pub use dp::{dp_act, dp_build, dp_build_with, DpPolicy};

use std::sync::Arc;

use crate::battery::BatteryModel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frame::{check_feasible, decision_rate, energy_ledger, EnergyLedger, FrameDecision, FrameSpec, ENERGY_TOL};
use crate::offline::{algorithm1, repair_decision, OfflineProblem};
use crate::random::{realize, Law, Realization, STREAM_FIT_GAIN, STREAM_FIT_HARVEST};
use crate::scalar::golden_section_max;
use crate::single_frame::solve_single_frame;

/// What an online policy sees at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    /// Zero-based frame index.
    pub frame_index: usize,
    pub harvested_c: f64,
    pub gain_h: f64,
    /// Battery energy before the frame (J).
    pub residual_b: f64,
}

/// Solves the current frame in isolation and drains what it can.
pub fn greedy_act(s: &SystemState, template: &FrameSpec, m: &BatteryModel) -> Result<FrameDecision> {
    let f = template.with_harvest_and_gain(s.harvested_c, s.gain_h);
    Ok(solve_single_frame(&f, m, s.residual_b.clamp(0.0, m.capacity), true)?.decision)
}

/// Plans the current frame jointly with one hypothetical frame at the mean
/// harvest and gain, then commits to the current frame's part of the plan.
pub fn statistical_act(s: &SystemState, means: (f64, f64), template: &FrameSpec, m: &BatteryModel) -> Result<FrameDecision> {
    if !(means.0.is_finite() && means.1.is_finite()) {
        return Err(Error::validation("means", "must be finite"));
    }
    let frames = vec![
        template.with_harvest_and_gain(s.harvested_c, s.gain_h),
        template.with_harvest_and_gain(means.0, means.1),
    ];
    let prob = OfflineProblem::new(frames, *m, s.residual_b.clamp(0.0, m.capacity));
    Ok(algorithm1(&prob)?.decisions[0])
}

/// Policies that use one fixed ratio in every frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantRatioPolicy {
    /// Charge for `rho` of every frame with split `alpha_a`, then transmit
    /// all harvest and drain the battery.
    Ctsr { rho: f64, alpha_a: f64 },
    /// Never charge in a separate phase; store `1 - alpha_b` of the harvest.
    Cpsr { alpha_b: f64 },
}

impl ConstantRatioPolicy {
    pub fn act(&self, s: &SystemState, template: &FrameSpec, m: &BatteryModel) -> FrameDecision {
        let f = template.with_harvest_and_gain(s.harvested_c, s.gain_h);
        let b = s.residual_b.clamp(0.0, m.capacity);
        let cap = f.rho_bandwidth_limit();
        match *self {
            ConstantRatioPolicy::Cpsr { alpha_b } => {
                let d = FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b, gamma: 0.0, d_b: 0.0 };
                repair_decision(&d, &f, m, b, cap)
            }
            ConstantRatioPolicy::Ctsr { rho, alpha_a } => {
                let charge = FrameDecision { rho, alpha_a, alpha_b: 1.0, gamma: 0.0, d_b: 0.0 };
                let mut d = repair_decision(&charge, &f, m, b, cap);
                let t2 = (1.0 - d.rho) * f.duration;
                let stored = energy_ledger(&d, &f, m).map_or(0.0, |l| l.stored_in_phase1);
                let available = b + stored;
                if available > 0.0 && t2 > 0.0 {
                    let q = (available / t2).min(m.max_internal_discharge_power());
                    d.d_b = m.invert_internal_discharge(q).unwrap_or(0.0).min(m.max_discharge_power());
                    if (f.harvested_power - f.circuit_power + d.d_b) * t2 <= 0.0 {
                        d.d_b = 0.0;
                    }
                }
                repair_decision(&d, &f, m, b, cap)
            }
        }
    }
}

/// Inputs shared by the constant-ratio fits.
#[derive(Debug, Clone)]
pub struct FitSetup<'a> {
    pub harvest: &'a Law,
    pub gain: &'a Law,
    pub template: &'a FrameSpec,
    pub battery: &'a BatteryModel,
    pub b0: f64,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl FitSetup<'_> {
    fn realizations(&self) -> Vec<Realization> {
        self.exec.map(self.trials, |t| {
            realize(self.harvest, self.gain, self.horizon, self.seed, t as u64, (STREAM_FIT_HARVEST, STREAM_FIT_GAIN))
        })
    }

    fn average_rate(&self, reals: &[Realization], pol: ConstantRatioPolicy) -> f64 {
        let policy = Policy::Constant(pol);
        let rates = self.exec.map(reals.len(), |t| {
            simulate_policy(&policy, &reals[t], self.template, self.battery, self.b0).map_or(f64::NEG_INFINITY, |tr| tr.rate_avg)
        });
        rates.iter().sum::<f64>() / reals.len() as f64
    }

    /// Grid search on `[lo, hi]` followed by golden-section polishing around
    /// the best grid point.
    fn search(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        const POINTS: usize = 51;
        let step = (hi - lo) / (POINTS - 1) as f64;
        let (mut bx, mut bv) = (lo, f64::NEG_INFINITY);
        for i in 0..POINTS {
            let x = lo + step * i as f64;
            let v = f(x);
            if v > bv {
                (bx, bv) = (x, v);
            }
        }
        if step <= 0.0 {
            return bx;
        }
        let (x, v) = golden_section_max(&mut f, (bx - step).max(lo), (bx + step).min(hi), 1e-6);
        if v > bv {
            x
        } else {
            bx
        }
    }
}

pub fn fit_ctsr(setup: &FitSetup) -> Result<ConstantRatioPolicy> {
    if setup.trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    let mean_c = setup.harvest.mean();
    let alpha_a = if mean_c > 0.0 { (1.0 - setup.battery.optimal_charge_power(mean_c) / mean_c).clamp(0.0, 1.0) } else { 1.0 };
    let reals = setup.realizations();
    let cap = setup.template.rho_bandwidth_limit();
    let rho = setup.search(0.0, cap, |rho| setup.average_rate(&reals, ConstantRatioPolicy::Ctsr { rho, alpha_a }));
    Ok(ConstantRatioPolicy::Ctsr { rho, alpha_a })
}

pub fn fit_cpsr(setup: &FitSetup) -> Result<ConstantRatioPolicy> {
    if setup.trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    let reals = setup.realizations();
    let alpha_b = setup.search(0.0, 1.0, |alpha_b| setup.average_rate(&reals, ConstantRatioPolicy::Cpsr { alpha_b }));
    Ok(ConstantRatioPolicy::Cpsr { alpha_b })
}

#[derive(Debug, Clone)]
pub enum Policy {
    Dp(Arc<DpPolicy>),
    Greedy,
    Statistical { mean_harvest: f64, mean_gain: f64 },
    Constant(ConstantRatioPolicy),
}

impl Policy {
    pub fn act(&self, s: &SystemState, template: &FrameSpec, m: &BatteryModel) -> Result<FrameDecision> {
        match self {
            Policy::Dp(p) => dp_act(p, s),
            Policy::Greedy => greedy_act(s, template, m),
            Policy::Statistical { mean_harvest, mean_gain } => statistical_act(s, (*mean_harvest, *mean_gain), template, m),
            Policy::Constant(c) => Ok(c.act(s, template, m)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PolicyTrace {
    pub decisions: Vec<FrameDecision>,
    pub rates: Vec<f64>,
    /// Battery energy after each frame (J).
    pub residuals: Vec<f64>,
    pub ledgers: Vec<EnergyLedger>,
    pub rate_avg: f64,
}

/// Runs `policy` over one realization, checking every action.
pub fn simulate_policy(
    policy: &Policy,
    real: &Realization,
    template: &FrameSpec,
    m: &BatteryModel,
    b0: f64,
) -> Result<PolicyTrace> {
    if real.harvest.len() != real.gain.len() {
        return Err(Error::validation("realization", "harvest and gain lengths differ"));
    }
    let mut b = b0;
    let mut tr = PolicyTrace::default();
    for (n, (&c, &h)) in real.harvest.iter().zip(&real.gain).enumerate() {
        let s = SystemState { frame_index: n, harvested_c: c, gain_h: h, residual_b: b };
        let d = policy.act(&s, template, m)?;
        let f = template.with_harvest_and_gain(c, h);
        let v = check_feasible(&d, &f, m, b, true);
        if !v.is_empty() {
            return Err(Error::Infeasible(v));
        }
        let l = energy_ledger(&d, &f, m)?;
        let end = b + l.net_change();
        debug_assert!(end >= -ENERGY_TOL && end <= m.capacity + ENERGY_TOL);
        b = end.clamp(0.0, m.capacity);
        tr.rates.push(decision_rate(&d, &f));
        tr.decisions.push(d);
        tr.residuals.push(b);
        tr.ledgers.push(l);
    }
    tr.rate_avg = tr.rates.iter().sum::<f64>() / tr.rates.len().max(1) as f64;
    Ok(tr)
}
