//! Finite-horizon dynamic programming over a discretized battery level.
//!
//! A stage decision is summarized by the battery level it ends at. For a
//! start level `b` and a target `b_t` the best transmit energy comes from one
//! of two frame structures:
//!
//! * charge phase: charge for `rho` at the optimal charging power, then send
//!   all harvest and a drain of `b + stored - b_t` to the transmitter;
//! * power split: `rho = 0`, store exactly `b_t - b` while transmitting the
//!   rest of the harvest.
//!
//! The first is concave in `rho` (the drain enters through the perspective
//! of the concave internal-to-external discharge map). The best energy for
//! every (harvest, start, target) triple does not depend on the stage or the
//! channel, so it is tabulated once and shared by all Bellman backups.

use crate::battery::BatteryModel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frame::{FrameDecision, FrameSpec};
use crate::offline::repair_decision;
use crate::random::DiscreteDistribution;
use crate::scalar::golden_section_max;
use crate::single_frame::{solve_single_frame, ChargePlan};

use super::SystemState;

#[derive(Debug, Clone, Copy)]
enum Form {
    Charge { rho: f64 },
    Split { charge_power: f64 },
}

/// Transition solver for one harvested power.
pub(crate) struct Stage<'a> {
    m: &'a BatteryModel,
    c: f64,
    net: f64,
    tau: f64,
    rho_cap: f64,
    plan: ChargePlan,
    split_store_max: f64,
}

impl<'a> Stage<'a> {
    pub fn new(f: &FrameSpec, m: &'a BatteryModel) -> Self {
        let plan = ChargePlan::new(f, m);
        Stage {
            m,
            c: f.harvested_power,
            net: f.harvested_power - f.circuit_power,
            tau: f.duration,
            rho_cap: f.rho_bandwidth_limit(),
            split_store_max: plan.store_rate * f.duration,
            plan,
        }
    }

    fn charge_energy(&self, b: f64, bt: f64, rho: f64) -> f64 {
        let t2 = (1.0 - rho) * self.tau;
        let drain = b + self.plan.store_rate * rho * self.tau - bt;
        if t2 <= 0.0 {
            return if drain.abs() <= 1e-15 { 0.0 } else { f64::NEG_INFINITY };
        }
        t2 * (self.net + self.m.discharge_curve(drain.max(0.0) / t2).0)
    }

    fn charge_form(&self, b: f64, bt: f64) -> Option<(f64, f64)> {
        let st = self.plan.store_rate * self.tau;
        let (lo, mut hi) = if st > 0.0 {
            (((bt - b) / st).max(0.0), self.rho_cap.min((self.m.capacity - b) / st))
        } else if bt <= b {
            (0.0, 0.0)
        } else {
            return None;
        };
        let q_max = self.m.max_internal_discharge_power();
        if q_max.is_finite() {
            hi = hi.min((q_max * self.tau - b + bt) / (st + q_max * self.tau));
        }
        if lo > hi {
            return None;
        }
        if hi - lo <= 1e-15 {
            return Some((lo, self.charge_energy(b, bt, lo)));
        }
        Some(golden_section_max(|r| self.charge_energy(b, bt, r), lo, hi, 1e-10))
    }

    fn split_form(&self, b: f64, bt: f64) -> Option<(f64, f64)> {
        if bt <= b || bt - b > self.split_store_max * (1.0 + 1e-12) {
            return None;
        }
        let cp = self.m.charge_for_internal((bt - b) / self.tau, self.plan.charge_power);
        Some((cp, (self.net - cp) * self.tau))
    }

    /// Largest transmit energy moving the battery from `b` to `bt`.
    fn best(&self, b: f64, bt: f64) -> Option<(f64, Form)> {
        let a = self.charge_form(b, bt).map(|(rho, e)| (e, Form::Charge { rho }));
        let s = self.split_form(b, bt).map(|(cp, e)| (e, Form::Split { charge_power: cp }));
        match (a, s) {
            (Some(a), Some(s)) => Some(if s.0 > a.0 { s } else { a }),
            (a, s) => a.or(s),
        }
        .filter(|(e, _)| *e > 0.0 || bt >= b)
    }

    /// Transmit energy, or `-inf` when the transition is impossible or would
    /// drain the battery without transmitting.
    pub fn energy(&self, b: f64, bt: f64) -> f64 {
        self.best(b, bt).map_or(f64::NEG_INFINITY, |(e, _)| e)
    }

    pub fn decision(&self, b: f64, bt: f64) -> Option<FrameDecision> {
        let (e, form) = self.best(b, bt)?;
        let form = if e <= 0.0 { Form::Split { charge_power: self.split_form(b, bt).map_or(0.0, |s| s.0) } } else { form };
        Some(match form {
            Form::Charge { rho } => {
                let t2 = (1.0 - rho) * self.tau;
                let drain = b + self.plan.store_rate * rho * self.tau - bt;
                let d_b = if drain > 0.0 && t2 > 0.0 {
                    self.m.invert_internal_discharge(drain / t2).ok()?.min(self.m.max_discharge_power())
                } else {
                    0.0
                };
                let alpha_a = if rho > 0.0 { self.plan.alpha_a } else { 1.0 };
                FrameDecision { rho, alpha_a, alpha_b: 1.0, gamma: 0.0, d_b }
            }
            Form::Split { charge_power } => {
                let alpha_b = if self.c > 0.0 { (1.0 - charge_power / self.c).clamp(self.m.alpha_c(self.c), 1.0) } else { 1.0 };
                FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b, gamma: 0.0, d_b: 0.0 }
            }
        })
    }
}

/// Tabulated optimal online policy.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    pub grid_step: f64,
    pub grid: Vec<f64>,
    pub harvest: DiscreteDistribution,
    pub gain: DiscreteDistribution,
    pub template: FrameSpec,
    pub battery: BatteryModel,
    pub horizon: usize,
    /// `J_n(c, h, b)` indexed by [`DpPolicy::index`].
    pub values: Vec<f64>,
    /// Expected value to go `J̄_n(b)`; `expected[horizon]` is all zeros.
    pub expected: Vec<Vec<f64>>,
    /// Target grid index of the optimal action, same indexing as `values`.
    pub actions: Vec<u32>,
}

impl DpPolicy {
    pub fn index(&self, n: usize, ci: usize, hi: usize, j: usize) -> usize {
        ((n * self.harvest.support.len() + ci) * self.gain.support.len() + hi) * self.grid.len() + j
    }

    /// Grid point at or below `b`.
    pub fn grid_floor(&self, b: f64) -> usize {
        let j = (b / self.grid_step + 1e-9).floor();
        (j.max(0.0) as usize).min(self.grid.len() - 1)
    }

    /// Expected total reward over the horizon from battery level `b0`.
    pub fn value(&self, b0: f64) -> f64 {
        self.expected[0][self.grid_floor(b0)]
    }
}

pub fn dp_build(
    harvest: &DiscreteDistribution,
    gain: &DiscreteDistribution,
    template: &FrameSpec,
    m: &BatteryModel,
    grid_step: f64,
    horizon: usize,
) -> Result<DpPolicy> {
    dp_build_with(harvest, gain, template, m, grid_step, horizon, Execution::default())
}

pub fn dp_build_with(
    harvest: &DiscreteDistribution,
    gain: &DiscreteDistribution,
    template: &FrameSpec,
    m: &BatteryModel,
    grid_step: f64,
    horizon: usize,
    exec: Execution,
) -> Result<DpPolicy> {
    harvest.validate()?;
    gain.validate()?;
    template.validate()?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::validation("grid_step_j", "must be positive"));
    }
    if grid_step > m.capacity {
        return Err(Error::validation("grid_step_j", format!("{grid_step} exceeds the capacity {}", m.capacity)));
    }
    if horizon == 0 {
        return Err(Error::validation("frames", "horizon must be at least 1"));
    }
    let ng = (m.capacity / grid_step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..ng).map(|j| j as f64 * grid_step).collect();
    let (nc, nh) = (harvest.support.len(), gain.support.len());

    // energies[ci][j * ng + k]
    let energies: Vec<Vec<f64>> = harvest
        .support
        .iter()
        .map(|&c| {
            let f = template.with_harvest_and_gain(c, 1.0);
            let stage = Stage::new(&f, m);
            exec.map(ng, |j| grid.iter().map(|&bt| stage.energy(grid[j], bt)).collect::<Vec<f64>>()).concat()
        })
        .collect();

    let rates: Vec<_> = (0..nc)
        .flat_map(|ci| (0..nh).map(move |hi| (ci, hi)))
        .map(|(ci, hi)| template.with_harvest_and_gain(harvest.support[ci], gain.support[hi]).rate_fn())
        .collect();

    let mut values = vec![0.0; horizon * nc * nh * ng];
    let mut actions = vec![0u32; values.len()];
    let mut expected = vec![vec![0.0; ng]; horizon + 1];
    for n in (0..horizon).rev() {
        let next = &expected[n + 1];
        let rows: Vec<(f64, u32)> = exec.map(nc * nh * ng, |idx| {
            let (ch, j) = (idx / ng, idx % ng);
            let (ci, rate) = (ch / nh, &rates[ch]);
            let row = &energies[ci][j * ng..(j + 1) * ng];
            let mut best = (f64::NEG_INFINITY, j as u32);
            for (k, &e) in row.iter().enumerate() {
                if e == f64::NEG_INFINITY {
                    continue;
                }
                let v = rate.eval(e) + next[k];
                if v > best.0 {
                    best = (v, k as u32);
                }
            }
            best
        });
        let base = n * nc * nh * ng;
        let mut exp = vec![0.0; ng];
        for (idx, (v, k)) in rows.into_iter().enumerate() {
            values[base + idx] = v;
            actions[base + idx] = k;
            let (ci, hi) = (idx / ng / nh, idx / ng % nh);
            exp[idx % ng] += harvest.probabilities[ci] * gain.probabilities[hi] * v;
        }
        expected[n] = exp;
    }

    Ok(DpPolicy {
        grid_step,
        grid,
        harvest: harvest.clone(),
        gain: gain.clone(),
        template: *template,
        battery: *m,
        horizon,
        values,
        expected,
        actions,
    })
}

/// Optimal online action. Stage indices are zero-based; the final stage
/// solves the single-frame problem exactly.
pub fn dp_act(pol: &DpPolicy, s: &SystemState) -> Result<FrameDecision> {
    let m = &pol.battery;
    let f = pol.template.with_harvest_and_gain(s.harvested_c, s.gain_h);
    let b = s.residual_b.clamp(0.0, m.capacity);
    let n = s.frame_index.min(pol.horizon - 1);
    if n == pol.horizon - 1 {
        return Ok(solve_single_frame(&f, m, b, true)?.decision);
    }
    let ci = pol.harvest.nearest(s.harvested_c);
    let hi = pol.gain.nearest(s.gain_h);
    let j = pol.grid_floor(b);
    let bt = pol.grid[pol.actions[pol.index(n, ci, hi, j)] as usize];
    let stage = Stage::new(&f, m);
    let d = match stage.decision(b, bt).or_else(|| stage.decision(pol.grid[j], bt)) {
        Some(d) => d,
        None => solve_single_frame(&f, m, b, true)?.decision,
    };
    Ok(repair_decision(&d, &f, m, b, f.rho_bandwidth_limit()))
}
