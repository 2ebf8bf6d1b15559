//! Multi-frame offline optimization with non-causal knowledge of all frames.
//!
//! Every solve goes through the convex program in [`convex`]. Charge-phase
//! frames use the step discharge surrogate; power-splitting frames may use
//! the exact discharge curve. Decisions are then recovered against the
//! evaluation battery and replayed through the energy ledger, so reported
//! rates and residuals are always those of a feasible trajectory.

mod banded;
pub(crate) mod convex;

use crate::battery::{BatteryModel, EfficiencyModel};
use crate::error::{Error, Result};
use crate::frame::{decision_rate, energy_ledger, EnergyLedger, FrameDecision, FrameSpec, ENERGY_TOL};
use crate::single_frame::ChargePlan;
use convex::{ChargeCurve, ConvexFrame, ConvexProblem, ConvexSolution, DischargeCurve, FrameKind};

/// Frames whose planned transmit energy falls below this are treated as silent.
const SILENT_ENERGY: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OfflineProblem {
    pub frames: Vec<FrameSpec>,
    pub battery: BatteryModel,
    pub b0: f64,
    /// All circuit powers are zero.
    pub circuit_zero: bool,
    /// Cap the charging fraction at the bandwidth limit.
    pub enforce_bw: bool,
}

impl OfflineProblem {
    pub fn new(frames: Vec<FrameSpec>, battery: BatteryModel, b0: f64) -> Self {
        let circuit_zero = frames.iter().all(|f| f.circuit_power == 0.0);
        OfflineProblem { frames, battery, b0, circuit_zero, enforce_bw: true }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Err(Error::validation("frames", "at least one frame is required"));
        };
        for f in &self.frames {
            f.validate()?;
            if (f.duration - first.duration).abs() > 1e-12 * first.duration {
                return Err(Error::validation("frame.duration_s", "all frames must share one duration"));
            }
            if self.circuit_zero && f.circuit_power != 0.0 {
                return Err(Error::validation("frame.circuit_power_w", "circuit_zero set but a frame has p > 0"));
            }
        }
        if !(self.b0 >= 0.0 && self.b0 <= self.battery.capacity) {
            return Err(Error::validation("initial_energy_j", format!("{} outside [0, capacity]", self.b0)));
        }
        Ok(())
    }

    fn rho_cap(&self, f: &FrameSpec) -> f64 {
        if self.enforce_bw {
            f.rho_bandwidth_limit()
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `rho` free, all phase-2 harvest to the transmitter.
    ChargePhase,
    /// `rho = 0`, harvest split between battery and transmitter.
    SplitPower,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePattern(pub Vec<Phase>);

impl PhasePattern {
    pub fn uniform(n: usize, p: Phase) -> Self {
        PhasePattern(vec![p; n])
    }

    /// All `2^n` patterns, ordered by bitmask (bit set = split power).
    pub fn enumerate(n: usize) -> Vec<PhasePattern> {
        (0..1usize << n)
            .map(|mask| {
                PhasePattern((0..n).map(|i| if mask >> i & 1 == 1 { Phase::SplitPower } else { Phase::ChargePhase }).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub newton_steps: usize,
    /// Barrier duality-gap bound `m / t` of the last solve.
    pub gap: f64,
    /// The solved program was convex, so the optimum is global.
    pub global: bool,
    pub convex_solves: usize,
    /// Sum of frame rates planned by the last convex program.
    pub planned_rate_sum: f64,
    /// Algorithm 1 fell back to its all-charge-phase solution.
    pub refinement_rejected: bool,
}

#[derive(Debug, Clone)]
pub struct OfflineSolution {
    pub decisions: Vec<FrameDecision>,
    /// Battery energy delivered externally per frame (J).
    pub e_b: Vec<f64>,
    pub rates: Vec<f64>,
    pub rate_avg: f64,
    /// Battery energy at the end of each frame (J).
    pub residuals: Vec<f64>,
    pub ledgers: Vec<EnergyLedger>,
    pub pattern: PhasePattern,
    pub stats: SolverStats,
}

/// Result of replaying decisions through the energy ledger.
#[derive(Debug, Clone)]
pub struct Replay {
    pub decisions: Vec<FrameDecision>,
    pub rates: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ledgers: Vec<EnergyLedger>,
}

impl Replay {
    pub fn rate_avg(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len().max(1) as f64
    }
}

/// Makes `d` feasible for a frame starting with `b` joules: clips ratios to
/// their boxes, reduces charging that would overflow the battery, and scales
/// the discharge down until energy causality holds.
pub fn repair_decision(d: &FrameDecision, f: &FrameSpec, m: &BatteryModel, b: f64, rho_cap: f64) -> FrameDecision {
    let c = f.harvested_power;
    let tau = f.duration;
    let alpha_c = m.alpha_c(c);
    let mut r = *d;
    r.gamma = r.gamma.clamp(0.0, 1.0 - 1e-12);
    r.rho = r.rho.clamp(0.0, rho_cap);
    r.alpha_a = r.alpha_a.clamp(alpha_c, 1.0);
    r.alpha_b = r.alpha_b.clamp(alpha_c, 1.0);
    r.d_b = r.d_b.clamp(0.0, m.max_discharge_power());
    if r.rho > 0.0 && r.alpha_a >= 1.0 {
        r.rho = 0.0;
    }
    if r.rho == 0.0 {
        r.alpha_a = 1.0;
    }
    if r.alpha_b < 1.0 && r.d_b > 0.0 {
        r.d_b = 0.0;
    }
    let room = |level: f64| (m.capacity - level).max(0.0);
    let mut stored1 = 0.0;
    if r.rho > 0.0 {
        let t1 = r.rho * tau;
        let cp = (1.0 - r.alpha_a) * c;
        stored1 = m.charge_curve(cp).0 * t1;
        if b + stored1 > m.capacity {
            let cp = m.charge_for_internal(room(b) / t1, cp);
            r.alpha_a = (1.0 - cp / c).clamp(alpha_c, 1.0);
            stored1 = m.charge_curve((1.0 - r.alpha_a) * c).0 * t1;
            if b + stored1 > m.capacity {
                r.alpha_a = (r.alpha_a + 1e-12).min(1.0);
                stored1 = m.charge_curve((1.0 - r.alpha_a) * c).0 * t1;
            }
        }
    }
    let b1 = b + stored1;
    let t2 = (1.0 - r.rho) * tau;
    if r.alpha_b < 1.0 && t2 > 0.0 {
        let cp = (1.0 - r.alpha_b) * c;
        if b1 + m.charge_curve(cp).0 * t2 > m.capacity {
            let cp = m.charge_for_internal(room(b1) / t2, cp);
            r.alpha_b = (1.0 - cp / c).clamp(alpha_c, 1.0);
            if b1 + m.charge_curve((1.0 - r.alpha_b) * c).0 * t2 > m.capacity {
                r.alpha_b = (r.alpha_b + 1e-12).min(1.0);
            }
        }
    }
    if r.d_b > 0.0 && t2 > 0.0 {
        let drain = m.internal_discharge_power(r.d_b).unwrap_or(f64::INFINITY) * t2;
        if drain > b1 {
            r.d_b = m.invert_internal_discharge(b1 / t2).unwrap_or(0.0).min(r.d_b);
            while r.d_b > 0.0 && m.internal_discharge_power(r.d_b).unwrap_or(f64::INFINITY) * t2 > b1 {
                r.d_b = (r.d_b * (1.0 - 1e-12) - 1e-18).max(0.0);
            }
        }
    }
    r
}

/// Replays decisions frame by frame from `b0`, repairing each against the
/// realized battery level.
pub fn replay(frames: &[FrameSpec], decisions: &[FrameDecision], m: &BatteryModel, b0: f64, enforce_bw: bool) -> Result<Replay> {
    let mut level = b0;
    let mut out = Replay { decisions: Vec::new(), rates: Vec::new(), residuals: Vec::new(), ledgers: Vec::new() };
    for (f, d) in frames.iter().zip(decisions) {
        let cap = if enforce_bw { f.rho_bandwidth_limit() } else { 1.0 };
        let r = repair_decision(d, f, m, level, cap);
        let l = energy_ledger(&r, f, m)?;
        let end = level + l.net_change();
        if end < -ENERGY_TOL || end > m.capacity + ENERGY_TOL {
            return Err(Error::Solver(format!("replay left the battery at {end:.3e} J")));
        }
        level = end.clamp(0.0, m.capacity);
        out.rates.push(decision_rate(&r, f));
        out.decisions.push(r);
        out.residuals.push(level);
        out.ledgers.push(l);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DischargeMode {
    Step,
    True,
}

struct PatternSolve {
    sol: ConvexSolution,
    frames: Vec<ConvexFrame>,
    silent: Vec<bool>,
    solves: usize,
}

fn build_frames(
    prob: &OfflineProblem,
    pattern: &PhasePattern,
    alpha_a: &[f64],
    silent: &[bool],
    mode: DischargeMode,
) -> Vec<ConvexFrame> {
    let m = &prob.battery;
    let step = m.step_surrogate();
    let fixed = matches!(m.variant, EfficiencyModel::FixedEfficiency { .. });
    prob.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let c = f.harvested_power;
            let tau = f.duration;
            let base = (c - f.circuit_power) * tau;
            let linear = DischargeCurve::Linear {
                eta: step.zero_rate_discharge_efficiency(),
                cap: step.max_discharge_power() * tau / step.zero_rate_discharge_efficiency(),
            };
            let split_discharge = if mode == DischargeMode::True && !fixed && m.variant != EfficiencyModel::StepDischarge {
                DischargeCurve::Battery { model: *m, cap: m.max_internal_discharge_power() * tau }
            } else {
                linear
            };
            let rate = if silent[i] { None } else { Some(f.rate_fn()) };
            if pattern.0[i] == Phase::ChargePhase && !silent[i] {
                let cp = (1.0 - alpha_a[i]) * c;
                let store = m.charge_curve(cp).0 * tau;
                ConvexFrame { kind: FrameKind::Charge { store }, rate, base, tau, x_hi: prob.rho_cap(f), discharge: linear }
            } else {
                let c_upper = m.optimal_charge_power(c);
                let curve = if fixed {
                    ChargeCurve::Linear { eta: m.charge_curve(1.0).0 }
                } else {
                    ChargeCurve::Battery { model: *m, c_upper }
                };
                let x_hi = m.charge_curve(c_upper).0 * tau;
                ConvexFrame { kind: FrameKind::Split { curve }, rate, base, tau, x_hi, discharge: split_discharge }
            }
        })
        .collect()
}

/// Solves a fixed pattern, silencing frames that cannot usefully transmit
/// until the silent set is stable.
fn solve_pattern(prob: &OfflineProblem, pattern: &PhasePattern, alpha_a: &[f64], mode: DischargeMode) -> Result<PatternSolve> {
    let n = prob.frames.len();
    let mut silent = vec![false; n];
    let mut solves = 0;
    loop {
        let frames = build_frames(prob, pattern, alpha_a, &silent, mode);
        let cp = ConvexProblem { frames: frames.clone(), b0: prob.b0, capacity: prob.battery.capacity };
        let sol = convex::solve(&cp)?;
        solves += 1;
        // Silence one frame per solve: dropping a frame's circuit cost can
        // lift the others above zero. Ties go to the earliest frame, since
        // stored energy only flows forward.
        let worst = (0..n).filter(|&i| !silent[i] && sol.e[i] <= SILENT_ENERGY).fold(None, |best: Option<usize>, i| match best {
            Some(j) if sol.e[j] <= sol.e[i] + SILENT_ENERGY => Some(j),
            _ => Some(i),
        });
        match worst {
            Some(i) => silent[i] = true,
            None => return Ok(PatternSolve { sol, frames, silent, solves }),
        }
    }
}

/// Turns convex-program variables into frame decisions for the evaluation
/// battery `m`. Discharge powers are recovered from internal drain with the
/// exact curve, capped at `D_p`.
fn recover(prob: &OfflineProblem, ps: &PatternSolve, alpha_a: &[f64], m: &BatteryModel) -> Vec<FrameDecision> {
    prob.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let c = f.harvested_power;
            let tau = f.duration;
            let (x, w) = (ps.sol.x[i], ps.sol.w[i]);
            let drain_to_power = |w: f64, t2: f64| -> f64 {
                if w <= 0.0 || t2 <= 0.0 {
                    0.0
                } else {
                    m.invert_internal_discharge(w / t2).unwrap_or(0.0).min(m.max_discharge_power())
                }
            };
            match ps.frames[i].kind {
                FrameKind::Charge { .. } => {
                    let rho = if x > 1e-12 { x } else { 0.0 };
                    let alpha = if rho > 0.0 { alpha_a[i] } else { 1.0 };
                    let d_b = drain_to_power(w, (1.0 - rho) * tau);
                    FrameDecision { rho, alpha_a: alpha, alpha_b: 1.0, gamma: 0.0, d_b }
                }
                FrameKind::Split { .. } => {
                    // Storing and draining in one frame never beats netting them.
                    let (u, w) = if ps.silent[i] { (x, 0.0) } else if x >= w { (x - w, 0.0) } else { (0.0, w - x) };
                    let cp = prob.battery.charge_for_internal(u / tau, prob.battery.optimal_charge_power(c));
                    let alpha_b = if c > 0.0 { (1.0 - cp / c).clamp(m.alpha_c(c), 1.0) } else { 1.0 };
                    let d_b = if alpha_b < 1.0 { 0.0 } else { drain_to_power(w, tau) };
                    FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b, gamma: 0.0, d_b }
                }
            }
        })
        .collect()
}

fn finish(prob: &OfflineProblem, decisions: &[FrameDecision], pattern: PhasePattern, stats: SolverStats) -> Result<OfflineSolution> {
    let r = replay(&prob.frames, decisions, &prob.battery, prob.b0, prob.enforce_bw)?;
    let e_b = r.decisions.iter().zip(&prob.frames).map(|(d, f)| d.e_b(f)).collect();
    let rate_avg = r.rate_avg();
    Ok(OfflineSolution {
        decisions: r.decisions,
        e_b,
        rates: r.rates,
        rate_avg,
        residuals: r.residuals,
        ledgers: r.ledgers,
        pattern,
        stats,
    })
}

fn realized_pattern(ps: &PatternSolve) -> PhasePattern {
    PhasePattern(
        ps.frames
            .iter()
            .map(|f| match f.kind {
                FrameKind::Charge { .. } => Phase::ChargePhase,
                FrameKind::Split { .. } => Phase::SplitPower,
            })
            .collect(),
    )
}

fn stats_of(ps: &PatternSolve, global: bool) -> SolverStats {
    SolverStats {
        newton_steps: ps.sol.newton_steps,
        gap: ps.sol.gap,
        global,
        convex_solves: ps.solves,
        planned_rate_sum: ps.sol.objective,
        refinement_rejected: false,
    }
}

/// Optimal charging-phase split ratios, one per frame.
pub fn alpha_a_star(prob: &OfflineProblem) -> Vec<f64> {
    prob.frames.iter().map(|f| ChargePlan::new(f, &prob.battery).alpha_a).collect()
}

/// Zero-circuit-power problem with power splitting only and the exact
/// discharge curve. The program is convex in the stored-energy variables,
/// so the optimum is global even with finite capacity.
pub fn solve_p2(prob: &OfflineProblem) -> Result<OfflineSolution> {
    prob.validate()?;
    if !prob.circuit_zero {
        return Err(Error::validation("frame.circuit_power_w", "the zero-circuit-power problem needs p = 0 in every frame"));
    }
    let n = prob.frames.len();
    let pattern = PhasePattern::uniform(n, Phase::SplitPower);
    let alpha = vec![1.0; n];
    let ps = solve_pattern(prob, &pattern, &alpha, DischargeMode::True)?;
    let decisions = recover(prob, &ps, &alpha, &prob.battery);
    finish(prob, &decisions, pattern, stats_of(&ps, true))
}

/// Convex program for a fixed phase pattern under the step discharge
/// surrogate. Decisions are recovered for `prob.battery`.
pub fn solve_p3_fixed_pattern(prob: &OfflineProblem, pattern: &PhasePattern, alpha_a_star: &[f64]) -> Result<OfflineSolution> {
    prob.validate()?;
    if pattern.0.len() != prob.frames.len() || alpha_a_star.len() != prob.frames.len() {
        return Err(Error::validation("pattern", "length must equal the number of frames"));
    }
    let ps = solve_pattern(prob, pattern, alpha_a_star, DischargeMode::Step)?;
    let decisions = recover(prob, &ps, alpha_a_star, &prob.battery);
    finish(prob, &decisions, realized_pattern(&ps), stats_of(&ps, true))
}

/// True iff frame `i` draws more from the battery than it stores.
pub fn frame_receives_energy(sol: &OfflineSolution, i: usize) -> bool {
    let l = &sol.ledgers[i];
    l.internal_drain - l.stored_in_phase1 - l.internal_store_phase2 > 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// The frame's decision as solved.
    AllCharge,
    /// Same transmit energy with no charging phase.
    ZeroRho,
}

/// Decision with `rho = 0` transmitting `energy` joules, storing the rest of
/// the harvest. `None` when the harvest cannot fund that energy.
fn zero_rho_candidate(f: &FrameSpec, m: &BatteryModel, energy: f64) -> Option<FrameDecision> {
    let c = f.harvested_power;
    if c <= 0.0 {
        return None;
    }
    let alpha = (energy + f.circuit_power * f.duration) / (c * f.duration);
    if alpha > 1.0 + 1e-12 {
        return None;
    }
    Some(FrameDecision { rho: 0.0, alpha_a: 1.0, alpha_b: alpha.clamp(m.alpha_c(c), 1.0), gamma: 0.0, d_b: 0.0 })
}

/// Energy lost in frame `i` (conversion losses plus circuit energy) under the
/// solved decision or its zero-`rho` counterpart. `None` if the counterpart
/// is infeasible.
pub fn loss_of_frame(prob: &OfflineProblem, sol: &OfflineSolution, i: usize, mode: LossMode) -> Option<f64> {
    let f = &prob.frames[i];
    let m = &prob.battery;
    match mode {
        LossMode::AllCharge => Some(sol.ledgers[i].loss_total),
        LossMode::ZeroRho => {
            let cand = zero_rho_candidate(f, m, sol.ledgers[i].transmit_energy)?;
            energy_ledger(&cand, f, m).ok().map(|l| l.loss_total)
        }
    }
}

/// Approximate solver for the full problem: solve with every frame in the
/// charge phase, move energy-donating frames whose matched zero-`rho`
/// decision loses less energy to power splitting, and re-solve.
pub fn algorithm1(prob: &OfflineProblem) -> Result<OfflineSolution> {
    prob.validate()?;
    let n = prob.frames.len();
    let m = &prob.battery;
    let step = m.step_surrogate();
    let alpha = alpha_a_star(prob);

    let all_charge = PhasePattern::uniform(n, Phase::ChargePhase);
    let ps3 = solve_pattern(prob, &all_charge, &alpha, DischargeMode::Step)?;
    let dec3 = recover(prob, &ps3, &alpha, m);
    let mut stats3 = stats_of(&ps3, true);
    stats3.global = false;
    let sol3 = finish(prob, &dec3, realized_pattern(&ps3), stats3.clone())?;

    let mut pattern = realized_pattern(&ps3);
    for i in 0..n {
        if ps3.silent[i] {
            continue;
        }
        let FrameKind::Charge { store } = ps3.frames[i].kind else { continue };
        let (x, w) = (ps3.sol.x[i], ps3.sol.w[i]);
        if w - x * store > 1e-12 {
            continue; // receives energy: stays in the charge phase
        }
        let f = &prob.frames[i];
        let tau = f.duration;
        let Some(zero) = zero_rho_candidate(f, &step, ps3.sol.e[i]) else { continue };
        let rho = if x > 1e-12 { x } else { 0.0 };
        let t2 = (1.0 - rho) * tau;
        let d_b = if t2 > 0.0 { (step.zero_rate_discharge_efficiency() * w / t2).min(step.max_discharge_power()) } else { 0.0 };
        let charge = FrameDecision { rho, alpha_a: if rho > 0.0 { alpha[i] } else { 1.0 }, alpha_b: 1.0, gamma: 0.0, d_b };
        let (Ok(lc), Ok(lz)) = (energy_ledger(&charge, f, &step), energy_ledger(&zero, f, &step)) else { continue };
        if lz.loss_total < lc.loss_total {
            pattern.0[i] = Phase::SplitPower;
        }
    }

    if pattern == all_charge || pattern == realized_pattern(&ps3) {
        return Ok(sol3);
    }
    let ps = solve_pattern(prob, &pattern, &alpha, DischargeMode::Step)?;
    let decisions = recover(prob, &ps, &alpha, m);
    let mut stats = stats_of(&ps, false);
    stats.newton_steps += stats3.newton_steps;
    stats.convex_solves += stats3.convex_solves;
    let sol = finish(prob, &decisions, realized_pattern(&ps), stats)?;
    if sol.rate_avg < sol3.rate_avg {
        let mut out = sol3;
        out.stats.refinement_rejected = true;
        return Ok(out);
    }
    Ok(sol)
}

/// Every frame transmits its own harvest directly.
pub fn no_battery_baseline(prob: &OfflineProblem) -> Result<OfflineSolution> {
    prob.validate()?;
    let n = prob.frames.len();
    let decisions = vec![FrameDecision::direct(); n];
    finish(prob, &decisions, PhasePattern::uniform(n, Phase::ChargePhase), SolverStats { global: true, ..Default::default() })
}

/// Plans as if the battery were lossless with unlimited rates, then replays
/// the plan on the real battery with feasibility repair.
pub fn ideal_battery_baseline(prob: &OfflineProblem) -> Result<OfflineSolution> {
    prob.validate()?;
    let ideal = BatteryModel::new(prob.battery.capacity, 0.0, prob.battery.voltage, EfficiencyModel::FixedEfficiency { eta_c: 1.0, eta_d: 1.0 })?;
    let planned = algorithm1(&OfflineProblem { battery: ideal, ..prob.clone() })?;
    finish(prob, &planned.decisions, planned.pattern, planned.stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{check_feasible, NoiseModel};
    use crate::single_frame::solve_single_frame;

    fn frame(c: f64, p: f64, h: f64) -> FrameSpec {
        FrameSpec {
            harvested_power: c,
            channel_gain: h,
            duration: 1.0,
            symbols: 1e6,
            circuit_power: p,
            bandwidth: 1e7,
            noise: NoiseModel::default_spectral(),
        }
    }

    fn ir(b: f64, r: f64) -> BatteryModel {
        BatteryModel::internal_resistance(b, r, 1.5).unwrap()
    }

    fn assert_feasible(prob: &OfflineProblem, sol: &OfflineSolution) {
        let mut level = prob.b0;
        for (i, f) in prob.frames.iter().enumerate() {
            let v = check_feasible(&sol.decisions[i], f, &prob.battery, level, prob.enforce_bw);
            assert!(v.is_empty(), "frame {i}: {v:?}");
            level = sol.residuals[i];
        }
    }

    #[test]
    fn p2_single_frame_without_energy_transmits_directly() {
        let prob = OfflineProblem::new(vec![frame(0.1, 0.0, 1.0)], ir(0.1, 5.0), 0.0);
        let s = solve_p2(&prob).unwrap();
        assert!((s.decisions[0].alpha_b - 1.0).abs() < 1e-9);
        assert!(s.decisions[0].d_b < 1e-9);
    }

    #[test]
    fn p2_two_charging_frames_keep_power_order() {
        // Four frames so that the first two both store for the last two.
        let fr = vec![frame(0.15, 0.0, 1.0), frame(0.2, 0.0, 1.0), frame(0.0, 0.0, 1.0), frame(0.0, 0.0, 1.0)];
        let prob = OfflineProblem::new(fr, ir(1e6, 5.0), 0.0);
        let s = solve_p2(&prob).unwrap();
        assert_feasible(&prob, &s);
        let p: Vec<f64> = s.decisions.iter().zip(&prob.frames).map(|(d, f)| d.alpha_b * f.harvested_power + d.d_b).collect();
        assert!(s.decisions[0].alpha_b < 1.0 && s.decisions[1].alpha_b < 1.0, "{:?}", s.decisions);
        assert!(p[0] < p[1], "{p:?}");
    }

    #[test]
    fn algorithm1_single_frame_agrees_with_closed_form() {
        for &(c, p, b0) in &[(0.1, 0.05, 0.0), (0.2, 0.05, 0.01), (0.06, 0.05, 0.0), (0.1, 0.0, 0.005)] {
            let m = ir(0.02, 5.0).step_surrogate();
            let f = frame(c, p, 1.0);
            let prob = OfflineProblem::new(vec![f], m, b0);
            let s = algorithm1(&prob).unwrap();
            let sf = solve_single_frame(&f, &m, b0, true).unwrap();
            assert!((s.rate_avg - sf.rate).abs() < 1e-6, "c={c}: {} vs {}", s.rate_avg, sf.rate);
            assert_feasible(&prob, &s);
        }
    }

    #[test]
    fn algorithm1_is_feasible_on_mixed_instance() {
        let fr = vec![frame(0.2, 0.05, 0.5), frame(0.03, 0.05, 2.0), frame(0.12, 0.05, 1.0), frame(0.0, 0.05, 1.0)];
        let prob = OfflineProblem::new(fr, ir(0.05, 5.0), 0.0);
        let s = algorithm1(&prob).unwrap();
        assert_feasible(&prob, &s);
        let nb = no_battery_baseline(&prob).unwrap();
        assert!(s.rate_avg >= nb.rate_avg);
        let ideal = ideal_battery_baseline(&prob).unwrap();
        assert_feasible(&prob, &ideal);
    }

    #[test]
    fn no_battery_below_circuit_power_is_silent() {
        let prob = OfflineProblem::new(vec![frame(0.01, 0.05, 1.0); 3], ir(0.1, 5.0), 0.0);
        assert_eq!(no_battery_baseline(&prob).unwrap().rate_avg, 0.0);
    }

    #[test]
    fn lossless_ideal_baseline_matches_algorithm1() {
        let m = BatteryModel::new(0.1, 0.0, 1.5, EfficiencyModel::FixedEfficiency { eta_c: 1.0, eta_d: 1.0 }).unwrap();
        let fr = vec![frame(0.2, 0.05, 1.0), frame(0.05, 0.05, 1.0), frame(0.1, 0.05, 1.0)];
        let prob = OfflineProblem::new(fr, m, 0.0);
        let a = algorithm1(&prob).unwrap();
        let b = ideal_battery_baseline(&prob).unwrap();
        assert!((a.rate_avg - b.rate_avg).abs() < 1e-9);
    }

    #[test]
    fn receiving_frame_is_detected() {
        let prob = OfflineProblem::new(vec![frame(0.0, 0.0, 1.0), frame(0.1, 0.0, 1.0)], ir(0.05, 5.0), 0.02);
        let s = algorithm1(&prob).unwrap();
        assert!(frame_receives_energy(&s, 0));
        assert!(!frame_receives_energy(&s, 1) || s.e_b[1] > 0.0);
    }
}
