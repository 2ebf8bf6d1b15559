//! Monte Carlo experiments with common random numbers across policies.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frame::{FrameDecision, FrameSpec};
use crate::offline::{algorithm1, ideal_battery_baseline, no_battery_baseline, OfflineProblem};
use crate::online::{dp_build_with, fit_cpsr, fit_ctsr, simulate_policy, ConstantRatioPolicy, FitSetup, Policy};
use crate::random::{realize, Realization, STREAM_GAIN, STREAM_HARVEST};

use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Algorithm 1 with full knowledge of the realization.
    Offline,
    Dp,
    Statistical,
    Greedy,
    Ctsr,
    Cpsr,
    NoBattery,
    IdealBattery,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::Offline,
        PolicyKind::Dp,
        PolicyKind::Statistical,
        PolicyKind::Greedy,
        PolicyKind::Ctsr,
        PolicyKind::Cpsr,
        PolicyKind::NoBattery,
        PolicyKind::IdealBattery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Offline => "offline",
            PolicyKind::Dp => "dp",
            PolicyKind::Statistical => "statistical",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Ctsr => "ctsr",
            PolicyKind::Cpsr => "cpsr",
            PolicyKind::NoBattery => "no_battery",
            PolicyKind::IdealBattery => "ideal_battery",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::validation("policy", format!("unknown policy `{s}`")))
    }
}

/// One row of the optional per-frame table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub trial: usize,
    pub frame: usize,
    pub decision: FrameDecision,
    pub e_b: f64,
    pub residual: f64,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub policy: PolicyKind,
    pub mean_rate_bps: f64,
    /// Sample standard deviation of the per-trial average rates.
    pub std_rate_bps: f64,
    /// Wall time divided by `trials * frames`, including policy setup.
    pub runtime_norm_s: f64,
    pub trial_rates: Vec<f64>,
    pub fitted: Option<ConstantRatioPolicy>,
    pub frames: Vec<FrameRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub policies: Vec<PolicyResult>,
}

impl ExperimentResult {
    pub fn get(&self, p: PolicyKind) -> Option<&PolicyResult> {
        self.policies.iter().find(|r| r.policy == p)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Execution,
    pub keep_frames: bool,
}

pub fn generate_realizations(s: &Scenario) -> Vec<Realization> {
    generate_realizations_with(s, Execution::default())
}

pub fn generate_realizations_with(s: &Scenario, exec: Execution) -> Vec<Realization> {
    exec.map(s.trials, |t| realize(&s.harvest, &s.gain, s.frames, s.seed, t as u64, (STREAM_HARVEST, STREAM_GAIN)))
}

struct TrialOutcome {
    rate_avg: f64,
    rows: Vec<FrameRow>,
}

fn rows_from(trial: usize, frames: &[FrameSpec], decisions: &[FrameDecision], residuals: &[f64], rates: &[f64]) -> Vec<FrameRow> {
    (0..frames.len())
        .map(|n| FrameRow {
            trial,
            frame: n,
            decision: decisions[n],
            e_b: decisions[n].e_b(&frames[n]),
            residual: residuals[n],
            rate_bps: rates[n] * frames[n].symbols / frames[n].duration,
        })
        .collect()
}

fn frames_of(s: &Scenario, r: &Realization) -> Vec<FrameSpec> {
    r.harvest.iter().zip(&r.gain).map(|(&c, &h)| s.template.with_harvest_and_gain(c, h)).collect()
}

fn annotate(e: Error, trial: usize) -> Error {
    match e {
        Error::Validation { key, reason } => Error::Validation { key, reason: format!("trial {trial}: {reason}") },
        e => Error::Solver(format!("trial {trial}: {e}")),
    }
}

pub fn run_experiment(s: &Scenario, policies: &[PolicyKind]) -> Result<ExperimentResult> {
    run_experiment_with(s, policies, RunOptions::default())
}

pub fn run_experiment_with(s: &Scenario, policies: &[PolicyKind], opts: RunOptions) -> Result<ExperimentResult> {
    s.validate()?;
    if policies.is_empty() {
        return Err(Error::validation("policies", "select at least one policy"));
    }
    let m = s.effective_battery();
    let reals = generate_realizations_with(s, opts.exec);
    let bps = s.template.symbols / s.template.duration;
    let mut out = ExperimentResult::default();
    for &kind in policies {
        let start = Instant::now();
        let mut fitted = None;
        let online = match kind {
            PolicyKind::Dp => {
                let c = s.harvest.to_discrete(s.online.gain_bins)?;
                let h = s.gain.to_discrete(s.online.gain_bins)?;
                Some(Policy::Dp(Arc::new(dp_build_with(&c, &h, &s.template, &m, s.online.grid_step_j, s.frames, opts.exec)?)))
            }
            PolicyKind::Greedy => Some(Policy::Greedy),
            PolicyKind::Statistical => Some(Policy::Statistical { mean_harvest: s.harvest.mean(), mean_gain: s.gain.mean() }),
            PolicyKind::Ctsr | PolicyKind::Cpsr => {
                let setup = FitSetup {
                    harvest: &s.harvest,
                    gain: &s.gain,
                    template: &s.template,
                    battery: &m,
                    b0: s.b0,
                    horizon: s.frames,
                    trials: s.online.fit_trials,
                    seed: s.seed,
                    exec: opts.exec,
                };
                let p = if kind == PolicyKind::Ctsr { fit_ctsr(&setup)? } else { fit_cpsr(&setup)? };
                fitted = Some(p);
                Some(Policy::Constant(p))
            }
            PolicyKind::Offline | PolicyKind::NoBattery | PolicyKind::IdealBattery => None,
        };
        let outcomes: Vec<Result<TrialOutcome>> = opts.exec.map(reals.len(), |t| {
            let r = &reals[t];
            let frames = frames_of(s, r);
            let (rate_avg, rows) = match &online {
                Some(p) => {
                    let tr = simulate_policy(p, r, &s.template, &m, s.b0)?;
                    let rows = if opts.keep_frames { rows_from(t, &frames, &tr.decisions, &tr.residuals, &tr.rates) } else { Vec::new() };
                    (tr.rate_avg, rows)
                }
                None => {
                    let prob = OfflineProblem::new(frames.clone(), m, s.b0);
                    let sol = match kind {
                        PolicyKind::Offline => algorithm1(&prob)?,
                        PolicyKind::NoBattery => no_battery_baseline(&prob)?,
                        _ => ideal_battery_baseline(&prob)?,
                    };
                    let rows = if opts.keep_frames { rows_from(t, &frames, &sol.decisions, &sol.residuals, &sol.rates) } else { Vec::new() };
                    (sol.rate_avg, rows)
                }
            };
            Ok(TrialOutcome { rate_avg: rate_avg * bps, rows })
        });
        let mut trial_rates = Vec::with_capacity(outcomes.len());
        let mut frames = Vec::new();
        for (t, o) in outcomes.into_iter().enumerate() {
            let o = o.map_err(|e| annotate(e, t))?;
            trial_rates.push(o.rate_avg);
            frames.extend(o.rows);
        }
        let elapsed = start.elapsed().as_secs_f64();
        let (mean, std) = mean_std(&trial_rates);
        out.policies.push(PolicyResult {
            policy: kind,
            mean_rate_bps: mean,
            std_rate_bps: std,
            runtime_norm_s: elapsed / (s.trials * s.frames) as f64,
            trial_rates,
            fitted,
            frames,
        });
    }
    Ok(out)
}

/// Mean and sample standard deviation, accumulated in index order.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
