//! Figure and table reproduction recipes. Each returns one CSV document.

use std::fmt::Write as _;

use crate::battery::{BatteryModel, EfficiencyModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frame::{FrameSpec, NoiseModel};
use crate::offline::{solve_p2, OfflineProblem};
use crate::random::Law;
use crate::single_frame::solve_single_frame;

use super::csv::{fmt_float, sweep_csv, Timing};
use super::experiment::{run_experiment_with, ExperimentResult, PolicyKind, RunOptions};
use super::scenario::{DischargeModel, Scenario};

pub const FIG6_SCENARIO: &str = include_str!("../../scenarios/fig6.toml");
pub const FIG7_SCENARIO: &str = include_str!("../../scenarios/fig7.toml");
pub const TABLE2_SCENARIO: &str = include_str!("../../scenarios/table2.toml");

pub const FIG7_RESISTANCES: [f64; 3] = [1.0, 5.0, 20.0];
pub const FIG7_POLICIES: [PolicyKind; 6] =
    [PolicyKind::Offline, PolicyKind::Dp, PolicyKind::Statistical, PolicyKind::Greedy, PolicyKind::Ctsr, PolicyKind::Cpsr];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Table2,
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig3a" => Figure::Fig3a,
            "fig3b" => Figure::Fig3b,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            "fig6" => Figure::Fig6,
            "fig7" => Figure::Fig7,
            "table2" => Figure::Table2,
            other => return Err(Error::validation("figure", format!("unknown figure `{other}`"))),
        })
    }
}

/// Overrides applied on top of a recipe's built-in scenario.
#[derive(Debug, Clone, Default)]
pub struct RecipeOptions {
    /// Replaces the built-in scenario of Monte Carlo recipes.
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub discharge: Option<DischargeModel>,
    pub exec: Execution,
}

impl RecipeOptions {
    fn scenario(&self, builtin: &str) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(s) => s.clone(),
            None => Scenario::from_toml_str(builtin)?,
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(t) = self.trials {
            s.trials = t;
            s.online.fit_trials = s.online.fit_trials.min(t);
        }
        if let Some(d) = self.discharge {
            s.discharge = d;
        }
        s.validate()?;
        Ok(s)
    }

    fn run(&self) -> RunOptions {
        RunOptions { exec: self.exec, keep_frames: false }
    }
}

pub fn reproduce(fig: Figure, opts: &RecipeOptions) -> Result<String> {
    match fig {
        Figure::Fig3a => fig3a(),
        Figure::Fig3b => fig3b(),
        Figure::Fig4 => fig4(),
        Figure::Fig5 => fig5(),
        Figure::Fig6 => fig6(opts),
        Figure::Fig7 => fig7(opts).map(|runs| sweep_csv(&["resistance_ohm"], &runs, Timing::Omit)),
        Figure::Table2 => table2(opts),
    }
}

fn charge_rates(r: f64, v: f64, c: f64) -> Result<(f64, f64)> {
    let m = BatteryModel::internal_resistance(1.0, r, v)?;
    let cp = m.optimal_charge_power(c);
    Ok((cp, m.internal_charge_power(cp)?))
}

/// Optimal external and internal charging rates versus harvested power.
pub fn fig3a() -> Result<String> {
    let mut s = String::from("resistance_ohm,harvest_w,external_charge_w,internal_charge_w\n");
    for r in [0.1, 5.0, 50.0] {
        for i in 0..=40 {
            let c = 0.005 * i as f64;
            let (e, q) = charge_rates(r, 1.5, c)?;
            let _ = writeln!(s, "{},{},{},{}", fmt_float(r), fmt_float(c), fmt_float(e), fmt_float(q));
        }
    }
    Ok(s)
}

/// Optimal charging rates versus battery voltage at 100 mW harvest.
pub fn fig3b() -> Result<String> {
    let mut s = String::from("resistance_ohm,voltage_v,external_charge_w,internal_charge_w\n");
    for r in [0.1, 5.0, 50.0] {
        for i in 0..=25 {
            let v = 0.5 + 0.1 * i as f64;
            let (e, q) = charge_rates(r, v, 0.1)?;
            let _ = writeln!(s, "{},{},{},{}", fmt_float(r), fmt_float(v), fmt_float(e), fmt_float(q));
        }
    }
    Ok(s)
}

fn recipe_frame(c: f64, p: f64) -> FrameSpec {
    FrameSpec {
        harvested_power: c,
        channel_gain: 1.0,
        duration: 1.0,
        symbols: 1e6,
        circuit_power: p,
        bandwidth: 1e7,
        noise: NoiseModel::default_spectral(),
    }
}

/// Single-frame optimal rate and time split versus internal resistance.
pub fn fig4() -> Result<String> {
    let mut s = String::from("circuit_power_w,harvest_w,resistance_ohm,rate_bps,rho\n");
    for p in [0.01, 0.05] {
        for c in [0.06, 0.1] {
            for i in 0..=50 {
                let r = 10f64.powf(-2.0 + 0.1 * i as f64);
                let m = BatteryModel::internal_resistance(0.02, r, 1.5)?;
                let f = recipe_frame(c, p);
                let sol = solve_single_frame(&f, &m, 0.0, true)?;
                let bps = sol.rate * f.symbols / f.duration;
                let _ = writeln!(s, "{},{},{},{},{}", fmt_float(p), fmt_float(c), fmt_float(r), fmt_float(bps), fmt_float(sol.decision.rho));
            }
        }
    }
    Ok(s)
}

/// Harvested powers of the transmit-power comparison: strong frames first.
pub fn fig5_harvest() -> Vec<f64> {
    (0..20).map(|i| 0.2 - 0.01 * i as f64).collect()
}

/// Optimal transmit power per frame, resistive versus fixed efficiency.
pub fn fig5() -> Result<String> {
    let mut s = String::from("model,frame,harvest_w,transmit_power_w\n");
    let harvest = fig5_harvest();
    let frames: Vec<FrameSpec> = harvest.iter().map(|&c| recipe_frame(c, 0.0)).collect();
    let eta = 0.75f64.sqrt();
    let models = [
        ("internal_resistance", BatteryModel::internal_resistance(1e6, 5.0, 1.5)?),
        ("fixed_efficiency", BatteryModel::new(1e6, 5.0, 1.5, EfficiencyModel::FixedEfficiency { eta_c: eta, eta_d: eta })?),
    ];
    for (name, m) in models {
        let sol = solve_p2(&OfflineProblem::new(frames.clone(), m, 0.0))?;
        for (i, (d, f)) in sol.decisions.iter().zip(&frames).enumerate() {
            let power = d.alpha_b * f.harvested_power + d.d_b;
            let _ = writeln!(s, "{name},{i},{},{}", fmt_float(f.harvested_power), fmt_float(power));
        }
    }
    Ok(s)
}

pub const FIG6_RESISTANCES: [f64; 2] = [1.0, 10.0];
pub const FIG6_MEANS: [f64; 10] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1];

/// Rescales a harvest law so that its mean is `mean`.
pub fn with_mean_harvest(s: &Scenario, mean: f64) -> Result<Scenario> {
    let cur = s.harvest.mean();
    if cur <= 0.0 {
        return Err(Error::validation("harvest", "cannot rescale a zero-mean law"));
    }
    let k = mean / cur;
    let mut out = s.clone();
    out.harvest = match &s.harvest {
        Law::Deterministic(v) => Law::Deterministic(v.iter().map(|x| x * k).collect()),
        Law::Discrete(d) => {
            let mut d = d.clone();
            d.support.iter_mut().for_each(|x| *x *= k);
            Law::Discrete(d)
        }
        Law::Exponential { .. } => Law::Exponential { mean },
    };
    Ok(out)
}

pub fn with_resistance(s: &Scenario, r: f64) -> Result<Scenario> {
    let mut out = s.clone();
    out.battery = BatteryModel::new(s.battery.capacity, r, s.battery.voltage, s.battery.variant)?;
    Ok(out)
}

fn fig6(opts: &RecipeOptions) -> Result<String> {
    let base = opts.scenario(FIG6_SCENARIO)?;
    let policies = [PolicyKind::Offline, PolicyKind::NoBattery, PolicyKind::IdealBattery];
    let mut runs = Vec::new();
    for r in FIG6_RESISTANCES {
        for m in FIG6_MEANS {
            let s = with_mean_harvest(&with_resistance(&base, r)?, m)?;
            runs.push((vec![r, m], run_experiment_with(&s, &policies, opts.run())?));
        }
    }
    Ok(sweep_csv(&["resistance_ohm", "mean_harvest_w"], &runs, Timing::Omit))
}

/// Runs the online comparison at every resistance.
pub fn fig7(opts: &RecipeOptions) -> Result<Vec<(Vec<f64>, ExperimentResult)>> {
    let base = opts.scenario(FIG7_SCENARIO)?;
    FIG7_RESISTANCES
        .iter()
        .map(|&r| Ok((vec![r], run_experiment_with(&with_resistance(&base, r)?, &FIG7_POLICIES, opts.run())?)))
        .collect()
}

fn table2(opts: &RecipeOptions) -> Result<String> {
    let base = opts.scenario(TABLE2_SCENARIO)?;
    let policies = [PolicyKind::Offline, PolicyKind::Statistical, PolicyKind::Greedy, PolicyKind::Ctsr, PolicyKind::Cpsr];
    let mut runs = Vec::new();
    for n in [25usize, 50, 75, 100] {
        let mut s = base.clone();
        s.frames = n;
        runs.push((vec![n as f64], run_experiment_with(&s, &policies, opts.run())?));
    }
    Ok(sweep_csv(&["frames"], &runs, Timing::Record))
}
