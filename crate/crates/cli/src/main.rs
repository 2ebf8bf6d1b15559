use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ehtx::exec::Execution;
use ehtx::harness::{
    frames_csv, reproduce, run_experiment_with, summary_csv, sweep_csv, DischargeModel, Figure, PolicyKind, RecipeOptions, RunOptions,
    Scenario, Timing,
};
use ehtx::harness::recipes::{with_mean_harvest, with_resistance};
use ehtx::single_frame::solve_single_frame;
use ehtx::{BatteryModel, Error};

const SCHEMA_HELP: &str = "\
Scenario files are TOML with `schema = 1`. Top-level keys: frames, trials, seed,
initial_energy_j, discharge_model (\"true\"|\"step\"). Tables: [frame] duration_s,
symbols, bandwidth_hz, circuit_power_w; [noise] kind, n0_w_per_hz, bandwidth_hz,
half_factor, unit; [battery] model, capacity_j, resistance_ohm, voltage_v, eta_c,
eta_d; [harvest] law = deterministic|uniform|custom; [gain] law =
deterministic|exponential|custom; [online] grid_step_j, gain_bins, fit_trials.
See README.md for defaults.";

#[derive(Parser)]
#[command(name = "ehtx", version, about = "Energy-harvesting transmission policies with a resistive battery", after_help = SCHEMA_HELP)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    discharge_model: Option<DischargeArg>,
    /// Run trials on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Fill the runtime column with measured times.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DischargeArg {
    True,
    Step,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnlinePolicy {
    Dp,
    Greedy,
    Statistical,
    Ctsr,
    Cpsr,
}

#[derive(Clone, Copy, ValueEnum)]
enum OfflinePolicy {
    Offline,
    NoBattery,
    IdealBattery,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Resistance,
    MeanHarvest,
    CircuitPower,
    Capacity,
    Frames,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Table2,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one frame in closed form.
    SingleFrame {
        /// Harvested power (W).
        #[arg(long, default_value_t = 0.1)]
        harvest: f64,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        /// Circuit power (W); overrides the scenario.
        #[arg(long)]
        circuit_power: Option<f64>,
        /// Internal resistance (ohm); overrides the scenario.
        #[arg(long)]
        resistance: Option<f64>,
        /// Initial battery energy (J).
        #[arg(long, default_value_t = 0.0)]
        b0: f64,
        /// Cap the charging fraction at the bandwidth limit.
        #[arg(long)]
        enforce_bandwidth: bool,
    },
    /// Offline policies over the scenario's realizations.
    Offline {
        #[arg(long, value_enum, num_args = 1.., default_values_t = [OfflinePolicy::Offline, OfflinePolicy::NoBattery, OfflinePolicy::IdealBattery])]
        policy: Vec<OfflinePolicy>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write the per-frame table of the first policy here.
        #[arg(long)]
        frames_out: Option<PathBuf>,
    },
    /// Online policies over the scenario's realizations.
    Online {
        #[arg(long, value_enum, num_args = 1.., default_values_t = [OnlinePolicy::Dp, OnlinePolicy::Greedy, OnlinePolicy::Statistical, OnlinePolicy::Ctsr, OnlinePolicy::Cpsr])]
        policy: Vec<OnlinePolicy>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        frames_out: Option<PathBuf>,
    },
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Policy names: offline, dp, statistical, greedy, ctsr, cpsr, no_battery, ideal_battery.
        #[arg(long, value_delimiter = ',', default_value = "offline,greedy")]
        policy: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Regenerate the data behind a figure or table.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureArg,
        /// Override the recipe's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

impl Global {
    fn discharge(&self) -> Option<DischargeModel> {
        self.discharge_model.map(|d| match d {
            DischargeArg::True => DischargeModel::True,
            DischargeArg::Step => DischargeModel::Step,
        })
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn timing(&self) -> Timing {
        if self.timing {
            Timing::Record
        } else {
            Timing::Omit
        }
    }

    fn load(&self) -> ehtx::Result<Option<Scenario>> {
        self.scenario.as_deref().map(ehtx::harness::load_scenario).transpose()
    }

    fn scenario(&self, trials: Option<usize>) -> ehtx::Result<Scenario> {
        let mut s = match self.load()? {
            Some(s) => s,
            None => Scenario::from_toml_str("schema = 1\n")?,
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(d) = self.discharge() {
            s.discharge = d;
        }
        if let Some(t) = trials {
            s.trials = t;
            s.online.fit_trials = s.online.fit_trials.min(t);
        }
        s.validate()?;
        Ok(s)
    }

    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::SingleFrame { harvest, gain, circuit_power, resistance, b0, enforce_bandwidth } => {
            let s = g.scenario(None)?;
            let mut f = s.template.with_harvest_and_gain(harvest, gain);
            if let Some(p) = circuit_power {
                f.circuit_power = p;
            }
            let m = match resistance {
                Some(r) => BatteryModel::new(s.battery.capacity, r, s.battery.voltage, s.battery.variant)?,
                None => s.battery,
            };
            let m = Scenario { battery: m, ..s }.effective_battery();
            let sol = solve_single_frame(&f, &m, b0, enforce_bandwidth)?;
            let d = sol.decision;
            let text = format!(
                "rho,alpha_a,alpha_b,d_b_w,rate_bps,limiting,transmission_feasible\n{},{},{},{},{},{:?},{}\n",
                ehtx::harness::fmt_float(d.rho),
                ehtx::harness::fmt_float(d.alpha_a),
                ehtx::harness::fmt_float(d.alpha_b),
                ehtx::harness::fmt_float(d.d_b),
                ehtx::harness::fmt_float(sol.rate * f.symbols / f.duration),
                sol.limiting,
                sol.transmission_feasible
            );
            g.write(&text)
        }
        Cmd::Offline { policy, trials, frames_out } => {
            let kinds: Vec<PolicyKind> = policy
                .iter()
                .map(|p| match p {
                    OfflinePolicy::Offline => PolicyKind::Offline,
                    OfflinePolicy::NoBattery => PolicyKind::NoBattery,
                    OfflinePolicy::IdealBattery => PolicyKind::IdealBattery,
                })
                .collect();
            experiment(g, &kinds, trials, frames_out)
        }
        Cmd::Online { policy, trials, frames_out } => {
            let kinds: Vec<PolicyKind> = policy
                .iter()
                .map(|p| match p {
                    OnlinePolicy::Dp => PolicyKind::Dp,
                    OnlinePolicy::Greedy => PolicyKind::Greedy,
                    OnlinePolicy::Statistical => PolicyKind::Statistical,
                    OnlinePolicy::Ctsr => PolicyKind::Ctsr,
                    OnlinePolicy::Cpsr => PolicyKind::Cpsr,
                })
                .collect();
            experiment(g, &kinds, trials, frames_out)
        }
        Cmd::Sweep { param, values, policy, trials } => {
            let kinds = policy.iter().map(|p| PolicyKind::parse(p)).collect::<ehtx::Result<Vec<_>>>()?;
            let base = g.scenario(trials)?;
            let mut runs = Vec::new();
            for &v in &values {
                let s = match param {
                    SweepParam::Resistance => with_resistance(&base, v)?,
                    SweepParam::MeanHarvest => with_mean_harvest(&base, v)?,
                    SweepParam::CircuitPower => {
                        let mut s = base.clone();
                        s.template.circuit_power = v;
                        s
                    }
                    SweepParam::Capacity => {
                        let mut s = base.clone();
                        s.battery = BatteryModel::new(v, s.battery.resistance, s.battery.voltage, s.battery.variant)?;
                        s.b0 = s.b0.min(v);
                        s.online.grid_step_j = s.online.grid_step_j.min(v);
                        s
                    }
                    SweepParam::Frames => {
                        if v < 1.0 || v.fract() != 0.0 {
                            return Err(Error::validation("values", "frame counts must be positive integers").into());
                        }
                        let mut s = base.clone();
                        s.frames = v as usize;
                        s
                    }
                };
                let opts = RunOptions { exec: g.exec(), keep_frames: false };
                runs.push((vec![v], run_experiment_with(&s, &kinds, opts)?));
            }
            let name = match param {
                SweepParam::Resistance => "resistance_ohm",
                SweepParam::MeanHarvest => "mean_harvest_w",
                SweepParam::CircuitPower => "circuit_power_w",
                SweepParam::Capacity => "capacity_j",
                SweepParam::Frames => "frames",
            };
            g.write(&sweep_csv(&[name], &runs, g.timing()))
        }
        Cmd::Reproduce { figure, trials } => {
            let fig = match figure {
                FigureArg::Fig3a => Figure::Fig3a,
                FigureArg::Fig3b => Figure::Fig3b,
                FigureArg::Fig4 => Figure::Fig4,
                FigureArg::Fig5 => Figure::Fig5,
                FigureArg::Fig6 => Figure::Fig6,
                FigureArg::Fig7 => Figure::Fig7,
                FigureArg::Table2 => Figure::Table2,
            };
            let opts = RecipeOptions { scenario: g.load()?, seed: g.seed, trials, discharge: g.discharge(), exec: g.exec() };
            if fig == Figure::Fig7 {
                let d = opts.discharge.unwrap_or(DischargeModel::Step);
                eprintln!("evaluation discharge model: {}", if d == DischargeModel::Step { "step" } else { "true" });
            }
            g.write(&reproduce(fig, &opts)?)
        }
    }
}

fn experiment(g: &Global, kinds: &[PolicyKind], trials: Option<usize>, frames_out: Option<PathBuf>) -> anyhow::Result<()> {
    let s = g.scenario(trials)?;
    let opts = RunOptions { exec: g.exec(), keep_frames: frames_out.is_some() };
    let res = run_experiment_with(&s, kinds, opts)?;
    if let (Some(path), Some(first)) = (frames_out, res.policies.first()) {
        std::fs::write(&path, frames_csv(first)).with_context(|| format!("writing {}", path.display()))?;
    }
    g.write(&summary_csv(&res, g.timing()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Validation { .. } | Error::Parse(_)) => 2,
        Some(Error::Io(_)) => 1,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code(&e);
            if code == 2 {
                eprintln!("\n{SCHEMA_HELP}");
            }
            ExitCode::from(code)
        }
    }
}
