use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use iptm::config::Config;
use iptm::cycle::{self, DriveCycle};
use iptm::dp::{
    self, DpError, DpProblem, Formulation, PolicyController, PolicyMeta, SolveOptions, SolveStats,
    TerminalSpec,
};
use iptm::rules::{RuleController, RuleError};
use iptm::sim::{self, Bounds, Comparison, SimError, SimTrace, StrategyTotals};

const RULE_NAME: &str = "rule-based";

#[derive(Parser)]
#[command(name = "iptm", version, about = "Power and thermal management of a power-split hybrid in cold weather")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Drive cycle CSV (time_s, speed_mps[, p_trac_w]); the bundled cycle when omitted.
    #[arg(long, global = true)]
    cycle: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// DP worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Grid edit such as `t_cab.step=2` or `modes=off,on`; repeatable.
    #[arg(long = "grid-override", global = true, value_name = "KEY=VALUE")]
    grid_override: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DP formulation and roll its policy out on the full model.
    Solve {
        #[arg(long, value_enum)]
        formulation: FormulationArg,
    },
    /// Roll out a saved policy, or the rule-based controller without one.
    Simulate {
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Rule-based controller against DP formulations with matched SOC targets.
    Compare {
        /// Formulations to include; all three when omitted.
        #[arg(long, value_enum)]
        formulation: Vec<FormulationArg>,
    },
    /// Check a configuration against every parameter invariant.
    ValidateParams,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Baseline,
    Thermal,
    ThermalCabin,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Baseline => Formulation::BaselineDp,
            FormulationArg::Thermal => Formulation::ThermalDp,
            FormulationArg::ThermalCabin => Formulation::ThermalCabinDp,
        }
    }
}

#[derive(Serialize)]
struct StrategySummary {
    #[serde(flatten)]
    totals: StrategyTotals,
    #[serde(skip_serializing_if = "Option::is_none")]
    dp: Option<DpSummary>,
}

#[derive(Serialize)]
struct DpSummary {
    formulation: Formulation,
    value_g: f64,
    rollout_cost_g: f64,
    rollout_gap: f64,
    fallback_steps: usize,
    off_grid_steps: usize,
    terminal: TerminalSpec,
    stats: SolveStats,
}

#[derive(Serialize)]
struct CompareSummary {
    cycle_duration_s: f64,
    soc_target: f64,
    soc_comparable: f64,
    #[serde(flatten)]
    comparison: Comparison,
    dp: Vec<DpSummary>,
}

struct Session {
    config: Config,
    cycle: DriveCycle,
    out: PathBuf,
    workers: Option<usize>,
}

impl Session {
    fn load(c: &Common) -> Result<Self> {
        let mut config = match &c.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        config.grid_overrides.extend(c.grid_override.iter().cloned());
        config.validate()?;
        let cycle = match &c.cycle {
            Some(p) => cycle::load_cycle_with(p, &config.road)
                .with_context(|| format!("loading cycle {}", p.display()))?,
            None => cycle::bundled(),
        };
        Ok(Self {
            config,
            cycle,
            out: c.out.clone(),
            workers: c.workers,
        })
    }

    fn solve_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default();
        if let Some(w) = self.workers {
            o.workers = w;
        }
        o
    }

    fn bounds(&self) -> Bounds {
        Bounds::from_params(&self.config.vehicle)
    }

    fn out_file(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        log::info!("writing {}", path.display());
        Ok(BufWriter::new(f))
    }

    fn write_trace(&self, trace: &SimTrace) -> Result<()> {
        trace.write_csv(self.out_file(&format!("{}_trace.csv", trace.name))?)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        serde_json::to_writer_pretty(self.out_file(name)?, value)?;
        Ok(())
    }

    fn t_cab_lb(&self) -> f64 {
        self.config.vehicle.cabin.t_cab_lb
    }

    fn run_rules(&self) -> Result<SimTrace> {
        let mut ctl = RuleController::new(self.config.rule_params());
        Ok(sim::simulate(
            RULE_NAME,
            &mut ctl,
            &self.cycle,
            &self.config.vehicle,
            self.config.initial,
            &self.bounds(),
        )?)
    }

    fn solve(&self, problem: &DpProblem) -> Result<(dp::DpSolution, DpSummary)> {
        let sol = dp::solve(problem, &self.solve_options())?;
        log::info!(
            "{}: value {:.3} g, rollout fuel {:.3} g, {:.1} s",
            problem.formulation,
            sol.value,
            sol.rollout.fuel_total_g,
            sol.policy.stats.elapsed_s
        );
        let summary = DpSummary {
            formulation: problem.formulation,
            value_g: sol.value,
            rollout_cost_g: sol.rollout_cost(),
            rollout_gap: sol.rollout_gap(),
            fallback_steps: sol.fallbacks,
            off_grid_steps: sol.off_grid,
            terminal: problem.terminal,
            stats: sol.policy.stats.clone(),
        };
        Ok((sol, summary))
    }
}

fn solve(ctx: &Session, formulation: Formulation) -> Result<()> {
    let problem = ctx.config.problem(formulation, ctx.cycle.clone())?;
    let (sol, summary) = ctx.solve(&problem)?;
    let meta = PolicyMeta {
        grid_spec: Some(problem.grid.clone()),
        terminal: Some(problem.terminal),
        q_heat_fixed: problem.q_heat_fixed,
    };
    let name = formulation.name();
    dp::write_policy(ctx.out_file(&format!("{name}.policy"))?, &sol.policy, &meta)?;
    ctx.write_trace(&sol.rollout)?;
    ctx.write_json(
        &format!("{name}_summary.json"),
        &StrategySummary {
            totals: sim::totals(&sol.rollout, ctx.t_cab_lb()),
            dp: Some(summary),
        },
    )
}

fn simulate(ctx: &Session, policy: Option<&Path>) -> Result<()> {
    let trace = match policy {
        None => ctx.run_rules()?,
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let (policy, meta) = dp::read_policy(BufReader::new(f))
                .with_context(|| format!("reading policy {}", path.display()))?;
            if policy.horizon() != ctx.cycle.horizon() {
                bail!(
                    "policy covers {} steps but the cycle has {}",
                    policy.horizon(),
                    ctx.cycle.horizon()
                );
            }
            let mut ctl = PolicyController::new(&policy, meta.q_heat_fixed);
            let trace = sim::simulate(
                policy.formulation.name(),
                &mut ctl,
                &ctx.cycle,
                &ctx.config.vehicle,
                ctx.config.initial,
                &ctx.bounds(),
            )?;
            if ctl.fallbacks > 0 {
                log::info!("{} fallback steps", ctl.fallbacks);
            }
            trace
        }
    };
    ctx.write_trace(&trace)?;
    ctx.write_json(
        &format!("{}_summary.json", trace.name),
        &StrategySummary {
            totals: sim::totals(&trace, ctx.t_cab_lb()),
            dp: None,
        },
    )
}

fn compare(ctx: &Session, formulations: &[Formulation]) -> Result<()> {
    let rule = ctx.run_rules()?;
    let soc_target = rule.final_state().soc;
    let mut config = ctx.config.clone();
    match &mut config.terminal {
        Some(t) => t.soc_target = soc_target,
        None => config.terminal = Some(TerminalSpec::calibrated(&config.vehicle, soc_target)),
    }
    log::info!("{RULE_NAME}: {:.3} g, final SOC {soc_target:.4}", rule.fuel_total_g);
    let mut traces = Vec::new();
    let mut dp = Vec::new();
    for &f in formulations {
        let problem = config.problem(f, ctx.cycle.clone())?;
        let (sol, summary) = ctx.solve(&problem)?;
        ctx.write_trace(&sol.rollout)?;
        traces.push(sol.rollout);
        dp.push(summary);
    }
    ctx.write_trace(&rule)?;
    traces.push(rule);
    let refs: Vec<&SimTrace> = traces.iter().collect();
    let comparison = sim::compare(&refs, ctx.t_cab_lb())?;
    for [a, b] in &comparison.non_comparable {
        log::warn!("{a} and {b} end more than {} apart in SOC", sim::SOC_COMPARABLE);
    }
    ctx.write_json(
        "comparison.json",
        &CompareSummary {
            cycle_duration_s: ctx.cycle.duration(),
            soc_target,
            soc_comparable: sim::SOC_COMPARABLE,
            comparison,
            dp,
        },
    )
}

fn validate_params(common: &Common) -> Result<()> {
    let mut config = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.grid_overrides.extend(common.grid_override.iter().cloned());
    let issues = config.issues();
    if issues.is_empty() {
        eprintln!("configuration ok");
        return Ok(());
    }
    for i in &issues {
        eprintln!("  {i}");
    }
    bail!("{} invariant violations", issues.len())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::ValidateParams = cli.command {
        return validate_params(&cli.common);
    }
    let ctx = Session::load(&cli.common)?;
    match cli.command {
        Command::Solve { formulation } => solve(&ctx, formulation.into()),
        Command::Simulate { policy } => simulate(&ctx, policy.as_deref()),
        Command::Compare { formulation } => {
            let fs: Vec<Formulation> = if formulation.is_empty() {
                Formulation::ALL.to_vec()
            } else {
                formulation.into_iter().map(Into::into).collect()
            };
            compare(&ctx, &fs)
        }
        Command::ValidateParams => unreachable!(),
    }
}

/// 2 when the failure is an infeasible problem rather than bad input.
fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<DpError>(),
            Some(DpError::NoFeasibleControl { .. } | DpError::Rollout(_))
        ) || matches!(e.downcast_ref::<SimError>(), Some(SimError::ControllerFailure { .. }))
            || matches!(e.downcast_ref::<RuleError>(), Some(RuleError::InfeasibleDemand { .. }))
    });
    if infeasible {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
