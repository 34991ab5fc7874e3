//! `coopcr`: solve, simulate and sweep the cooperative cognitive-radio model.
//!
//! Exit codes: 0 success (or feasible), 2 infeasible, 1 usage or validation error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coopcr_core::experiments::{self, Figure, SimSettings};
use coopcr_core::model::ParamWarning;
use coopcr_core::optimizer::solve;
use coopcr_core::sim::{self, DEFAULT_HORIZON};
use coopcr_core::{DelaySpec, Error, NetworkParams, Policy, Problem, SearchConfig, SimConfig};

use config::RunConfig;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "coopcr", version, about = "Delay-constrained cooperative cognitive radio: model, optimizer and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the SU policy and print the result as JSON.
    Solve(SolveArgs),
    /// Simulate a fixed policy and print the report as JSON.
    Simulate(SimulateArgs),
    /// Write the reference experiment CSVs.
    Reproduce(ReproduceArgs),
    /// Run a sweep described by a TOML file and write CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct NetworkArgs {
    /// PU arrival probability per slot.
    #[arg(long, default_value_t = 0.2)]
    lp: f64,
    /// SU arrival probability per slot.
    #[arg(long, default_value_t = 0.2)]
    ls: f64,
    /// PU to destination success probability.
    #[arg(long, default_value_t = 0.3)]
    hpd: f64,
    /// PU to SU success probability.
    #[arg(long, default_value_t = 0.4)]
    hps: f64,
    /// SU to destination success probability.
    #[arg(long, default_value_t = 0.8)]
    hsd: f64,
}

impl NetworkArgs {
    fn params(&self) -> Result<NetworkParams, Error> {
        let params = NetworkParams::new(self.lp, self.ls, self.hpd, self.hps, self.hsd)?;
        for w in params.warnings() {
            match w {
                ParamWarning::RelayNotBetterThanDirect => {
                    eprintln!("warning: h_sd <= h_pd, relaying through the SU cannot help the PU")
                }
            }
        }
        Ok(params)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    /// Maximize SU service rate subject to the PU delay bound.
    P1,
    /// Minimize SU delay subject to the PU delay bound.
    P3,
    /// Maximize SU service rate subject to stability only.
    BlThroughput,
    /// Minimize SU delay subject to stability only.
    BlDelay,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::P1 => Problem::P1,
            ProblemArg::P3 => Problem::P3,
            ProblemArg::BlThroughput => Problem::BlThroughput,
            ProblemArg::BlDelay => Problem::BlDelay,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::P3)]
    problem: ProblemArg,
    #[command(flatten)]
    network: NetworkArgs,
    /// PU delay bound in slots (ignored by the baselines).
    #[arg(long, default_value_t = 20.0)]
    psi: f64,
    /// Grid step for the PU service rate.
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Relay admission probability.
    #[arg(long)]
    a: f64,
    /// Probability of serving the SU's own queue in an idle slot.
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    slots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slots excluded from statistics; defaults to 10% of --slots.
    #[arg(long)]
    warmup: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    All,
}

impl FigureArg {
    fn figures(self) -> Vec<Figure> {
        match self {
            FigureArg::Fig2 => vec![Figure::Fig2],
            FigureArg::Fig3 => vec![Figure::Fig3],
            FigureArg::Fig4 => vec![Figure::Fig4],
            FigureArg::Fig5 => vec![Figure::Fig5],
            FigureArg::All => Figure::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum, default_value_t = FigureArg::All)]
    figure: FigureArg,
    #[arg(long, env = "COOPCR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Simulated slots per row.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    slots: u64,
    /// Base seed; row i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Analytic columns only.
    #[arg(long)]
    no_sim: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV, `-` for stdout; overrides `output` in the config. Stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Reproduce(args) => cmd_reproduce(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("JSON encoding failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, Error> {
    let params = args.network.params()?;
    let spec = DelaySpec::new(args.psi)?;
    let cfg = SearchConfig::with_delta(args.delta);
    let result = solve(&params, args.problem.into(), Some(&spec), &cfg)?;
    print_json(&result)?;
    Ok(if result.is_feasible() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let params = args.network.params()?;
    let policy = Policy::new(args.a, args.b)?;
    let mut cfg = SimConfig::new(params, policy, args.slots, args.seed);
    if let Some(w) = args.warmup {
        cfg.warmup = w;
    }
    print_json(&sim::run(&cfg)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<ExitCode, Error> {
    let sim = (!args.no_sim).then_some(SimSettings {
        horizon: args.slots,
        warmup: None,
        seed: args.seed,
    });
    std::fs::create_dir_all(&args.out_dir)?;
    for fig in args.figure.figures() {
        let rows = fig.rows(sim)?;
        let path = args.out_dir.join(fig.file_name());
        write_atomically(&path, |w| experiments::write_csv(&rows, w))?;
        eprintln!("wrote {} ({} rows)", path.display(), rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, Error> {
    let cfg = RunConfig::load(&args.config)?;
    let rows = experiments::run_sweep(&cfg.sweep)?;
    match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) if path.as_os_str() != "-" => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_atomically(path, |w| experiments::write_csv(&rows, w))?;
        }
        _ => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            experiments::write_csv(&rows, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Write to a temporary file next to `path`, then rename it into place.
fn write_atomically<F>(path: &Path, write: F) -> Result<(), Error>
where
    F: FnOnce(&mut std::fs::File) -> Result<(), Error>,
{
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
