use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwcuts::bnp::{BnpParams, Mode};
use dwcuts::cli::{self, CliError, RunReport, SolveOptions};
use dwcuts::colgen::ColGenParams;
use dwcuts::tkp::GenParams;

#[derive(Parser)]
#[command(name = "dwcuts", version, about = "Branch-and-cut-and-price with consistency cuts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a temporal knapsack instance.
    SolveTkp {
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        block_size: usize,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Solve a decomposed MIP given as JSON.
    SolveMip {
        instance: PathBuf,
        /// Replace bounded integer linking variables by binaries.
        #[arg(long)]
        binarize: bool,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Report whether a decomposition meets the integral-root conditions.
    CheckStructure { instance: PathBuf },
    /// Write a random temporal knapsack instance to stdout.
    GenTkp {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        capacity: i64,
        /// Start times are drawn from [0, horizon); defaults to n.
        #[arg(long)]
        horizon: Option<i64>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [1, 5])]
        weight: Vec<i64>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [1, 20])]
        profit: Vec<i64>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [1, 6])]
        duration: Vec<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Solve without consistency cuts.
    #[arg(long)]
    no_cuts: bool,
    /// Minimum violation of a separated cut.
    #[arg(long, default_value_t = ColGenParams::default().delta)]
    delta: f64,
    /// Initial pricing work limit.
    #[arg(long, default_value_t = ColGenParams::default().tau)]
    tau: usize,
    /// Work-limit escalation factor.
    #[arg(long, default_value_t = ColGenParams::default().eta)]
    eta: f64,
    /// Initial stabilization box radius.
    #[arg(long, default_value_t = ColGenParams::default().rho)]
    rho: f64,
    /// Box shrink factor.
    #[arg(long, default_value_t = ColGenParams::default().xi)]
    xi: f64,
    /// Radius below which stabilization is switched off.
    #[arg(long, default_value_t = ColGenParams::default().eps)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = BnpParams::default().node_limit)]
    node_limit: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Include wall time in the report.
    #[arg(long)]
    wall_time: bool,
}

impl SolveArgs {
    fn options(&self, block_size: usize, binarize: bool) -> SolveOptions {
        let colgen = cli::colgen_params(self.delta, self.tau, self.eta, self.rho, self.xi, self.eps, self.threads);
        let mode = if self.no_cuts { Mode::NoCuts } else { Mode::Cuts };
        let bnp = BnpParams { colgen, mode, node_limit: self.node_limit, ..BnpParams::default() };
        SolveOptions { bnp, block_size, seed: self.seed, binarize }
    }

    fn emit(&self, report: &RunReport) -> Result<ExitCode, CliError> {
        let text = report.to_json(self.wall_time);
        match &self.json_out {
            Some(path) => cli::write_file(path, &text)?,
            None => print!("{text}"),
        }
        Ok(ExitCode::from(report.exit_code() as u8))
    }
}

fn run(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::SolveTkp { instance, block_size, solve } => {
            let report = cli::solve_tkp_file(&instance, solve.options(block_size, false))?;
            solve.emit(&report)
        }
        Command::SolveMip { instance, binarize, solve } => {
            let report = cli::solve_mip_file(&instance, solve.options(0, binarize))?;
            solve.emit(&report)
        }
        Command::CheckStructure { instance } => {
            print!("{}", cli::structure_text(&instance)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::GenTkp { seed, n, capacity, horizon, weight, profit, duration, out } => {
            let g = GenParams {
                horizon: horizon.unwrap_or(n as i64),
                weight: (weight[0], weight[1]),
                profit: (profit[0], profit[1]),
                duration: (duration[0], duration[1]),
                ..GenParams::new(n, capacity)
            };
            let text = cli::gen_tkp_text(seed, &g);
            match out {
                Some(path) => cli::write_file(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
