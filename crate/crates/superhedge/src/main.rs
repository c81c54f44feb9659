use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superhedge::config::load_path;
use superhedge::{
    cmd_deform, cmd_hedge, cmd_price, cmd_simulate, cmd_verify, load_config, CliError, Outcome,
    Overrides, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "superhedge",
    version,
    about = "Price intervals and maximal hedges for basket calls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper ends of the price interval at time 0.
    Price(Common),
    /// Maximal hedge at time 0, or a backtest along a realized path.
    Hedge(Common),
    /// Monte-Carlo prices under the mean-b measure families.
    Simulate(Common),
    /// Sweep of the deformed upper price and, with --target, the solve.
    Deform(Common),
    /// Run every invariant suite; exit 2 if any check fails.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    fault_inject: Option<String>,
    /// Measure family for `simulate` and `verify`.
    #[arg(long)]
    measure: Option<String>,
    /// JSON file with the realized jumps for `hedge`.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Also write the per-count-vector terms from `price`.
    #[arg(long)]
    dump_terms: bool,
}

impl Common {
    fn load(self) -> Result<RunConfig, CliError> {
        let cfg = load_config(&self.config)?;
        let path = self.path.as_deref().map(load_path).transpose()?;
        cfg.with_overrides(Overrides {
            seed: self.seed,
            samples: self.samples,
            beta: self.beta,
            delta: self.delta,
            tol: self.tol,
            target: self.target,
            out: self.out,
            threads: self.threads,
            fault_inject: self.fault_inject,
            measure: self.measure,
            path,
            dump_terms: self.dump_terms,
        })
    }
}

type Handler = fn(&RunConfig) -> Result<Outcome, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (Common, Handler) = match cli.command {
        Command::Price(c) => (c, cmd_price),
        Command::Hedge(c) => (c, cmd_hedge),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Deform(c) => (c, cmd_deform),
        Command::Verify(c) => (c, cmd_verify),
    };
    let cfg = common.load()?;
    if let Some(threads) = cfg.run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("run.threads: {e}")))?;
    }
    let outcome = cmd(&cfg)?;
    print!("{}", outcome.text);
    outcome.write_files(&cfg.run.out)?;
    match outcome.failure {
        Some(failed) => Err(CliError::Verification(failed)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
