use clap::{Parser, Subcommand};
use porous_ch::config::{parse_config, RunConfig, Scenario};
use porous_ch::runner::{run, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "porous-ch",
    version,
    about = "Effective Cahn-Hilliard dynamics in perforated domains: cell problems, upscaled and microscopic solvers, wetting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent sub-runs
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the configured RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reference-cell corrector problems and write fields + tensors
    CellSolve(CommonArgs),
    /// Assemble and print the effective tensors (no corrector field files)
    Tensors(CommonArgs),
    /// Time-integrate the macroscopic equation (homogeneous or upscaled)
    MacroRun(CommonArgs),
    /// Time-integrate the microscopic problem on the perforated domain
    MicroRun(CommonArgs),
    /// Run micro and macro side by side and report averaged errors
    Compare(CommonArgs),
    /// Channel with heterogeneous walls: homogeneous run under upscaled g0
    Channel(CommonArgs),
    /// Effective contact angle from g0 or a cell + wetting spec
    ContactAngle(CommonArgs),
    /// Check the double-well admissibility inequality
    CheckF(CommonArgs),
}

fn expected_scenarios(cmd: &Command) -> &'static [Scenario] {
    match cmd {
        Command::CellSolve(_) | Command::Tensors(_) => &[Scenario::Cell],
        Command::MacroRun(_) => &[Scenario::Homogeneous, Scenario::Upscaled],
        Command::MicroRun(_) => &[Scenario::Micro],
        Command::Compare(_) => &[Scenario::Compare],
        Command::Channel(_) => &[Scenario::Channel],
        Command::ContactAngle(_) => &[Scenario::ContactAngle],
        Command::CheckF(_) => &[Scenario::CheckF],
    }
}

fn common(cmd: &Command) -> &CommonArgs {
    match cmd {
        Command::CellSolve(a)
        | Command::Tensors(a)
        | Command::MacroRun(a)
        | Command::MicroRun(a)
        | Command::Compare(a)
        | Command::Channel(a)
        | Command::ContactAngle(a)
        | Command::CheckF(a) => a,
    }
}

fn execute(cli: Cli) -> porous_ch::Result<()> {
    let args = common(&cli.command);
    let text = std::fs::read_to_string(&args.config)?;
    let mut config: RunConfig = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let allowed = expected_scenarios(&cli.command);
    if !allowed.contains(&config.scenario) {
        return Err(porous_ch::Error::Config(format!(
            "this subcommand expects scenario {:?}, config declares `{}`",
            allowed.iter().map(|s| s.name()).collect::<Vec<_>>(),
            config.scenario.name()
        )));
    }
    let opts = RunOptions {
        threads: args.threads.max(1),
        write_fields: !matches!(cli.command, Command::Tensors(_)),
    };
    let report = run(&config, &args.out, opts)?;
    for line in &report.summary {
        println!("{line}");
    }
    println!("scenario `{}` finished; files in {}:", report.scenario, args.out.display());
    for f in &report.files {
        println!("  {f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
