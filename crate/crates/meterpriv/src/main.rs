use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meterpriv::config::ExperimentConfig;
use meterpriv::report::format_of;
use meterpriv::{harness, Format, HarnessError, Table};

/// Smart-meter privacy experiments.
///
/// Everything except the seed and the output location is read from the
/// config file. Log level: METERPRIV_LOG (error, warn, info, debug).
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy once.
    Simulate(RunArgs),
    /// Run the [sweep] or [leakage_sweep] grid.
    Sweep(RunArgs),
    /// Privacy-power function over the [ba] average-power grid.
    Ba(RunArgs),
    /// Error exponents of the [attack] hypothesis test.
    Attack(RunArgs),
    /// Re-emit a result file in another format.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Format of the input; guessed from the extension when absent.
    #[arg(long)]
    in_format: Option<FormatArg>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn emit(table: &Table, out: &OutArgs, cfg: Option<&ExperimentConfig>) -> Result<(), HarnessError> {
    let path = out.out.clone().or_else(|| cfg.and_then(|c| c.output.path.clone()));
    let format = out
        .format
        .map(Format::from)
        .or_else(|| cfg.map(|c| c.output.format))
        .or_else(|| path.as_deref().and_then(format_of))
        .unwrap_or_default();
    match path {
        Some(p) => table.write(&p, format),
        None => std::io::stdout()
            .write_all(&table.to_bytes(format))
            .map_err(|e| HarnessError::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Returns whether any point was infeasible.
fn dispatch(cmd: Command) -> Result<bool, HarnessError> {
    match cmd {
        Command::Simulate(args) => {
            let mut cfg = load(&args)?;
            cfg.sweep = None;
            let out = harness::run(&cfg)?;
            emit(&out.table, &args.out, Some(&cfg))?;
            Ok(out.infeasible > 0)
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            match (&cfg.sweep, &cfg.leakage_sweep) {
                (Some(_), None) => {
                    let out = harness::run(&cfg)?;
                    emit(&out.table, &args.out, Some(&cfg))?;
                    Ok(out.infeasible > 0)
                }
                (None, Some(l)) => {
                    emit(&harness::sweep_pe(l, cfg.seed)?, &args.out, Some(&cfg))?;
                    Ok(false)
                }
                _ => Err(HarnessError::Config(
                    "sweep needs exactly one of [sweep] and [leakage_sweep]".into(),
                )),
            }
        }
        Command::Ba(args) => {
            let cfg = load(&args)?;
            let ba = cfg.ba.as_ref().ok_or_else(|| harness::missing("ba"))?;
            emit(&harness::privacy_power_table(ba)?, &args.out, Some(&cfg))?;
            Ok(false)
        }
        Command::Attack(args) => {
            let cfg = load(&args)?;
            let a = cfg.attack.as_ref().ok_or_else(|| harness::missing("attack"))?;
            emit(&harness::attack_table(a, cfg.seed)?, &args.out, Some(&cfg))?;
            Ok(false)
        }
        Command::Report(args) => {
            let format = args
                .in_format
                .map(Format::from)
                .or_else(|| format_of(&args.input))
                .ok_or_else(|| HarnessError::Config("cannot tell the input format; pass --in-format".into()))?;
            let table = Table::read(&args.input, format)?;
            emit(&table, &args.out, None)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("METERPRIV_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            log::warn!("some points were infeasible");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
