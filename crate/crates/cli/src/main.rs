use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use qsi_core::identity_tests::TestKind;
use qsi_core::QsiError;

mod commands;
mod record;

use commands::{BoundsCmd, EvalPath, Policy, ProtocolArgs, SweepArgs, SweepTarget};
use record::{write_csv, write_json, RunRecord};

#[derive(Debug)]
pub enum CliError {
    Core(QsiError),
    Input(String),
    Io(String),
}

impl From<QsiError> for CliError {
    fn from(e: QsiError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_cap() => 3,
            CliError::Core(_) | CliError::Input(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qsi",
    version,
    about = "Identity tests, protocols and bounds for quantum state identity"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the table here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON run records instead of CSV
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one identity test on an instance file
    Test {
        kind: TestKind,
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalPath::Both)]
        path: EvalPath,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run SRS or RCIR, exactly or by Monte Carlo
    Protocol {
        #[arg(value_parser = ["srs", "rcir"])]
        protocol: String,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Defaults to a fresh entropy seed, recorded in the output
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Policy::Uniform)]
        policy: Policy,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate a quantity over a parameter grid
    Sweep {
        #[arg(value_enum)]
        target: SweepTarget,
        /// First grid value (n, or m for srs-vs-m)
        #[arg(long)]
        from: Option<usize>,
        /// Last grid value, inclusive
        #[arg(long)]
        to: Option<usize>,
        /// Monte Carlo trials per row (srs-vs-m only)
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate a single bound
    Bounds {
        #[command(subcommand)]
        which: BoundsCmd,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the built-in reproduction checks
    Selftest {
        #[arg(long)]
        only: Option<u8>,
        #[arg(long)]
        json: bool,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(records: &[RunRecord], out: &OutputArgs, sidecar: bool) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io(e.to_string());
    let mut w = open_out(out.out.as_deref())?;
    if out.json {
        write_json(records, &mut w).map_err(io_err)?;
    } else {
        write_csv(records, &mut w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    if let (true, Some(path)) = (sidecar, out.out.as_deref()) {
        let side = path.with_extension("json");
        if side != path {
            let f = File::create(&side).map_err(|e| CliError::Io(format!("{}: {e}", side.display())))?;
            serde_json::to_writer_pretty(BufWriter::new(f), records)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.cmd {
        Cmd::Test {
            kind,
            instance,
            path,
            output,
        } => {
            emit(&commands::test(kind, &instance, path)?, &output, false)?;
        }
        Cmd::Protocol {
            protocol,
            instance,
            n,
            r,
            m,
            exact,
            trials,
            seed,
            policy,
            output,
        } => {
            let args = ProtocolArgs {
                instance: instance.as_deref(),
                n,
                r,
                m,
                exact,
                trials,
                seed: seed.unwrap_or_else(rand::random),
                policy,
            };
            let records = if protocol == "srs" {
                commands::protocol_srs(&args)?
            } else {
                commands::protocol_rcir(&args)?
            };
            emit(&records, &output, false)?;
        }
        Cmd::Sweep {
            target,
            from,
            to,
            trials,
            seed,
            output,
        } => {
            let args = SweepArgs {
                target,
                from,
                to,
                trials,
                seed: seed.unwrap_or_else(rand::random),
            };
            emit(&commands::sweep(&args)?, &output, true)?;
        }
        Cmd::Bounds { which, output } => {
            emit(&commands::bounds(&which)?, &output, false)?;
        }
        Cmd::Selftest { only, json } => {
            let reports = commands::selftest(only)?;
            let mut out = io::stdout().lock();
            let io_err = |e: io::Error| CliError::Io(e.to_string());
            if json {
                serde_json::to_writer_pretty(&mut out, &reports).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(out).map_err(io_err)?;
            } else {
                for r in &reports {
                    let mark = if r.passed { "PASS" } else { "FAIL" };
                    writeln!(
                        out,
                        "criterion {:>2} {mark} {} ({} ms): {}",
                        r.id, r.title, r.elapsed_ms, r.detail
                    )
                    .map_err(io_err)?;
                }
            }
            return Ok(reports.iter().all(|r| r.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qsi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
