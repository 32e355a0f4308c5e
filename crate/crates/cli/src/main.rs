use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use surfloss_cli::{execute, parse_config_with, CliError, Command};

#[derive(Parser)]
#[command(name = "surfloss", version, about = "Surface participation and loss budgets for planar qubit capacitors")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve one design at one trench depth.
    Simulate,
    /// Sweep trench depth and fit the logarithmic law.
    Sweep,
    /// Quality factor, T1 and loss bounds from participations.
    Budget,
    /// Extrapolate several designs and compare predicted Q.
    Compare,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Sweep => Command::Sweep,
            Cmd::Budget => Command::Budget,
            Cmd::Compare => Command::Compare,
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let invalid = |message: &str| {
        CliError::Config(vec![surfloss_cli::ParseError {
            line: None,
            key: None,
            message: message.into(),
        }])
    };
    let path = cli.config.as_ref().ok_or_else(|| invalid("--config is required"))?;
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.clone(),
        source,
    })?;
    let cfg = parse_config_with(&text, Some(cli.command.into())).map_err(CliError::Config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| invalid("no output directory: pass --out or set `[output] dir`"))?;
    if cli.jobs == Some(0) {
        return Err(invalid("--jobs must be at least 1"));
    }
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    info!("running {} from {}", cfg.command, path.display());
    let artifacts = execute(&cfg)?;
    artifacts.write_to(&out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(out) => {
            info!("artifacts written to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Config(problems) = &e {
                for p in problems {
                    eprintln!("{p}");
                }
            }
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
