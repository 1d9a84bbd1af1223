use std::ffi::OsString;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nearfield::codebook::VerifyMode;

use crate::commands::{self, CommandError};
use crate::config::{self, ConfigError, Format, Loaded};
use crate::output::{emit, Table};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

/// Near-field beamforming sweeps, effective Rayleigh distance maps,
/// concentric-ring codebooks and rate experiments.
#[derive(Debug, Parser)]
#[command(name = "nearfield", version)]
pub struct Cli {
    /// TOML experiment config; the built-in 800-element reference system when
    /// omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// First seed of the rate experiment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Regenerate the regression fixtures in DIR from DIR/config.toml.
    #[arg(long, value_name = "DIR")]
    pub golden: Option<PathBuf>,
    /// Skip the confirmation prompt of --golden.
    #[arg(long, requires = "golden")]
    pub yes: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Exact gain against |J0(beta)| around a focus angle.
    SweepAngular,
    /// Exact gain against |J0(zeta)| and its upper bound along a ray, or over
    /// the array radius.
    SweepDistance,
    /// Effective Rayleigh distance of the UCA and an equal-aperture ULA.
    ErdMap,
    /// Concentric-ring codebook.
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Monte-Carlo achievable rates of the beamforming schemes.
    Rate,
    /// Exact gain of stacked rings against |G(mu) J0(zeta)|.
    CylinderSweep,
}

#[derive(Debug, Clone, Subcommand)]
pub enum CodebookAction {
    /// List the focal points.
    Build,
    /// Check codeword correlations; exits 4 when a check fails.
    Verify {
        #[arg(long, value_enum, default_value = "neighbors")]
        mode: Mode,
    },
    /// Write the codebook JSON to --out and its focal points next to it.
    Export,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Neighbors,
    AllPairs,
}

impl From<Mode> for VerifyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Neighbors => VerifyMode::Neighbors,
            Mode::AllPairs => VerifyMode::AllPairs,
        }
    }
}

/// Command lines regenerated by `--golden` and checked by the regression
/// tests, with the file each one produces.
pub const FIXTURES: &[(&str, &[&str])] = &[
    ("sweep_angular.csv", &["sweep-angular"]),
    ("sweep_distance.csv", &["sweep-distance"]),
    ("erd_map.csv", &["erd-map"]),
    ("codebook_build.csv", &["codebook", "build"]),
    ("codebook_verify.csv", &["codebook", "verify"]),
    ("rate.csv", &["rate"]),
    ("rate.json", &["rate", "--format", "json"]),
    ("cylinder_sweep.csv", &["cylinder-sweep"]),
];

pub const FIXTURE_CONFIG: &str = "config.toml";

#[derive(Debug)]
enum Failure {
    Command(CommandError),
    VerifyFailed,
    Aborted,
}

impl From<CommandError> for Failure {
    fn from(e: CommandError) -> Self {
        Failure::Command(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Command(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Command(e.into())
    }
}

/// Parses arguments, runs and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(Failure::Command(e)) => {
            eprintln!("error: {e}");
            match e {
                CommandError::Config(ConfigError::Read { .. }) | CommandError::Io(_) => EXIT_IO,
                CommandError::Config(_) => EXIT_CONFIG,
                CommandError::Numeric(_) => EXIT_DOMAIN,
            }
        }
        Err(Failure::VerifyFailed) => EXIT_VERIFY_FAILED,
        Err(Failure::Aborted) => {
            eprintln!("aborted");
            EXIT_IO
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(dir) = &cli.golden {
        if cli.command.is_some() {
            return Err(usage("--golden takes no subcommand").into());
        }
        return golden(dir, cli.yes);
    }
    let Some(command) = &cli.command else {
        return Err(usage("no subcommand given").into());
    };
    let mut loaded = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        loaded.set_seed(seed)?;
    }
    let format = cli.format.unwrap_or(loaded.config.output.format);
    let out = cli.out.clone().or_else(|| loaded.config.output.path.clone());

    if let Command::Codebook { action: CodebookAction::Export } = command {
        let path = out.ok_or_else(|| ConfigError::Whole {
            origin: loaded.origin().to_string(),
            message: "codebook export needs --out or [output] path".into(),
        })?;
        let cb = commands::export(&loaded, &path)?;
        eprintln!(
            "wrote {} codewords to {} and {}",
            cb.len(),
            path.display(),
            commands::focal_path(&path).display()
        );
        return Ok(());
    }
    let (table, verified) = table_for(command, &loaded)?;
    emit(&table, format, out.as_deref())?;
    if verified == Some(false) {
        return Err(Failure::VerifyFailed);
    }
    Ok(())
}

/// Runs a table-producing command; the flag is the verification outcome.
fn table_for(command: &Command, l: &Loaded) -> Result<(Table, Option<bool>), CommandError> {
    let table = match command {
        Command::SweepAngular => commands::sweep_angular(l)?,
        Command::SweepDistance => commands::sweep_distance(l)?,
        Command::ErdMap => commands::erd_map(l)?,
        Command::Rate => commands::rate(l)?,
        Command::CylinderSweep => commands::cylinder_sweep(l)?,
        Command::Codebook { action: CodebookAction::Build } => {
            let cb = commands::build_codebook(l)?;
            eprintln!(
                "{} angles x {} rings = {} codewords",
                cb.grid().angles.len(),
                cb.grid().distances.len(),
                cb.len()
            );
            commands::focal_table(&cb)
        }
        Command::Codebook { action: CodebookAction::Verify { mode } } => {
            let (table, report) = commands::verify(l, (*mode).into())?;
            for w in report.warnings.iter().take(10) {
                eprintln!("warning: {w}");
            }
            if report.warnings.len() > 10 {
                eprintln!("warning: {} more pairs above the threshold", report.warnings.len() - 10);
            }
            eprintln!("{} pairs checked, {}", report.pairs_checked, if report.passed { "passed" } else { "FAILED" });
            return Ok((table, Some(report.passed)));
        }
        Command::Codebook { action: CodebookAction::Export } => unreachable!("handled by run"),
    };
    Ok((table, None))
}

fn usage(message: &str) -> ConfigError {
    ConfigError::Whole { origin: "command line".into(), message: message.into() }
}

fn golden(dir: &Path, yes: bool) -> Result<(), Failure> {
    let loaded = config::load(Some(&dir.join(FIXTURE_CONFIG)))?;
    if !yes {
        eprint!("overwrite {} fixtures in {}? [y/N] ", FIXTURES.len(), dir.display());
        io::stderr().flush()?;
        let mut answer = String::new();
        io::stdin().lock().read_line(&mut answer)?;
        if !matches!(answer.trim(), "y" | "Y" | "yes") {
            return Err(Failure::Aborted);
        }
    }
    for (file, args) in FIXTURES {
        let cli = Cli::try_parse_from(std::iter::once("nearfield").chain(args.iter().copied()))
            .expect("fixture command lines parse");
        let command = cli.command.as_ref().expect("fixtures name a subcommand");
        let format = cli.format.unwrap_or(loaded.config.output.format);
        let (table, _) = table_for(command, &loaded)?;
        emit(&table, format, Some(&dir.join(file)))?;
        eprintln!("wrote {}", dir.join(file).display());
    }
    Ok(())
}
