//! Command-line front end. Every subcommand is a thin wrapper over the
//! library API.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{self, ConfigError, RawConfig, RunConfig};
use crate::driver::{self, DriverError, RunReport};
use crate::output::fmt_f64;
use crate::verification::{self, ErrorRow, ErrorTable, NormKind, MESHUPDATE_VELOCITY};

#[derive(Debug, Parser)]
#[command(name = "ccmsim", version, about = "Close-contact melting simulator", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification case and print its error table.
    Verify {
        #[command(subcommand)]
        case: VerifyCase,
    },
    /// Run one simulation per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `section.key`; `source.q_h` values are bulk power in W.
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCase {
    /// Boundary flux on the cooling unit square.
    Cbf {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
        /// Number of steps; defaults to reaching t = 1.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Linear field on the unit square with a translating strip.
    Meshupdate {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
        /// Keep the strip at rest.
        #[arg(long = "static")]
        at_rest: bool,
    },
}

/// Sets up logging from `CCMSIM_LOG` (default `info`). Safe to call twice.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("CCMSIM_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<(), DriverError> {
    match cmd {
        Command::Run { config, out } => {
            let mut cfg = config::load_config(&config)?;
            if let Some(out) = out {
                cfg.output.directory = out;
            }
            let report = driver::run(&cfg)?;
            println!("{}", summary_line(&report));
            Ok(())
        }
        Command::Verify { case } => verify(case),
        Command::Sweep { config, key, values, out } => {
            let rows = sweep(&config, &key, &values, &out)?;
            println!("{}", rows.trim_end());
            Ok(())
        }
    }
}

fn summary_line(r: &RunReport) -> String {
    format!(
        "steps {}  final displacement {} m  tail velocity {} m/s  U_eq {} m/s  runtime {:.2} s",
        r.records.len(),
        fmt_f64(r.final_displacement),
        fmt_f64(r.mean_velocity_tail),
        fmt_f64(r.u_eq),
        r.runtime
    )
}

fn invalid(key: &str, msg: impl Into<String>) -> DriverError {
    DriverError::Config(ConfigError::Invalid { key: key.to_string(), msg: msg.into() })
}

fn verify(case: VerifyCase) -> Result<(), DriverError> {
    match case {
        VerifyCase::Cbf { h, dt, out, steps } => {
            if !(dt > 0.0) {
                return Err(invalid("--dt", "must be positive"));
            }
            let steps = steps.unwrap_or_else(|| (1.0 / dt).round().max(1.0) as usize);
            let case = verification::run_cbf_case(h, dt, steps).map_err(numerical_or_input)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("cbf_series.csv"), case.series_csv())?;
            let table = case.error_table();
            std::fs::write(out.join("cbf_errors.csv"), table.to_csv())?;
            print!("{}", case.series_csv());
            Ok(())
        }
        VerifyCase::Meshupdate { h, out, at_rest } => {
            let velocity = if at_rest { 0.0 } else { MESHUPDATE_VELOCITY };
            let case = verification::run_meshupdate_case(h, velocity).map_err(numerical_or_input)?;
            std::fs::create_dir_all(&out)?;
            let mut series = String::from("step,error\n");
            for (i, e) in case.errors.iter().enumerate() {
                series.push_str(&format!("{},{}\n", i + 1, fmt_f64(*e)));
            }
            std::fs::write(out.join("meshupdate_series.csv"), series)?;
            let table = ErrorTable::new(
                NormKind::MaxOverTimeL2,
                vec![ErrorRow { h, dt: 1.0, error: case.max_error, runtime: case.runtime }],
            );
            std::fs::write(out.join("meshupdate_errors.csv"), table.to_csv())?;
            print!("{}", table.to_csv());
            println!("max L2 error {} after {} slips", fmt_f64(case.max_error), case.slips);
            Ok(())
        }
    }
}

fn numerical_or_input(e: verification::VerificationError) -> DriverError {
    match e {
        verification::VerificationError::Invalid(msg) => DriverError::Input(msg),
        other => DriverError::Numerical { step: 0, msg: other.to_string() },
    }
}

/// Value written to the config for one sweep point. Bulk power for
/// `source.q_h` is divided by the configured tip area.
pub fn sweep_value(base: &RunConfig, key: &str, value: &str) -> Result<String, DriverError> {
    if key == "source.q_h" {
        let watts: f64 = value.trim().parse().map_err(|_| invalid(key, format!("`{value}` is not a number")))?;
        Ok(format!("{:?}", watts / base.source.tip_area))
    } else {
        Ok(value.trim().to_string())
    }
}

/// Runs one simulation per value in `out/<index>_<value>/` and returns the
/// summary CSV, which is also written to `out/sweep.csv`.
pub fn sweep(config_path: &Path, key: &str, values: &[String], out: &Path) -> Result<String, DriverError> {
    let raw = config::load_raw(config_path)?;
    let base = RunConfig::from_raw(&raw)?;
    let mut csv = String::from("value,setting,u_eq,final_velocity,final_displacement,t95\n");
    std::fs::create_dir_all(out)?;
    for (i, value) in values.iter().enumerate() {
        let mut point: RawConfig = raw.clone();
        point.set(key, sweep_value(&base, key, value)?)?;
        let mut cfg = RunConfig::from_raw(&point)?;
        let label: String = value.trim().chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
        cfg.output.directory = out.join(format!("{i:02}_{label}"));
        log::info!("sweep {key} = {value}: {}", cfg.output.directory.display());
        let report = driver::run(&cfg)?;
        let last = report.records.last().map_or(report.initial_velocity, |r| r.velocity);
        let t95 = report.time_to_fraction(0.95).map_or(String::new(), fmt_f64);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            value.trim(),
            point.values[key],
            fmt_f64(report.u_eq),
            fmt_f64(last),
            fmt_f64(report.final_displacement),
            t95
        ));
    }
    std::fs::write(out.join("sweep.csv"), &csv)?;
    Ok(csv)
}
