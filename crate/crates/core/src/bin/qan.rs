//! `qan`: plan, sweep, calibrate and validate quantum access networks over
//! a 10G-EPON.
//!
//! Exit status: 0 success, 1 invalid input or I/O failure, 2 Monte Carlo
//! disagreement with the analytic model.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qan_core::keyfile;
use qan_core::scenario::{self, CalibrationInput, Scenario};
use qan_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "qan",
    version,
    about = "Quantum access network planning over 10G-EPON"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Directory for output files; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the scenario's simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the scenario's simulated pulse count.
    #[arg(long, global = true)]
    pulses: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Validate the input and exit.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the scenario's single configuration.
    Plan,
    /// Evaluate the grid spanned by the scenario's sweep axes.
    Sweep,
    /// Fit Raman coefficients to measured noise count rates.
    Calibrate {
        /// Measurements JSON; the reference noise table when omitted.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Compare a Monte Carlo run against the analytic observables.
    Validate,
    /// Monte Carlo, reconciliation and privacy amplification end to end.
    Postproc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Status {
    Ok,
    Mismatch,
}

fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let path = cli.scenario.as_deref().ok_or_else(|| Error::Config {
        path: "--scenario".into(),
        message: "this command needs a scenario file".into(),
    })?;
    let mut s = Scenario::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })?;
    if let Some(seed) = cli.seed {
        s.simulation.seed = seed;
    }
    if let Some(pulses) = cli.pulses {
        s.simulation.pulses = pulses;
    }
    s.validate()?;
    Ok(s)
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cli: &Cli) -> Result<Status> {
    let out = cli.out.as_deref();
    if let Command::Calibrate { measurements } = &cli.command {
        let input = match measurements {
            Some(p) => CalibrationInput::from_json(&fs::read_to_string(p)?)?,
            None => CalibrationInput::reference(),
        };
        if cli.check {
            println!("ok");
            return Ok(Status::Ok);
        }
        let report = scenario::calibrate(&input)?;
        emit(out, "calibration.json", &json(&report)?)?;
        return Ok(Status::Ok);
    }

    let s = load_scenario(cli)?;
    if cli.check {
        println!("ok: {} sweep point(s)", s.grid()?.len());
        return Ok(Status::Ok);
    }
    match cli.command {
        Command::Plan => {
            let report = scenario::plan(&s)?;
            match (cli.format, out) {
                (Some(Format::Csv), _) => emit(out, "plan.csv", &report.to_csv()?)?,
                (Some(Format::Json), _) => emit(out, "plan.json", &json(&report)?)?,
                (None, None) => {
                    print!("{}", report.to_table());
                    print!("{}", json(&report)?);
                }
                (None, Some(_)) => {
                    print!("{}", report.to_table());
                    emit(out, "plan.json", &json(&report)?)?;
                }
            }
        }
        Command::Sweep => {
            let res = scenario::sweep(&s)?;
            match cli.format {
                Some(Format::Json) => emit(out, "sweep.json", &res.to_json()?)?,
                _ => emit(out, "sweep.csv", &res.to_csv()?)?,
            }
        }
        Command::Validate => {
            let report = scenario::validate(&s)?;
            match cli.format {
                Some(Format::Json) => emit(out, "validation.json", &json(&report)?)?,
                _ => {
                    print!("{}", report.to_table());
                    if out.is_some() {
                        emit(out, "validation.json", &json(&report)?)?;
                    }
                }
            }
            if !report.pass {
                return Ok(Status::Mismatch);
            }
        }
        Command::Postproc => {
            let res = scenario::run_postproc(&s)?;
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                keyfile::write(&dir.join("sifted_sender.key"), &res.simulation.key.sender)?;
                keyfile::write(
                    &dir.join("sifted_receiver.key"),
                    &res.simulation.key.receiver,
                )?;
                keyfile::write(&dir.join("final_sender.key"), &res.sender_key)?;
                keyfile::write(&dir.join("final_receiver.key"), &res.receiver_key)?;
                emit(out, "observables.json", &json(&res.simulation.observables)?)?;
            }
            let report = json(&res.report)?;
            if out.is_some() {
                emit(out, "postproc.json", &report)?;
            }
            print!("{report}");
        }
        Command::Calibrate { .. } => unreachable!(),
    }
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Mismatch) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
