use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mtdc_sim::config::{parse_quantity, parse_with_overrides, to_toml};
use mtdc_sim::report::{write_comparison, write_outputs, write_sweep};
use mtdc_sim::scenario::{compare, run, sweep, ScenarioConfig, SimulationResult};
use mtdc_sim::{Result, SimError};

/// Transient simulation of DC faults in multi-terminal HVDC grids.
#[derive(Parser)]
#[command(name = "mtdc-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write waveforms, events and a summary.
    Run {
        scenario: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Override a config field, e.g. `detector.threshold=2kA`.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run two scenarios on the same grid and fault and tabulate the results.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Applied to both scenarios.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a scenario once per value of one numeric field.
    Sweep {
        scenario: PathBuf,
        /// Dotted field path, e.g. `hybrid.ufd_opening_time`.
        #[arg(short, long)]
        param: String,
        /// Comma-separated values; unit suffixes allowed (`1ms,2ms`).
        #[arg(short, long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the default scenario with every field filled in.
    ExportDefaults {
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_with_overrides(&text, overrides)
}

fn print_metrics(label: &str, r: &SimulationResult) {
    let m = &r.metrics;
    let ms = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.3} ms", v * 1e3));
    let ka = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.3} kA", v / 1e3));
    println!(
        "{label}: design={:?} trip={} interruption={} peak={} main_breaker={} mov={:.3} MJ min_bus={:.1} kV",
        r.config.breaker_design,
        ms(r.first_trip()),
        ms(m.interruption_time),
        ka(m.peak_fault_current),
        ka(m.max_main_breaker_current),
        m.mov_energy / 1e6,
        m.min_bus_voltage / 1e3,
    );
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            output,
            overrides,
        } => {
            let result = run(&load(&scenario, &overrides)?)?;
            write_outputs(&result, &output)?;
            print_metrics(&scenario.display().to_string(), &result);
        }
        Command::Compare {
            a,
            b,
            output,
            overrides,
        } => {
            let (ca, cb) = (load(&a, &overrides)?, load(&b, &overrides)?);
            let (ra, rb) = rayon::join(|| run(&ca), || run(&cb));
            let (ra, rb) = (ra?, rb?);
            let c = compare(&ra, &rb)?;
            write_outputs(&ra, &output.join("a"))?;
            write_outputs(&rb, &output.join("b"))?;
            write_comparison(&c, &output)?;
            print!("{}", mtdc_sim::report::comparison_markdown(&c));
        }
        Command::Sweep {
            scenario,
            param,
            values,
            output,
            overrides,
        } => {
            let base = load(&scenario, &overrides)?;
            let nums = values
                .iter()
                .map(|v| {
                    parse_quantity(v)
                        .or_else(|| v.trim().parse().ok())
                        .ok_or_else(|| SimError::Config {
                            field: param.clone(),
                            reason: format!("sweep value `{v}` is not a number"),
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            let results = sweep(&base, &param, &nums)?;
            write_sweep(&param, &nums, &results, &output)?;
            for (v, r) in nums.iter().zip(&results) {
                print_metrics(&format!("{param}={v}"), r);
            }
        }
        Command::ExportDefaults { output } => {
            let text = to_toml(&ScenarioConfig::default())?;
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| SimError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "kind": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
