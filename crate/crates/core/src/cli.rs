//! Command-line front end. Exit status: 0 success, 1 a run or check failed,
//! 2 bad configuration or arguments.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bench::{build_table, filters_check, load_summaries, run_ablation, summarize, write_run_artifacts, AblationSpec};
use crate::config::ScenarioConfig;
use crate::control::ControllerKind;
use crate::error::{Error, Result};
use crate::sim::{coupling_validation_run, run_scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mobile-ude", version, about = "Mobile manipulator UDE control simulator and ablation harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario (JSON file or preset name).
    Run {
        config: String,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an ablation grid described by a JSON spec.
    Ablate {
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the predicted coupling wrench with the interface sensor.
    ValidateCoupling {
        config: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Step and frequency responses of the controller filters against the
    /// continuous-time filters.
    FiltersCheck {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        sample_period: f64,
        #[arg(long, default_value_t = 3.0)]
        duration: f64,
    },
    /// Aggregate `*.summary.json` files in a directory into a table.
    Report { dir: PathBuf },
    /// Print a preset scenario as JSON.
    Preset {
        name: String,
        #[arg(long, default_value = "C1")]
        controller: String,
    },
}

enum Failure {
    Config(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => Failure::Run(e),
            _ => Failure::Config(e),
        }
    }
}

fn parse_kind(s: &str) -> Result<ControllerKind> {
    s.parse().map_err(|_| Error::config("controller", format!("unknown controller '{s}'")))
}

/// A path to a scenario JSON file, or a preset name.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() || arg.ends_with(".json") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{arg}: {e}")))?;
        let cfg = ScenarioConfig::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    } else {
        ScenarioConfig::preset(arg, ControllerKind::C1)
            .ok_or_else(|| Error::config("config", format!("no such file or preset '{arg}'")))
    }
}

fn write(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Run(e.into()))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Run(e.into()))
}

fn cmd_run(config: &str, controller: Option<&str>, seed: Option<u64>, out: &Path) -> std::result::Result<bool, Failure> {
    let mut cfg = load_scenario(config)?;
    if let Some(k) = controller {
        cfg = cfg.with_controller(parse_kind(k)?);
    }
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let record = run_scenario(&cfg)?;
    let summary = summarize(&cfg, &record).map_err(Failure::Run)?;
    let stem = format!("{}_{}_seed{}", cfg.name, cfg.controller.kind, cfg.seed);
    write_run_artifacts(out, &stem, &record, &summary).map_err(Failure::Run)?;
    println!("{} {} seed {}: {:?}", cfg.name, cfg.controller.kind, cfg.seed, summary.status);
    if let Some(m) = summary.force {
        println!("force  rmse {:.4} mae {:.4} sse {:+.4e}", m.rmse, m.mae, m.sse);
    }
    if let Some(ms) = &summary.motion {
        for (i, m) in ms.iter().enumerate() {
            println!("axis {i} rmse {:.4e} mae {:.4e} sse {:+.4e}", m.rmse, m.mae, m.sse);
        }
    }
    println!(
        "worst margin {:.3e} J, nonconformant {}, saturation events {}",
        summary.worst_margin, summary.nonconformant, summary.saturation_events
    );
    println!("wrote {}", out.join(format!("{stem}.csv")).display());
    Ok(summary.status.is_ok())
}

fn cmd_ablate(spec_path: &Path, out: Option<&Path>) -> std::result::Result<bool, Failure> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Failure::Config(Error::config("spec", format!("{}: {e}", spec_path.display()))))?;
    let mut spec = AblationSpec::from_json(&text)?;
    if let Some(o) = out {
        spec.output_dir = Some(o.to_path_buf());
    }
    let base = spec_path.parent().unwrap_or(Path::new("."));
    spec.resolve_scenarios(base)?;
    let result = run_ablation(&spec, base).map_err(Failure::Run)?;
    print!("{}", result.table.render());
    Ok(result.outcomes.iter().all(|o| o.summary.status.is_ok()))
}

fn cmd_validate_coupling(config: &str, out: &Path) -> std::result::Result<bool, Failure> {
    let cfg = load_scenario(config)?;
    let (record, series) = coupling_validation_run(&cfg)?;
    let mut csv = Vec::new();
    series.write_csv(&mut csv).map_err(Failure::Run)?;
    write(&out.join(format!("{}_coupling.csv", cfg.name)), &String::from_utf8_lossy(&csv))?;
    let mut report = String::from("axis,rmse,mae,peak,rmse_over_peak\n");
    println!("axis       rmse        mae       peak  rmse/peak");
    for (i, (rmse, mae, peak)) in series.discrepancy().iter().enumerate() {
        let ratio = if *peak > 0.0 { rmse / peak } else { 0.0 };
        let _ = writeln!(report, "{i},{rmse},{mae},{peak},{ratio}");
        println!("{i:>4} {rmse:>10.4} {mae:>10.4} {peak:>10.4} {ratio:>10.4}");
    }
    write(&out.join(format!("{}_coupling_summary.csv", cfg.name)), &report)?;
    Ok(record.status.is_ok())
}

fn cmd_filters_check(out: &Path, sample_period: f64, duration: f64) -> std::result::Result<bool, Failure> {
    if !(sample_period > 0.0) || !(duration > 0.0) {
        return Err(Failure::Config(Error::config("sample_period", "sample period and duration must be > 0")));
    }
    let checks = filters_check(sample_period, duration).map_err(Failure::Run)?;
    let mut summary = String::from("filter,sample_period,max_step_error,passed\n");
    for c in &checks {
        write(&out.join(format!("{}_step.csv", c.name)), &c.step_csv())?;
        write(&out.join(format!("{}_frequency.csv", c.name)), &c.frequency_csv())?;
        let _ = writeln!(summary, "{},{},{},{}", c.name, c.sample_period, c.max_step_error, c.passed());
        println!(
            "{:<12} max step error {:.3e} {}",
            c.name,
            c.max_step_error,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    write(&out.join("filters.csv"), &summary)?;
    Ok(checks.iter().all(|c| c.passed()))
}

fn cmd_report(dir: &Path) -> std::result::Result<bool, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Config(Error::config("dir", format!("{} is not a directory", dir.display()))));
    }
    let summaries = load_summaries(dir)?;
    if summaries.is_empty() {
        return Err(Failure::Config(Error::config("dir", "no *.summary.json files found")));
    }
    let table = build_table(&summaries);
    write(&dir.join("report.csv"), &table.to_csv())?;
    write(&dir.join("report.txt"), &table.render())?;
    print!("{}", table.render());
    Ok(summaries.iter().all(|s| s.status.is_ok()))
}

fn cmd_preset(name: &str, controller: &str) -> std::result::Result<bool, Failure> {
    let kind = parse_kind(controller)?;
    let cfg = ScenarioConfig::preset(name, kind)
        .ok_or_else(|| Error::config("preset", format!("unknown preset '{name}'")))?;
    println!("{}", cfg.to_json()?);
    Ok(true)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let outcome = match &cli.command {
        Command::Run {
            config,
            controller,
            seed,
            out,
        } => cmd_run(config, controller.as_deref(), *seed, out),
        Command::Ablate { spec, out } => cmd_ablate(spec, out.as_deref()),
        Command::ValidateCoupling { config, out } => cmd_validate_coupling(config, out),
        Command::FiltersCheck {
            out,
            sample_period,
            duration,
        } => cmd_filters_check(out, *sample_period, *duration),
        Command::Report { dir } => cmd_report(dir),
        Command::Preset { name, controller } => cmd_preset(name, controller),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("FAILED");
            EXIT_FAILED
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
    }
}
