use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weaklg_harness::config::OutputFormat;
use weaklg_harness::report::{CheckStatus, Payload};
use weaklg_harness::{run, HarnessError, RunConfig, RunReport, Scenario, DEFAULT_OUT_DIR, OUT_DIR_ENV};

#[derive(Parser)]
#[command(
    name = "weaklg",
    version,
    about = "Weak vs strong measurement budgets and Leggett-Garg runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error, ensemble-size and wastage comparison of the two schemes.
    Budget(Common),
    /// Correlators and K3 for the all-strong and weak-first schemes.
    LgRun(Common),
    /// Invariant battery; exits with 2 if any check fails.
    Verify(Common),
    /// Grid sweep over pointer width, events per series and slice spacing.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration. Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; falls back to the config, then $WEAKLG_OUT_DIR, then ./weaklg-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn resolve(scenario: Scenario, args: &Common) -> Result<(RunConfig, PathBuf), HarnessError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::for_scenario(scenario),
    };
    if config.scenario != scenario {
        return Err(HarnessError::validation(
            "scenario",
            format!(
                "config is for `{}`, subcommand is `{}`",
                config.scenario.as_str(),
                scenario.as_str()
            ),
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.worker_count = workers;
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    if let Some(out) = &args.out {
        config.output.dir = Some(out.display().to_string());
    }
    let dir = match &config.output.dir {
        Some(dir) => PathBuf::from(dir),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    };
    config.validate()?;
    Ok((config, dir))
}

fn summarize(report: &RunReport) {
    match &report.payload {
        Payload::Budget(p) => {
            let r = &p.report;
            println!(
                "eps = {:.7}, M_s = {}, M_tot = {} (of M = {}), waste per measurement: weak {} vs strong {}",
                r.eps_target, r.m_s, r.m_tot, p.input.m, r.waste_weak_per_measurement, r.waste_strong_per_measurement
            );
        }
        Payload::LgRun(p) => {
            for (name, s) in [("all-strong", &p.all_strong), ("weak-first", &p.weak_first)] {
                if let Some(k3) = &s.k3 {
                    println!(
                        "{name}: K3 = {:.5} +/- {:.5}{}",
                        k3.value,
                        k3.std_error,
                        if k3.violated { " (violates LG)" } else { "" }
                    );
                }
            }
            if let Some(oracle) = p.k3_oracle {
                println!("oracle K3 = {oracle:.5}");
            }
        }
        Payload::Verify(p) => {
            for c in &p.checks {
                let status = match c.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::OutOfRegime => "out of regime",
                };
                println!(
                    "{:<24} {status:<14} measured {:.3e} (threshold {:.3e})",
                    c.name, c.measured, c.threshold
                );
            }
        }
        Payload::Sweep(p) => {
            println!("{} rows", p.rows.len());
            for f in &p.fits {
                println!(
                    "slope of {} vs {}: {:.4} (expected {})",
                    f.metric, f.axis, f.slope, f.expected
                );
            }
        }
    }
}

fn execute(scenario: Scenario, args: &Common) -> Result<(), HarnessError> {
    let (config, dir) = resolve(scenario, args)?;
    let report = run(&config)?;
    summarize(&report);
    for path in report.write(&dir, config.output.format)? {
        println!("wrote {}", path.display());
    }
    if let Payload::Verify(p) = &report.payload {
        if !p.all_passed {
            let failed: Vec<&str> = p
                .checks
                .iter()
                .filter(|c| c.status == CheckStatus::Fail)
                .map(|c| c.name.as_str())
                .collect();
            return Err(HarnessError::Verification(failed.join(", ")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (scenario, args) = match &cli.command {
        Command::Budget(a) => (Scenario::Budget, a),
        Command::LgRun(a) => (Scenario::LgRun, a),
        Command::Verify(a) => (Scenario::Verify, a),
        Command::Sweep(a) => (Scenario::Sweep, a),
    };
    match execute(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
