//! `qot`: per-channel SNR and throughput prediction for ultra-wideband WDM
//! links with hybrid Raman/lumped amplification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qot_cli::config::{load_scenario, ConfigError, Scenario};
use qot_cli::emit;
use qot_cli::run;
use qot_core::link::{validate_scenario, StageError};
use qot_core::raman::SolveError;

#[derive(Parser)]
#[command(
    name = "qot",
    about = "SNR and throughput estimation for S+C+L WDM links with hybrid Raman amplification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PumpSwitch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum NliMethodArg {
    ClosedForm,
    Integral,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a scenario file parses and all tables cover the plan.
    ValidateConfig { scenario: PathBuf },
    /// Solve one fibre span; emits power profiles and the on/off gain.
    SolveSpan {
        scenario: PathBuf,
        /// Solve with pumps on or off (the gain CSV always uses both).
        #[arg(long, value_enum, default_value = "on")]
        pumps: PumpSwitch,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Run the recirculating loop; emits the trace, QoT report and summary.
    RunLink {
        scenario: PathBuf,
        /// Override the scenario's recirculation count.
        #[arg(long)]
        recirculations: Option<usize>,
        /// Override the scenario's NLI method.
        #[arg(long, value_enum)]
        nli: Option<NliMethodArg>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Emit plot-ready spectrum and SNR-component data files.
    Report {
        scenario: PathBuf,
        #[arg(long)]
        recirculations: Option<usize>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
}

/// Exit codes: 0 success, 1 config error, 2 solver non-convergence,
/// 3 internal invariant violation.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    if let Some(stage) = err.downcast_ref::<StageError>() {
        return stage_code(stage);
    }
    if let Some(solve) = err.downcast_ref::<SolveError>() {
        return solve_code(solve);
    }
    3
}

fn stage_code(e: &StageError) -> u8 {
    match e {
        StageError::Solve(s) => solve_code(s),
        StageError::AtRecirculation { source, .. } => stage_code(source),
        StageError::TableCoverage { .. } | StageError::Table(_) | StageError::BadScenario(_) => 1,
        _ => 3,
    }
}

fn solve_code(e: &SolveError) -> u8 {
    match e {
        SolveError::NonConvergence { .. }
        | SolveError::NegativePower { .. }
        | SolveError::Integrator(_) => 2,
        _ => 1,
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    load_scenario(path).map_err(anyhow::Error::new)
}

fn cmd_validate(path: &Path) -> anyhow::Result<()> {
    let scenario = load(path)?;
    let link = scenario.link_scenario();
    let warnings =
        validate_scenario(&link, scenario.nf_warning_threshold_db).map_err(anyhow::Error::new)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "ok: {} channels, {} stages, {} recirculations",
        scenario.plan.len(),
        scenario.stages.len(),
        scenario.recirculations
    );
    Ok(())
}

fn cmd_solve_span(path: &Path, pumps: PumpSwitch, output_dir: &Path) -> anyhow::Result<()> {
    let scenario = load(path)?;
    let artifacts = run::solve_span(&scenario, matches!(pumps, PumpSwitch::On))?;
    write_file(
        output_dir,
        "profiles.csv",
        &emit::profiles_csv(&artifacts.profiles),
    )?;
    write_file(
        output_dir,
        "on_off_gain.csv",
        &emit::gain_csv(&scenario.plan, &artifacts.on_off_gain_db),
    )?;
    Ok(())
}

fn cmd_run_link(
    path: &Path,
    recirculations: Option<usize>,
    nli: Option<NliMethodArg>,
    output_dir: &Path,
) -> anyhow::Result<()> {
    let mut scenario = load(path)?;
    if let Some(method) = nli {
        scenario.nli = match method {
            NliMethodArg::ClosedForm => qot_core::link::NliTracking::ClosedForm {
                fit_terms: 4,
                config: Default::default(),
            },
            NliMethodArg::Integral => qot_core::link::NliTracking::Integral(scenario.integral),
            NliMethodArg::Off => qot_core::link::NliTracking::Off,
        };
    }
    let artifacts = run::run_link(&scenario, recirculations)?;
    write_file(
        output_dir,
        "trace.csv",
        &emit::trace_csv(&scenario.plan, &artifacts.trace),
    )?;
    write_file(output_dir, "report.csv", &emit::report_csv(&artifacts.report))?;
    write_file(
        output_dir,
        "summary.txt",
        &emit::summary_text(
            &artifacts.report,
            recirculations.unwrap_or(scenario.recirculations),
            scenario.fibre.length_km,
        ),
    )?;
    Ok(())
}

fn cmd_report(path: &Path, recirculations: Option<usize>, output_dir: &Path) -> anyhow::Result<()> {
    let scenario = load(path)?;
    let artifacts = run::full_report(&scenario, recirculations)?;
    write_file(
        output_dir,
        "spectrum_fibre.csv",
        &emit::fibre_spectrum_csv(&scenario.plan, &artifacts.launch, &artifacts.fibre_out),
    )?;
    write_file(
        output_dir,
        "fits.csv",
        &emit::fits_csv(&scenario.plan, &artifacts.fits),
    )?;
    write_file(output_dir, "nli.csv", &emit::nli_csv(&artifacts.span_nli))?;
    write_file(
        output_dir,
        "report.csv",
        &emit::report_csv(&artifacts.link.report),
    )?;
    write_file(
        output_dir,
        "summary.txt",
        &emit::summary_text(
            &artifacts.link.report,
            recirculations.unwrap_or(scenario.recirculations),
            scenario.fibre.length_km,
        ),
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are config errors per the exit-code contract,
            // except help/version which exit cleanly.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let result = match &cli.command {
        Command::ValidateConfig { scenario } => cmd_validate(scenario),
        Command::SolveSpan {
            scenario,
            pumps,
            output_dir,
        } => cmd_solve_span(scenario, *pumps, output_dir),
        Command::RunLink {
            scenario,
            recirculations,
            nli,
            output_dir,
        } => cmd_run_link(scenario, *recirculations, *nli, output_dir),
        Command::Report {
            scenario,
            recirculations,
            output_dir,
        } => cmd_report(scenario, *recirculations, output_dir),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
