//! `pmoc` — trajectory-optimization benchmark harness.
//!
//! Exit codes: 0 success, 2 infeasible, 3 numerical failure, 64 bad
//! usage.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use pmoc_cli::config::{default_out_dir, BasisChoice, ConfigOverrides};
use pmoc_cli::harness::{
    compare, exit_code_for, exit_code_for_status, export_trajectory, render_comparison, run,
    verify, write_report, CliError, StudyChoice,
};
use pmoc_cli::report::BenchmarkReport;

#[derive(Parser)]
#[command(
    name = "pmoc",
    version,
    about = "Pseudo-spectral variational trajectory optimization: run, compare, and verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its report and trajectory CSV.
    Run {
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Solve the same problem under several schemes (default all three)
    /// and print one consolidated table.
    Compare {
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Run the geometric verification studies and write their CSV table.
    Verify {
        /// Which study to run.
        #[arg(long, value_enum, default_value = "all")]
        study: StudyChoice,
        /// Grid family for the convergence study; the symplectic and
        /// momentum certificates run on their pinned fixtures.
        #[arg(long, value_enum, default_value = "chebyshev")]
        basis: BasisChoice,
        /// Output directory for study.csv (default: $PMOC_OUT_DIR, then
        /// the working directory).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Re-export the trajectory CSV from an existing report file.
    Export {
        /// Report (JSON lines) to read.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Destination CSV path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Run { overrides } => cmd_run(&overrides),
        Command::Compare { overrides } => cmd_compare(&overrides),
        Command::Verify { study, basis, out } => cmd_verify(study, basis, out),
        Command::Export { report, out } => cmd_export(&report, &out),
    };
    std::process::exit(code);
}

fn fail(err: &CliError) -> i32 {
    eprintln!("error: {err}");
    exit_code_for(err)
}

fn cmd_run(overrides: &ConfigOverrides) -> i32 {
    let config = match overrides.resolve_run() {
        Ok(config) => config,
        Err(err) => return fail(&err.into()),
    };
    let report = run(&config);
    let paths = match write_report(&report) {
        Ok(paths) => paths,
        Err(err) => return fail(&err),
    };
    let record = &report.record;
    println!(
        "run {}/{}/{} N={}: status {}",
        config.system, config.scheme, config.basis, config.n, record.status
    );
    if let Some(message) = &record.message {
        eprintln!("  error          {message}");
    }
    if let Some(cost) = record.cost {
        println!("  cost           {cost:.6}");
    }
    if let Some(feasibility) = record.feasibility {
        println!("  feasibility    {feasibility:.3e}");
    }
    if let Some(majors) = record.major_iterations {
        println!("  major iters    {majors}");
    }
    if let Some(t_f) = record.t_f {
        println!("  t_f            {t_f:.6}");
    }
    for param in &record.design_params {
        println!("  {:<14} {:.6}", param.name, param.value);
    }
    if let Some(reference) = &record.reference {
        println!("  note           {}", reference.note);
    }
    println!("  wall time      {:.2} s", record.wall_time_s);
    println!("  report         {}", paths.report.display());
    if let Some(trajectory) = &paths.trajectory {
        println!("  trajectory     {}", trajectory.display());
    }
    exit_code_for_status(&record.status)
}

fn cmd_compare(overrides: &ConfigOverrides) -> i32 {
    let configs = match overrides.resolve_compare() {
        Ok(configs) => configs,
        Err(err) => return fail(&err.into()),
    };
    let comparison = match compare(&configs) {
        Ok(comparison) => comparison,
        Err(err) => return fail(&err),
    };
    let table = render_comparison(&comparison.rows);
    print!("{table}");
    for report in &comparison.reports {
        if let Err(err) = write_report(report) {
            return fail(&err);
        }
    }
    let dir = configs[0].outputs.resolved_dir();
    let table_path = dir.join("compare.txt");
    if let Err(err) = std::fs::write(&table_path, &table) {
        return fail(&err.into());
    }
    println!("table          {}", table_path.display());
    0
}

fn cmd_verify(study: StudyChoice, basis: BasisChoice, out: Option<PathBuf>) -> i32 {
    let outcome = match verify(study, basis) {
        Ok(outcome) => outcome,
        Err(err) => return fail(&err),
    };
    for line in &outcome.lines {
        println!("{line}");
    }
    let dir = out.unwrap_or_else(default_out_dir);
    if let Err(err) = std::fs::create_dir_all(&dir) {
        return fail(&err.into());
    }
    let csv_path = dir.join("study.csv");
    if let Err(err) = std::fs::write(&csv_path, outcome.csv()) {
        return fail(&err.into());
    }
    println!("study table: {}", csv_path.display());
    if outcome.passed {
        0
    } else {
        eprintln!("verification FAILED");
        3
    }
}

fn cmd_export(report_path: &Path, out: &Path) -> i32 {
    let report = match BenchmarkReport::load(report_path) {
        Ok(report) => report,
        Err(err) => return fail(&err.into()),
    };
    match export_trajectory(&report, out) {
        Ok(()) => {
            println!("trajectory     {}", out.display());
            0
        }
        Err(err) => fail(&err),
    }
}
