use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use w4sv::analysis::run_spectral_suite;
use w4sv::harness::{
    emit_trace, expand_columns, run_case, run_table, write_trace, HarnessError, RunSpec,
    SolverSelection, TableOptions, DTAU_SWEEP, TABLE_MAX_ITER,
};
use w4sv::{registry, ProblemId, ThresholdMode, Vec2};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;

#[derive(Parser)]
#[command(name = "w4sv", version, about = "W4SV root finder benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteration counts for every benchmark start, one column per solver and Δτ.
    Table {
        /// Comma-separated solvers, each optionally pinned as `solver@dtau`.
        #[arg(long, default_value = "NR,dNR@0.5,Broyden@0.5,W4SV")]
        solver: String,
        /// Comma-separated Δτ values for solvers without a pinned Δτ.
        #[arg(long)]
        dtau: Option<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Runs a single case.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "W4SV")]
        solver: String,
        #[arg(long, default_value_t = 0.5)]
        dtau: f64,
        /// Starting point `a,b`; defaults to the problem's first table start.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Writes the per-step trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Runs the spectral checks on random Jacobians.
    Verify {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = TABLE_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Mode::Relative)]
    threshold_mode: Mode,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Relative,
    Absolute,
}

impl From<Mode> for ThresholdMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Relative => ThresholdMode::Relative,
            Mode::Absolute => ThresholdMode::Absolute,
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io { .. } => Failure::Io(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Io(anyhow::Error::new(e).context("writing to stdout"))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| usage(format!("invalid {what} '{t}'")))
        })
        .collect()
}

fn parse_point(s: &str) -> Result<Vec2, Failure> {
    let v: Vec<f64> = parse_list(s, "coordinate")?;
    match v[..] {
        [a, b] => Ok(Vec2::new(a, b)),
        _ => Err(usage(format!(
            "--x0 expects two comma-separated numbers, got '{s}'"
        ))),
    }
}

fn table(solver: &str, dtau: Option<&str>, common: &Common, format: Format) -> Result<(), Failure> {
    let selections: Vec<SolverSelection> = solver
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let dtaus = match dtau {
        Some(s) => parse_list(s, "dtau")?,
        None => DTAU_SWEEP.to_vec(),
    };
    let columns = expand_columns(&selections, &dtaus)?;
    let opts = TableOptions {
        max_iter: common.max_iter,
        tol: common.tol,
        threshold_mode: common.threshold_mode.into(),
    };
    let doc = run_table(&columns, &opts);
    let text = match format {
        Format::Csv => doc.to_csv(),
        Format::Text => doc.to_text(),
        Format::Json => doc.to_json() + "\n",
    };
    io::stdout().write_all(text.as_bytes()).map_err(io_failure)
}

#[allow(clippy::too_many_arguments)]
fn run(
    problem: &str,
    solver: &str,
    dtau: f64,
    x0: Option<&str>,
    common: &Common,
    trace: Option<&PathBuf>,
    format: Format,
) -> Result<(), Failure> {
    let id: ProblemId = problem.parse().map_err(HarnessError::from)?;
    let sel: SolverSelection = solver.parse()?;
    let x0 = match x0 {
        Some(s) => parse_point(s)?,
        None => registry(id).table_starts[0],
    };
    let spec = RunSpec {
        problem: id,
        solver: sel.solver,
        dtau: sel.dtau.unwrap_or(dtau),
        x0,
        max_iter: common.max_iter,
        tol: common.tol,
        threshold_mode: common.threshold_mode.into(),
    };
    let report = run_case(&spec)?;
    if let Some(path) = trace {
        emit_trace(&report, path)?;
    }
    let mut out = io::stdout().lock();
    match format {
        Format::Json => {
            let s = serde_json::to_string_pretty(&report).expect("report serialises");
            writeln!(out, "{s}").map_err(io_failure)
        }
        Format::Csv => write_trace(&report.trace, out).map_err(io_failure),
        Format::Text => {
            let metric = report.final_metric().unwrap_or(f64::NAN);
            writeln!(
                out,
                "problem={} solver={} dtau={} x0={}\nstatus={:?} iterations={} x={} metric={:e}",
                id,
                spec.solver,
                spec.dtau,
                x0,
                report.status,
                report.iterations,
                report.final_x,
                metric
            )
            .map_err(io_failure)?;
            if let Some(m) = &report.message {
                writeln!(out, "note: {m}").map_err(io_failure)?;
            }
            Ok(())
        }
    }
}

fn verify(samples: usize, seed: u64) -> Result<bool, Failure> {
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let outcomes = run_spectral_suite(samples, seed);
    let mut out = io::stdout().lock();
    let mut all = true;
    for o in &outcomes {
        all &= o.ok();
        writeln!(
            out,
            "{} {}: {}/{}",
            if o.ok() { "PASS" } else { "FAIL" },
            o.name,
            o.passed,
            o.total
        )
        .map_err(io_failure)?;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Table {
            solver,
            dtau,
            common,
            format,
        } => table(solver, dtau.as_deref(), common, *format).map(|_| true),
        Command::Run {
            problem,
            solver,
            dtau,
            x0,
            common,
            trace,
            format,
        } => run(
            problem,
            solver,
            *dtau,
            x0.as_deref(),
            common,
            trace.as_ref(),
            *format,
        )
        .map(|_| true),
        Command::Verify { samples, seed } => verify(*samples, *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("-1.2, 1").ok(), Some(Vec2::new(-1.2, 1.0)));
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("a,b").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
