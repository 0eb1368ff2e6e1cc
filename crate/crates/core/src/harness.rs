//! Benchmark harness: dispatches solver runs, assembles comparison tables
//! and writes per-step traces.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{solve_broyden_good, solve_damped_newton, solve_newton};
use crate::problems::{registry, table_cases, ProblemId, UnknownProblem};
use crate::smallmat::{Mat2, ThresholdMode, Vec2};
use crate::w4::{
    solve_w4_generic, solve_w4sv, ConfigError, Preconditioners, SolveReport, SolveStatus, TraceRow,
    W4Config,
};

/// Header of the trace CSV.
pub const TRACE_HEADER: &str = "step,x,y,sigma_ratio,f_norm_sq,err_metric";

/// Iteration cap above which a successful run is shown as "△".
pub const TABLE_MAX_ITER: usize = 1_000_000;

/// Δτ columns of the W4SV comparison table.
pub const DTAU_SWEEP: [f64; 5] = [1.0, 0.9, 0.8, 0.7, 0.5];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    UnknownProblem(#[from] UnknownProblem),
    #[error("unknown solver '{0}'")]
    UnknownSolver(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "NR")]
    Newton,
    #[serde(rename = "dNR")]
    DampedNewton,
    Broyden,
    W4SV,
    /// The W4 map with unit preconditioners `X = Y = I`.
    W4Generic,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Newton,
        SolverKind::DampedNewton,
        SolverKind::Broyden,
        SolverKind::W4SV,
        SolverKind::W4Generic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Newton => "NR",
            SolverKind::DampedNewton => "dNR",
            SolverKind::Broyden => "Broyden",
            SolverKind::W4SV => "W4SV",
            SolverKind::W4Generic => "W4Generic",
        }
    }

    /// Whether the solver's behaviour depends on Δτ.
    pub fn uses_dtau(self) -> bool {
        self != SolverKind::Newton
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(
            match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
                "nr" | "newton" => SolverKind::Newton,
                "dnr" | "dampednewton" => SolverKind::DampedNewton,
                "broyden" | "qn" | "goodbroyden" => SolverKind::Broyden,
                "w4sv" => SolverKind::W4SV,
                "w4generic" | "w4" => SolverKind::W4Generic,
                _ => return Err(HarnessError::UnknownSolver(s.to_string())),
            },
        )
    }
}

/// One solver run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: ProblemId,
    pub solver: SolverKind,
    pub dtau: f64,
    pub x0: Vec2,
    pub max_iter: usize,
    pub tol: f64,
    pub threshold_mode: ThresholdMode,
}

impl RunSpec {
    pub fn new(problem: ProblemId, solver: SolverKind, dtau: f64, x0: Vec2) -> Self {
        RunSpec {
            problem,
            solver,
            dtau,
            x0,
            max_iter: TABLE_MAX_ITER,
            tol: 1e-8,
            threshold_mode: ThresholdMode::Relative,
        }
    }

    pub fn config(&self) -> W4Config {
        W4Config {
            dtau: self.dtau,
            max_iter: self.max_iter,
            tol: self.tol,
            threshold_mode: self.threshold_mode,
            ..Default::default()
        }
    }
}

fn unit_preconditioners(_: &Mat2) -> Preconditioners {
    Preconditioners {
        x: Mat2::IDENTITY,
        y: Mat2::IDENTITY,
    }
}

/// Runs one case. Deterministic in `spec`.
pub fn run_case(spec: &RunSpec) -> Result<SolveReport, HarnessError> {
    let mut cfg = spec.config();
    if !spec.solver.uses_dtau() {
        cfg.dtau = 1.0;
    }
    cfg.validate()?;
    let problem = registry(spec.problem);
    Ok(match spec.solver {
        SolverKind::Newton => solve_newton(problem, spec.x0, &cfg),
        SolverKind::DampedNewton => solve_damped_newton(problem, spec.x0, &cfg),
        SolverKind::Broyden => solve_broyden_good(problem, spec.x0, &cfg),
        SolverKind::W4SV => solve_w4sv(problem, spec.x0, &cfg),
        SolverKind::W4Generic => solve_w4_generic(problem, spec.x0, &cfg, unit_preconditioners),
    })
}

/// Content of one table cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TableCell {
    Count(usize),
    /// Diverged or aborted on a singular matrix.
    Failed,
    /// Hit the 10⁶ iteration cap.
    Exceeded,
    /// Hit a smaller, user-chosen iteration cap.
    Capped(usize),
    Error(String),
}

impl TableCell {
    pub fn from_report(report: &SolveReport, max_iter: usize) -> Self {
        match report.status {
            SolveStatus::Converged => TableCell::Count(report.iterations),
            SolveStatus::Diverged | SolveStatus::SingularAbort => TableCell::Failed,
            SolveStatus::MaxIterExceeded if max_iter == TABLE_MAX_ITER => TableCell::Exceeded,
            SolveStatus::MaxIterExceeded => TableCell::Capped(max_iter),
        }
    }

    pub fn count(&self) -> Option<usize> {
        match self {
            TableCell::Count(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for TableCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableCell::Count(n) => write!(f, "{n}"),
            TableCell::Failed => f.write_str("*"),
            TableCell::Exceeded => f.write_str("△"),
            TableCell::Capped(n) => write!(f, ">{n}"),
            TableCell::Error(e) => write!(f, "error: {e}"),
        }
    }
}

/// A table column: one solver at one Δτ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ColumnSpec {
    pub solver: SolverKind,
    pub dtau: f64,
}

impl ColumnSpec {
    pub fn label(&self) -> String {
        format!("{}@{}", self.solver, self.dtau)
    }
}

/// A solver selection, optionally pinned to one Δτ (`"W4SV@0.5"`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSelection {
    pub solver: SolverKind,
    pub dtau: Option<f64>,
}

impl FromStr for SolverSelection {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, dtau) = match s.split_once('@') {
            Some((n, d)) => {
                let d = d
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| HarnessError::Usage(format!("bad dtau in '{s}'")))?;
                (n, Some(d))
            }
            None => (s, None),
        };
        Ok(SolverSelection {
            solver: name.trim().parse()?,
            dtau,
        })
    }
}

/// Expands solver selections into table columns. Solvers without a pinned
/// Δτ get one column per entry of `dtaus`; plain Newton always gets a single
/// column at Δτ = 1.
pub fn expand_columns(
    selections: &[SolverSelection],
    dtaus: &[f64],
) -> Result<Vec<ColumnSpec>, HarnessError> {
    if selections.is_empty() {
        return Err(HarnessError::Usage("no solvers selected".into()));
    }
    let mut columns = Vec::new();
    for sel in selections {
        match (sel.solver.uses_dtau(), sel.dtau) {
            (false, _) => columns.push(ColumnSpec {
                solver: sel.solver,
                dtau: 1.0,
            }),
            (true, Some(d)) => columns.push(ColumnSpec {
                solver: sel.solver,
                dtau: d,
            }),
            (true, None) if dtaus.is_empty() => {
                return Err(HarnessError::Usage(format!(
                    "solver {} needs at least one dtau",
                    sel.solver
                )))
            }
            (true, None) => columns.extend(dtaus.iter().map(|&d| ColumnSpec {
                solver: sel.solver,
                dtau: d,
            })),
        }
    }
    for c in &columns {
        W4Config::with_dtau(c.dtau).validate()?;
    }
    Ok(columns)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub threshold_mode: ThresholdMode,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            max_iter: TABLE_MAX_ITER,
            tol: 1e-8,
            threshold_mode: ThresholdMode::Relative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub problem: ProblemId,
    pub x0: Vec2,
    pub cells: Vec<TableCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableDocument {
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<TableRow>,
}

/// Runs every `(problem, start)` of the comparison tables against every
/// column. Cells are computed in parallel; the layout follows table order.
pub fn run_table(columns: &[ColumnSpec], opts: &TableOptions) -> TableDocument {
    let cases = table_cases();
    let jobs: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|r| (0..columns.len()).map(move |c| (r, c)))
        .collect();
    let cells: Vec<TableCell> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let (problem, x0) = cases[r];
            let spec = RunSpec {
                problem,
                solver: columns[c].solver,
                dtau: columns[c].dtau,
                x0,
                max_iter: opts.max_iter,
                tol: opts.tol,
                threshold_mode: opts.threshold_mode,
            };
            match run_case(&spec) {
                Ok(report) => TableCell::from_report(&report, opts.max_iter),
                Err(e) => TableCell::Error(e.to_string()),
            }
        })
        .collect();
    let mut cells = cells.into_iter();
    let rows = cases
        .iter()
        .map(|&(problem, x0)| TableRow {
            problem,
            x0,
            cells: cells.by_ref().take(columns.len()).collect(),
        })
        .collect();
    TableDocument {
        columns: columns.to_vec(),
        rows,
    }
}

fn start_label(x0: Vec2) -> String {
    format!("({},{})", x0.e0, x0.e1)
}

impl TableDocument {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["problem".to_string(), "x0".to_string()];
        h.extend(self.columns.iter().map(ColumnSpec::label));
        h
    }

    fn body(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                let mut r = vec![row.problem.name().to_string(), start_label(row.x0)];
                r.extend(row.cells.iter().map(ToString::to_string));
                r
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in self.body() {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Space-aligned plain text.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let body = self.body();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                std::iter::once(&header)
                    .chain(&body)
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for r in std::iter::once(&header).chain(&body) {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, &w))| {
                    let pad = w - s.chars().count();
                    if c < 2 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialises")
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a trace as CSV with 17 significant digits per value.
pub fn write_trace<W: Write>(rows: &[TraceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(r.sigma_ratio),
            fmt_f64(r.f_norm_sq),
            fmt_f64(r.err_metric)
        )?;
    }
    out.flush()
}

/// Writes the trace of `report` to `path`.
pub fn emit_trace(report: &SolveReport, path: &Path) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_trace(&report.trace, BufWriter::new(file)).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_parse() {
        for s in SolverKind::ALL {
            assert_eq!(s.label().parse::<SolverKind>().unwrap(), s);
        }
        assert!(matches!(
            "simplex".parse::<SolverKind>(),
            Err(HarnessError::UnknownSolver(_))
        ));
        let sel: SolverSelection = "W4SV@0.5".parse().unwrap();
        assert_eq!(sel.solver, SolverKind::W4SV);
        assert_eq!(sel.dtau, Some(0.5));
        assert!("W4SV@x".parse::<SolverSelection>().is_err());
    }

    #[test]
    fn cell_display() {
        assert_eq!(TableCell::Count(58).to_string(), "58");
        assert_eq!(TableCell::Failed.to_string(), "*");
        assert_eq!(TableCell::Exceeded.to_string(), "△");
        assert_eq!(TableCell::Capped(100).to_string(), ">100");
    }

    #[test]
    fn cell_from_status() {
        let mut r = SolveReport {
            status: SolveStatus::MaxIterExceeded,
            iterations: 10,
            final_x: Vec2::ZERO,
            trace: vec![],
            message: None,
        };
        assert_eq!(
            TableCell::from_report(&r, TABLE_MAX_ITER),
            TableCell::Exceeded
        );
        assert_eq!(TableCell::from_report(&r, 10), TableCell::Capped(10));
        r.status = SolveStatus::SingularAbort;
        assert_eq!(TableCell::from_report(&r, 10), TableCell::Failed);
        r.status = SolveStatus::Diverged;
        assert_eq!(TableCell::from_report(&r, 10), TableCell::Failed);
        r.status = SolveStatus::Converged;
        assert_eq!(TableCell::from_report(&r, 10), TableCell::Count(10));
    }

    #[test]
    fn column_expansion() {
        let sels: Vec<SolverSelection> = ["NR", "dNR", "W4SV"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let cols = expand_columns(&sels, &DTAU_SWEEP).unwrap();
        assert_eq!(cols.len(), 11);
        assert_eq!(cols[0].label(), "NR@1");
        assert_eq!(cols[10].label(), "W4SV@0.5");

        let only_w4 = ["W4SV".parse().unwrap()];
        assert!(matches!(
            expand_columns(&only_w4, &[]),
            Err(HarnessError::Usage(_))
        ));
        let pinned = ["W4SV@0.5".parse().unwrap()];
        assert_eq!(expand_columns(&pinned, &[]).unwrap().len(), 1);
        let bad = ["W4SV@1.5".parse().unwrap()];
        assert!(matches!(
            expand_columns(&bad, &[]),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn run_case_rejects_bad_dtau() {
        let spec = RunSpec::new(
            ProblemId::Powell,
            SolverKind::W4SV,
            0.0,
            Vec2::new(0.0, 1.0),
        );
        assert!(matches!(run_case(&spec), Err(HarnessError::Config(_))));
        // Newton ignores Δτ entirely.
        let spec = RunSpec::new(
            ProblemId::Powell,
            SolverKind::Newton,
            0.0,
            Vec2::new(0.0, 1.0),
        );
        assert_eq!(run_case(&spec).unwrap().iterations, 12);
    }

    #[test]
    fn trace_csv_format() {
        let rows = [TraceRow {
            step: 0,
            x: 0.0,
            y: 1.0,
            sigma_ratio: 0.5,
            f_norm_sq: 2.0,
            err_metric: 1.0,
        }];
        let mut buf = Vec::new();
        write_trace(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(
            lines.next(),
            Some(
                "0,0.0000000000000000e0,1.0000000000000000e0,5.0000000000000000e-1,\
                 2.0000000000000000e0,1.0000000000000000e0"
            )
        );
    }

    #[test]
    fn emit_trace_reports_path_on_failure() {
        let report = run_case(&RunSpec::new(
            ProblemId::Rosenbrock,
            SolverKind::W4SV,
            1.0,
            Vec2::new(-1.2, 1.0),
        ))
        .unwrap();
        let err = emit_trace(&report, Path::new("/nonexistent-dir/trace.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/trace.csv"));
    }
}
