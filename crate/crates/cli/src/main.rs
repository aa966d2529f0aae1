//! `w4` — command-line driver for the w4-core solvers.
//!
//! Exit codes: 0 success, 1 usage error, 2 non-convergence or failed check,
//! 3 singular decomposition.

mod json;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use w4_core::types::fmt_float;
use w4_core::{
    basin_stats, builtin, compute_basin, degeneracy_series_check, eigen_trace, run,
    w_spectrum_check, Domain, MethodKind, Preconditioner, SolverConfig, Status,
};

use crate::json::Obj;

const SPECTRUM_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "w4",
    version,
    about = "W4, Newton-Raphson and damped Newton root finders"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one solve and print a JSON summary.
    Solve(SolveArgs),
    /// Iteration-count table for a 1-D problem: one CSV row per method.
    Table(TableArgs),
    /// Basin-of-attraction scan of a 2-D problem (PGM, CSV and JSON stats).
    Basin(BasinArgs),
    /// Spectral and eigen-structure checks.
    Analyze {
        #[command(subcommand)]
        mode: Analyze,
    },
}

#[derive(Args)]
struct SolverOpts {
    /// nr | dn | w4-udl (alias w4) | w4-eigen | dn-eigen
    #[arg(long, value_parser = parse_method)]
    method: MethodKind,
    /// Pseudo-time step [default: 1 for nr, 0.5 otherwise]
    #[arg(long, allow_hyphen_values = true)]
    dtau: Option<f64>,
    /// Convergence threshold on the max-norm residual
    #[arg(long, default_value_t = SolverConfig::DEFAULT_TOL)]
    tol: f64,
    /// Iteration cap [default: 10000; 1000 for basin scans]
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverOpts {
    fn config(&self, default_max_iter: usize) -> Result<SolverConfig> {
        let dtau = self.dtau.unwrap_or(self.method.default_dtau());
        Ok(SolverConfig::new(self.method, dtau)?
            .with_tol(self.tol)?
            .with_max_iter(self.max_iter.unwrap_or(default_max_iter))?)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    solver: SolverOpts,
    /// Initial guess, comma separated
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    x0: Vector,
    /// Write the per-iteration trace as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    problem: String,
    /// Comma-separated method list, one row each
    #[arg(long, value_delimiter = ',', value_parser = parse_method, required = true)]
    methods: Vec<MethodKind>,
    /// Comma-separated initial guesses, one column each
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    x0: Vector,
    /// Step for the damped methods (nr always uses 1) [default: 0.5]
    #[arg(long)]
    dtau: Option<f64>,
    #[arg(long, default_value_t = SolverConfig::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = SolverConfig::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Output file [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasinArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    solver: SolverOpts,
    /// Domain bounds [default: the problem's own domain]
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ymin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ymax: Option<f64>,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    /// Directory for basin.pgm, basin.csv and stats.json (created if missing)
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Analyze {
    /// Eigenvalues of the frozen W4 iteration matrix at a point.
    WSpectrum {
        #[arg(long)]
        problem: String,
        /// Point at which the Jacobian is frozen
        #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
        x: Vector,
        /// udl | eigen | inverse
        #[arg(long, default_value = "udl", value_parser = parse_preconditioner)]
        preconditioner: Preconditioner,
        #[arg(long, default_value_t = 0.5)]
        dtau: f64,
        /// Also write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jacobian eigen-data along a solver run (CSV).
    EigenTrace {
        #[arg(long)]
        problem: String,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
        x0: Vector,
        /// Write the CSV here and print a JSON summary instead
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// fproblem0 eigen-data against its expansion about x = 0.
    Series {
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
        xs: Vector,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Vector = Vec<f64>;

fn parse_vec(s: &str) -> std::result::Result<Vector, String> {
    s.split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a finite number")),
        })
        .collect()
}

fn parse_method(s: &str) -> std::result::Result<MethodKind, String> {
    s.parse().map_err(|e: w4_core::Error| e.to_string())
}

fn parse_preconditioner(s: &str) -> std::result::Result<Preconditioner, String> {
    s.parse().map_err(|e: w4_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Table(a) => cmd_table(a),
        Cmd::Basin(a) => cmd_basin(a),
        Cmd::Analyze { mode } => cmd_analyze(mode),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        // reader went away (`| head`); nothing left to report
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Converged => 0,
        Status::MaxIterExceeded | Status::Diverged => 2,
        Status::SingularDecomposition => 3,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes `text` to `path`, or to standard output when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let problem = builtin(&a.problem)?;
    let config = a.solver.config(SolverConfig::DEFAULT_MAX_ITER)?;
    let result = run(&problem, &config, &a.x0)?;
    if let Some(path) = &a.trace {
        let mut w = create(path)?;
        result.write_trace_csv(&mut w)?;
        w.flush()?;
    }
    let summary = Obj::new()
        .put("status", result.status.as_str())
        .put("iterations", result.iterations)
        .put("final_x", json::floats(&result.final_state.x))
        .num("final_residual", result.final_residual());
    emit(None, &json::to_string(summary))?;
    Ok(status_code(result.status))
}

fn cmd_table(a: TableArgs) -> Result<u8> {
    let problem = builtin(&a.problem)?;
    if problem.dim() != 1 {
        bail!(
            "table needs a 1-D problem, `{}` has dimension {}",
            a.problem,
            problem.dim()
        );
    }
    let mut csv = String::from("method");
    for x in &a.x0 {
        csv.push(',');
        csv.push_str(&fmt_float(*x));
    }
    csv.push('\n');
    for &m in &a.methods {
        let dtau = match m {
            MethodKind::Nr => 1.0,
            _ => a.dtau.unwrap_or(m.default_dtau()),
        };
        let config = SolverConfig::new(m, dtau)?
            .with_tol(a.tol)?
            .with_max_iter(a.max_iter)?;
        csv.push_str(m.as_str());
        for &x in &a.x0 {
            let r = w4_core::run_untraced(&problem, &config, &[x])?;
            csv.push(',');
            if r.status == Status::Converged {
                csv.push_str(&r.iterations.to_string());
            } else {
                csv.push_str("inf");
            }
        }
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)?;
    Ok(0)
}

fn cmd_basin(a: BasinArgs) -> Result<u8> {
    let problem = builtin(&a.problem)?;
    let config = a.solver.config(SolverConfig::BASIN_MAX_ITER)?;
    let d = Domain::of(&problem)?;
    let domain = Domain::new(
        a.xmin.unwrap_or(d.x.0),
        a.xmax.unwrap_or(d.x.1),
        a.ymin.unwrap_or(d.y.0),
        a.ymax.unwrap_or(d.y.1),
    )?;
    if a.nx == 0 || a.ny == 0 {
        bail!("grid needs at least one cell per axis");
    }
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;

    let grid = compute_basin(&problem, &config, domain, a.nx, a.ny)?;
    let mut w = create(&a.out_dir.join("basin.pgm"))?;
    grid.write_pgm(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("basin.csv"))?;
    grid.write_csv(&mut w)?;
    w.flush()?;

    let s = basin_stats(&grid);
    let report = Obj::new()
        .put("problem", problem.name())
        .put("method", config.method().as_str())
        .num("dtau", config.dtau())
        .num("tol", config.tol())
        .put("max_iter", config.max_iter())
        .put(
            "domain",
            Obj::new()
                .num("xmin", domain.x.0)
                .num("xmax", domain.x.1)
                .num("ymin", domain.y.0)
                .num("ymax", domain.y.1),
        )
        .put("nx", a.nx)
        .put("ny", a.ny)
        .put("cells", s.cells)
        .num("unconverged_fraction", s.unconverged_fraction)
        .num("unregistered_fraction", s.unregistered_fraction)
        .put("root_fractions", json::floats(&s.root_fractions))
        .put(
            "mean_iterations",
            s.mean_iterations.map_or(Value::Null, json::float),
        );
    let text = json::to_string(report);
    emit(Some(&a.out_dir.join("stats.json")), &text)?;
    emit(None, &text)?;
    Ok(0)
}

fn cmd_analyze(mode: Analyze) -> Result<u8> {
    match mode {
        Analyze::WSpectrum {
            problem,
            x,
            preconditioner,
            dtau,
            out,
        } => {
            let p = builtin(&problem)?;
            if x.len() != p.dim() {
                bail!(
                    "--x has {} components, `{problem}` needs {}",
                    x.len(),
                    p.dim()
                );
            }
            let s = w_spectrum_check(&p.jacobian(&x), preconditioner, dtau)?;
            let passed = s.max_deviation < SPECTRUM_TOL;
            let eigenvalues: Vec<Value> = s
                .eigenvalues
                .iter()
                .map(|l| Value::Array(vec![json::float(l.re), json::float(l.im)]))
                .collect();
            let report = Obj::new()
                .put("problem", p.name())
                .put("x", json::floats(&x))
                .put("preconditioner", preconditioner.as_str())
                .num("dtau", dtau)
                .num("expected", 1.0 - dtau)
                .put("eigenvalues", eigenvalues)
                .num("max_deviation", s.max_deviation)
                .num("tolerance", SPECTRUM_TOL)
                .put("passed", passed);
            let text = json::to_string(report);
            if let Some(path) = &out {
                emit(Some(path), &text)?;
            }
            emit(None, &text)?;
            Ok(if passed { 0 } else { 2 })
        }
        Analyze::EigenTrace {
            problem,
            solver,
            x0,
            out,
        } => {
            let p = builtin(&problem)?;
            let t = eigen_trace(&p, &solver.config(SolverConfig::DEFAULT_MAX_ITER)?, &x0)?;
            let mut csv = Vec::new();
            t.write_csv(&mut csv)?;
            match &out {
                None => io::stdout().lock().write_all(&csv)?,
                Some(path) => {
                    fs::write(path, &csv)
                        .with_context(|| format!("cannot write {}", path.display()))?;
                    let last = t.records.last();
                    let summary = Obj::new()
                        .put("status", t.status.as_str())
                        .put("iterations", t.iterations)
                        .put("final_x", json::floats(&t.final_state.x))
                        .put("records", t.records.len())
                        .put(
                            "final_ratio",
                            last.map_or(Value::Null, |r| json::float(r.ratio)),
                        );
                    emit(None, &json::to_string(summary))?;
                }
            }
            Ok(0)
        }
        Analyze::Series { y, xs, out } => {
            let s = degeneracy_series_check(y, &xs)?;
            let names = ["lambda_plus", "lambda_minus", "c_plus", "c_minus"];
            let rows: Vec<Value> = s
                .rows
                .iter()
                .map(|r| {
                    let mut o = Obj::new().num("x", r.x).num("bound", r.bound);
                    for (k, name) in names.iter().enumerate() {
                        o = o.num(name, r.deviations[k]);
                    }
                    o.put("passed", r.passes().iter().all(|&b| b)).into()
                })
                .collect();
            let max = s.max_deviations();
            let mut maxima = Obj::new();
            for (k, name) in names.iter().enumerate() {
                maxima = maxima.num(name, max[k]);
            }
            let report = Obj::new()
                .num("y", s.y)
                .num("c", w4_core::analysis::SERIES_C)
                .put("rows", rows)
                .put("max_deviations", maxima)
                .put("eigenvalues_pass", s.eigenvalues_pass())
                .put("coefficients_pass", s.coefficients_pass())
                .put("passed", s.passed());
            let text = json::to_string(report);
            if let Some(path) = &out {
                emit(Some(path), &text)?;
            }
            emit(None, &text)?;
            Ok(if s.passed() { 0 } else { 2 })
        }
    }
}
