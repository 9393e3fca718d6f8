use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crc_core::dga::{verify_suite, Suite};
use crc_core::expr::{
    is_identically_zero, parse, DomainBox, Point, Reality, Variable, VariableTable, ZeroTest, ZeroVerdict,
};
use crc_core::model::{numeric_adjoint_check, verify_adjoint_transforms, verify_structure_equations};
use crc_core::report::{Check, Report, Status};
use crc_core::tube::{self, Sampling};
use num_complex::Complex64;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "crc",
    version,
    about = "Verifier for the rank-1 degenerate CR structure computations"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Seed for every sampled check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sample points per numeric check.
    #[arg(long, global = true, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Relative tolerance of numeric checks.
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive_f64)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Drop wall-clock timings, making reports byte-identical across runs.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// The flat model: structure equations and adjoint tables.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Identities of the abstract structure equations.
    Dga {
        #[command(subcommand)]
        action: DgaAction,
    },
    /// Tube hypersurfaces over a Monge-Ampere solution.
    Tube {
        #[command(subcommand)]
        action: TubeAction,
    },
    /// Scalar expression utilities.
    Expr {
        #[command(subcommand)]
        action: ExprAction,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    Verify,
}

#[derive(Subcommand)]
enum DgaAction {
    Verify {
        /// shifts, equivariance or cartan.
        #[arg(long)]
        suite: Suite,
    },
}

const DEFAULT_BOX: &str = "t1=0.1:1,t2=0.1:1";

#[derive(Subcommand)]
enum TubeAction {
    /// Full pipeline for a defining function ρ(t1, t2).
    Analyze {
        #[arg(long)]
        rho: String,
        #[arg(long = "box", default_value = DEFAULT_BOX)]
        domain: String,
    },
    /// The bundled solution with its closed-form final coefficient.
    #[command(name = "paper-example", alias = "example")]
    Example,
    /// ρ = t2·g(t1/t2) for a profile g(s).
    Profile {
        #[arg(long)]
        g: String,
        #[arg(long = "box", default_value = DEFAULT_BOX)]
        domain: String,
    },
}

#[derive(Subcommand)]
enum ExprAction {
    /// Evaluate at a point, e.g. `--at x=0.5,z=1+2i`.
    Eval {
        expr: String,
        #[arg(long)]
        at: String,
        #[command(flatten)]
        vars: VarArgs,
    },
    /// Partial derivative.
    Diff {
        expr: String,
        #[arg(long)]
        var: String,
        #[command(flatten)]
        vars: VarArgs,
    },
    /// Exact, then seeded numeric, zero test on a box.
    Zero {
        expr: String,
        #[arg(long = "box")]
        domain: String,
        #[command(flatten)]
        vars: VarArgs,
    },
}

#[derive(Args)]
struct VarArgs {
    /// Declarations `name[:real|imaginary|positive|unit]` or
    /// `name:complex=partner`; by default the names bound by `--at` or
    /// `--box` are declared real.
    #[arg(long)]
    vars: Option<String>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

/// An input the user must fix; reported on stderr with exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn declare(spec: &str) -> Result<VariableTable, InputError> {
    let mut table = VariableTable::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, kind) = item.split_once(':').unwrap_or((item, "real"));
        let reality = match kind {
            "real" => Reality::Real,
            "imaginary" => Reality::Imaginary,
            "positive" => Reality::PositiveReal,
            "unit" => Reality::UnitModulus,
            _ => match kind.strip_prefix("complex=") {
                Some(partner) => {
                    table.declare_pair(name, partner)?;
                    continue;
                }
                None => return Err(InputError(format!("unknown variable kind `{kind}` for `{name}`"))),
            },
        };
        table.declare(Variable::new(name, reality))?;
    }
    Ok(table)
}

fn table_for(vars: &VarArgs, bound: &[&str]) -> Result<VariableTable, InputError> {
    match &vars.vars {
        Some(spec) => declare(spec),
        None if bound.is_empty() => declare("t1,t2"),
        None => declare(&bound.join(",")),
    }
}

fn assignments(at: &str) -> Result<Vec<(&str, Complex64)>, InputError> {
    at.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| InputError(format!("expected `name=value`, found `{item}`")))?;
            let z: Complex64 = value
                .trim()
                .parse()
                .map_err(|_| InputError(format!("`{value}` is not a number")))?;
            Ok((name.trim(), z))
        })
        .collect()
}

fn sampling(run: &RunArgs) -> Sampling {
    Sampling {
        seed: run.seed,
        trials: run.trials as usize,
        tol: run.tol,
    }
}

fn complex_json(z: Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

fn expr_report(action: &ExprAction, run: &RunArgs) -> Result<Report, InputError> {
    match action {
        ExprAction::Eval { expr, at, vars } => {
            let values = assignments(at)?;
            let names: Vec<&str> = values.iter().map(|(n, _)| *n).collect();
            let table = table_for(vars, &names)?;
            let e = parse(expr, &table)?;
            let mut point = Point::new();
            for (name, z) in &values {
                let v = table
                    .get(name)
                    .ok_or_else(|| InputError(format!("undeclared variable `{name}`")))?;
                point.bind_pair(v, *z)?;
            }
            let z = e.evaluate(&point)?;
            let mut report = Report::new("expr-eval", json!({ "expr": expr, "at": at }));
            report.push(Check::new("eval", Status::Pass, json!({ "value": complex_json(z) })));
            Ok(report)
        }
        ExprAction::Diff { expr, var, vars } => {
            let table = table_for(vars, &[var])?;
            if !table.contains(var) {
                return Err(InputError(format!("undeclared variable `{var}`")));
            }
            let e = parse(expr, &table)?;
            let mut report = Report::new("expr-diff", json!({ "expr": expr, "var": var }));
            report.push(Check::new(
                "diff",
                Status::Pass,
                json!({ "derivative": e.differentiate(var).to_string() }),
            ));
            Ok(report)
        }
        ExprAction::Zero { expr, domain, vars } => {
            let domain = DomainBox::parse(domain)?;
            let names: Vec<&str> = domain.intervals.keys().map(String::as_str).collect();
            let table = table_for(vars, &names)?;
            let e = parse(expr, &table)?;
            let config = json!({ "expr": expr, "box": domain.intervals, "seed": run.seed, "trials": run.trials, "tol": run.tol });
            let mut report = Report::new("expr-zero", config);
            let (status, method) = if e.is_zero_exact() {
                (Status::Pass, "exact")
            } else {
                let test = ZeroTest::new(domain)
                    .seed(run.seed)
                    .trials(run.trials as usize)
                    .tol(run.tol);
                let status = match is_identically_zero(&e, &test)? {
                    ZeroVerdict::Zero => Status::Pass,
                    ZeroVerdict::NonZero => Status::Fail,
                    ZeroVerdict::Inconclusive => Status::Inconclusive,
                };
                (status, "sampled")
            };
            report.push(Check::new("zero", status, json!({ "method": method })));
            Ok(report)
        }
    }
}

fn model_report(run: &RunArgs) -> Report {
    let mut report = Report::new("model", json!({ "seed": run.seed, "trials": run.trials }));
    report.extend(verify_structure_equations());
    report.extend(verify_adjoint_transforms());
    report.push(numeric_adjoint_check(run.trials as usize, run.seed, 1e-12));
    report
}

/// Runs the subcommand and returns its report as JSON together with the
/// overall status.
fn dispatch(cli: &Cli) -> Result<(Value, Status), InputError> {
    let run = &cli.run;
    let plain = |r: Report| {
        let r = if run.no_timing { r.without_timing() } else { r };
        let status = r.overall;
        (serde_json::to_value(r).expect("reports serialize"), status)
    };
    let tube = |a: tube::TubeAnalysis| {
        let a = if run.no_timing { a.without_timing() } else { a };
        let status = a.report.overall;
        (serde_json::to_value(a).expect("reports serialize"), status)
    };
    Ok(match &cli.command {
        Command::Model {
            action: ModelAction::Verify,
        } => plain(model_report(run)),
        Command::Dga {
            action: DgaAction::Verify { suite },
        } => plain(verify_suite(*suite)),
        Command::Tube { action } => match action {
            TubeAction::Analyze { rho, domain } => tube(tube::analyze(rho, DomainBox::parse(domain)?, sampling(run))?),
            TubeAction::Example => tube(tube::bundled_example(sampling(run))?),
            TubeAction::Profile { g, domain } => tube(tube::profile(g, DomainBox::parse(domain)?, sampling(run))?),
        },
        Command::Expr { action } => plain(expr_report(action, run)?),
    })
}

fn status_word(v: &Value) -> &str {
    v.as_str().unwrap_or("?")
}

fn render_text(report: &Value) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {}: {}",
        report["suite"].as_str().unwrap_or("report"),
        report["version"].as_str().unwrap_or(""),
        status_word(&report["overall"])
    );
    for c in report["checks"].as_array().into_iter().flatten() {
        let _ = writeln!(
            s,
            "  {:<13} {}  {}",
            status_word(&c["status"]),
            c["name"].as_str().unwrap_or(""),
            c["details"]
        );
    }
    if let Some(v) = report.get("verdict").filter(|v| !v.is_null()) {
        let line = v.get("message").or_else(|| v.get("reason")).unwrap_or(v);
        let _ = writeln!(
            s,
            "verdict: {}",
            line.as_str().map(str::to_string).unwrap_or_else(|| line.to_string())
        );
    }
    s
}

fn exit_code(status: Status) -> u8 {
    match status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Inconclusive => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, status) = match dispatch(&cli) {
        Ok(r) => r,
        Err(InputError(message)) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    let text = match cli.run.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        Format::Text => render_text(&report),
    };
    match &cli.run.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(exit_code(status))
}
