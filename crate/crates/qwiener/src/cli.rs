//! Command-line front end.
//!
//! Every subcommand writes one JSON report carrying `schema_version`. Exit
//! codes: 0 on success, 2 on a mathematical obstruction (the report then holds
//! the certificate), 1 on input or numerical errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::circle::{self, InverseOptions};
use crate::continuous::factor_continuous;
use crate::error::{Error, Result};
use crate::factorization::{factor_discrete, verify_factorization, FactorOptions, FactorizationResult};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::rational::RationalQMatrix;
use crate::realization::{assemble_realization, canonical_factorize, CanonicalOptions, Realization};
use crate::series::LaurentQSeries;
use crate::solvers::{solve_convolution, solve_difference, ConvolutionOperator, DifferenceOperator, GridFunction};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "qwiener", version, about = "Quaternionic Wiener-Hopf factorization and half-line solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Slice frame as "i=w,x,y,z;j=w,x,y,z" (default i=e1, j=e2).
    #[arg(long)]
    pub frame: Option<String>,
    /// Tolerance (default depends on the subcommand; see its help).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Circle grid size for sampling-based tests [default: 64].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compact single-line JSON instead of pretty-printed.
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Invertibility test of a discrete symbol on the unit circle (tol on min |det|, default 1e-8).
    InvertCheck {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Star-inverse of an invertible discrete symbol (tol on the dropped tail, default 1e-10).
    StarInvert {
        #[arg(long)]
        symbol: PathBuf,
        /// Initial truncation half-width.
        #[arg(long)]
        trunc: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// Wiener-Hopf factorization of a discrete symbol or a proper rational symbol on the line
    /// (tol is the relative residual bound, default 1e-8).
    Factorize {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Canonical factorization from a realization or a rational symbol with value I at infinity (default tol 1e-8).
    CanonicalFactorize {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Realization of a rational symbol with D = F(inf) for proper input, I otherwise.
    Realize {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Half the winding number of det omega(F) on the circle.
    Winding {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve A psi = g for a difference operator (tol on the obstruction, default 1e-8).
    SolveDifference {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        /// Where to write the solution grid as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve B psi = g for a convolution operator with rational symbol (tol on the moments, default 1e-6).
    SolveConvolution {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-verify a discrete factorization report against its symbol (default tol 1e-8).
    Verify {
        #[arg(long)]
        symbol: PathBuf,
        /// Factorization report produced by `factorize`.
        #[arg(long)]
        factors: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::InvertCheck { common, .. }
            | Command::StarInvert { common, .. }
            | Command::Factorize { common, .. }
            | Command::CanonicalFactorize { common, .. }
            | Command::Realize { common, .. }
            | Command::Winding { common, .. }
            | Command::SolveDifference { common, .. }
            | Command::SolveConvolution { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::InvertCheck { .. } => "invert-check",
            Command::StarInvert { .. } => "star-invert",
            Command::Factorize { .. } => "factorize",
            Command::CanonicalFactorize { .. } => "canonical-factorize",
            Command::Realize { .. } => "realize",
            Command::Winding { .. } => "winding",
            Command::SolveDifference { .. } => "solve-difference",
            Command::SolveConvolution { .. } => "solve-convolution",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Parses `"i=w,x,y,z;j=w,x,y,z"`.
pub fn parse_frame(text: &str) -> Result<SliceFrame> {
    let mut i = None;
    let mut j = None;
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidFrame(format!("expected key=w,x,y,z in {part:?}")))?;
        let nums: Vec<f64> = val
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidFrame(format!("{part:?}: {e}")))?;
        let [w, x, y, z] = nums[..] else {
            return Err(Error::InvalidFrame(format!("{part:?} needs four components")));
        };
        let q = Quaternion::new(w, x, y, z);
        match key.trim() {
            "i" => i = Some(q),
            "j" => j = Some(q),
            other => return Err(Error::InvalidFrame(format!("unknown key {other:?}"))),
        }
    }
    match (i, j) {
        (Some(i), Some(j)) => SliceFrame::new(i, j),
        _ => Err(Error::InvalidFrame("both i and j are required".into())),
    }
}

fn frame_json(f: &SliceFrame) -> Value {
    json!({ "i": f.i(), "j": f.j() })
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidInput(format!("--{name} must be positive"))),
        _ => Ok(v),
    }
}

/// A symbol file: discrete series, rational matrix, or realization.
enum SymbolFile {
    Series(LaurentQSeries),
    Rational(RationalQMatrix),
    Realization(Realization),
}

fn read_symbol(path: &Path) -> Result<SymbolFile> {
    let v = read_json(path)?;
    let obj = v.as_object().ok_or_else(|| Error::InvalidInput("symbol file must hold a JSON object".into()))?;
    if obj.contains_key("terms") {
        Ok(SymbolFile::Series(serde_json::from_value(v)?))
    } else if obj.contains_key("num") {
        Ok(SymbolFile::Rational(serde_json::from_value(v)?))
    } else if obj.contains_key("A") {
        Ok(SymbolFile::Realization(serde_json::from_value(v)?))
    } else {
        Err(Error::InvalidInput("unrecognized symbol format".into()))
    }
}

fn read_series(path: &Path) -> Result<LaurentQSeries> {
    match read_symbol(path)? {
        SymbolFile::Series(s) => Ok(s),
        _ => Err(Error::InvalidInput("expected a discrete symbol {\"n\", \"terms\"}".into())),
    }
}

/// Outcome of a subcommand before it is written out.
struct Outcome {
    report: Value,
    obstruction: bool,
}

impl Outcome {
    fn ok(report: impl Serialize) -> Result<Self> {
        Ok(Outcome { report: serde_json::to_value(report)?, obstruction: false })
    }
}

fn obstruction_report(e: &Error) -> Value {
    let certificate = match e {
        Error::NotInvertible { min_modulus } | Error::ObstructionConditionI { min_modulus } => {
            json!({ "min_modulus": min_modulus })
        }
        Error::ObstructionConditionII { defect } => json!({ "defect": defect }),
        _ => Value::Null,
    };
    json!({ "status": "obstruction", "error": e.to_string(), "certificate": certificate })
}

fn execute(cmd: &Command, frame: &SliceFrame) -> Result<Outcome> {
    let common = cmd.common();
    let tol = positive("tol", common.tol)?;
    let grid = common.grid.unwrap_or(64);
    if grid == 0 {
        return Err(Error::InvalidInput("--grid must be positive".into()));
    }
    match cmd {
        Command::InvertCheck { symbol, .. } => {
            let f = read_series(symbol)?;
            let cert = circle::is_invertible(&f, frame, grid, tol.unwrap_or(1e-8))?;
            let obstruction = !cert.invertible;
            Ok(Outcome { report: json!({ "status": if obstruction { "not_invertible" } else { "invertible" }, "certificate": cert }), obstruction })
        }
        Command::StarInvert { symbol, trunc, .. } => {
            if trunc.is_some_and(|t| t <= 0) {
                return Err(Error::InvalidInput("--trunc must be positive".into()));
            }
            let f = read_series(symbol)?;
            let opts = InverseOptions { trunc: *trunc, grid: 0, tol: tol.unwrap_or(1e-10) };
            let inv = circle::star_inverse(&f, frame, opts)?;
            let residual = f.star_mul(&inv)?.sub(&LaurentQSeries::identity(f.n()))?.norm();
            Outcome::ok(json!({ "inverse": inv, "residual": residual }))
        }
        Command::Factorize { symbol, .. } => {
            let opts = FactorOptions { max_residual: tol.unwrap_or(1e-8), ..FactorOptions::default() };
            match read_symbol(symbol)? {
                SymbolFile::Series(f) => {
                    let r = factor_discrete(&f, frame, &opts)?;
                    Outcome::ok(json!({ "kind": "discrete", "factorization": r }))
                }
                SymbolFile::Rational(f) => {
                    let r = factor_continuous(&f, frame, &opts)?;
                    Outcome::ok(json!({ "kind": "continuous", "factorization": r }))
                }
                SymbolFile::Realization(_) => Err(Error::InvalidInput("factorize takes a series or rational symbol".into())),
            }
        }
        Command::CanonicalFactorize { symbol, .. } => {
            let r = match read_symbol(symbol)? {
                SymbolFile::Realization(r) => r,
                SymbolFile::Rational(f) => assemble_realization(&f, &QMatrix::identity(f.n()))?,
                SymbolFile::Series(_) => {
                    return Err(Error::InvalidInput("canonical-factorize takes a realization or rational symbol".into()))
                }
            };
            let opts = CanonicalOptions { tol: tol.unwrap_or(1e-8), ..CanonicalOptions::default() };
            let c = canonical_factorize(&r, frame, &opts)?;
            Outcome::ok(json!({ "realization": r, "factorization": c }))
        }
        Command::Realize { symbol, .. } => {
            let SymbolFile::Rational(f) = read_symbol(symbol)? else {
                return Err(Error::InvalidInput("realize takes a rational symbol".into()));
            };
            let d = if f.is_proper() { f.num().coeff_or_zero(f.den().degree() as i64).scale(1.0 / f.den().leading()) } else { QMatrix::identity(f.n()) };
            let r = assemble_realization(&f, &d)?;
            Outcome::ok(json!({ "realization": r }))
        }
        Command::Winding { symbol, .. } => {
            let f = read_series(symbol)?;
            let k = circle::winding_index(&f, frame, grid)?;
            Outcome::ok(json!({ "winding_index": k }))
        }
        Command::SolveDifference { op, rhs, csv, .. } => {
            let a: DifferenceOperator = serde_json::from_value(read_json(op)?)?;
            let g = GridFunction::read_csv(BufReader::new(File::open(rhs)?))?;
            let rep = solve_difference(&a, &g, frame, tol.unwrap_or(1e-8))?;
            finish_solve(rep, csv.as_deref())
        }
        Command::SolveConvolution { op, rhs, csv, .. } => {
            let b: ConvolutionOperator = serde_json::from_value(read_json(op)?)?;
            let g = GridFunction::read_csv(BufReader::new(File::open(rhs)?))?;
            let rep = solve_convolution(&b, &g, frame, tol.unwrap_or(1e-6))?;
            finish_solve(rep, csv.as_deref())
        }
        Command::Verify { symbol, factors, .. } => {
            let f = read_series(symbol)?;
            let mut v = read_json(factors)?;
            // Accept either a bare factorization or a `factorize` report.
            if let Some(inner) = v.get_mut("factorization") {
                v = inner.take();
            }
            let r: FactorizationResult = serde_json::from_value(v)?;
            let rep = verify_factorization(&f, &r, frame, tol.unwrap_or(1e-8))?;
            let obstruction = !rep.ok;
            Ok(Outcome { report: json!({ "verification": rep }), obstruction })
        }
    }
}

fn finish_solve(rep: crate::solvers::SolveReport, csv: Option<&Path>) -> Result<Outcome> {
    if let (Some(path), Some(sol)) = (csv, rep.solution.as_ref()) {
        sol.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let obstruction = !rep.solvable;
    Ok(Outcome { report: serde_json::to_value(&rep)?, obstruction })
}

fn write_report(common: &Common, report: &Value) -> Result<()> {
    let text = if common.json { serde_json::to_string(report)? } else { serde_json::to_string_pretty(report)? };
    match &common.out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let common = cli.command.common().clone();
    let frame = match common.frame.as_deref().map(parse_frame).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let (body, code) = match execute(&cli.command, &frame) {
        Ok(o) => {
            let code = if o.obstruction { 2 } else { 0 };
            (o.report, code)
        }
        Err(e) if e.is_obstruction() => (obstruction_report(&e), 2),
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut report = json!({ "schema_version": SCHEMA_VERSION, "command": cli.command.name(), "frame": frame_json(&frame) });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        for (k, v) in src {
            dst.entry(k).or_insert(v);
        }
    }
    if let Err(e) = write_report(&common, &report) {
        eprintln!("error: {e}");
        return 1;
    }
    code
}
