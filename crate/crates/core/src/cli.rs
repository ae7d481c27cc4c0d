//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 verification
//! failure.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::entanglement::{avg_cost, e_alpha, threshold_theta};
use crate::error::Error;
use crate::model::{delta, det_e3, optimum, tr_e3, ProtocolParams};
use crate::protocol::{monte_carlo, InputSpec, RunMode};
use crate::verify::{self, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Significant digits used for every number the CLI prints.
pub const SIG_DIGITS: usize = 12;

/// Header of the sweep CSV.
pub const SWEEP_HEADER: &str = "theta_rad,alpha_rad,case,x,y,p_max,e_alpha,avg_cost";

/// Shortest `%g`-style rendering of `v` with `digits` significant digits.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `v` rounded to [`SIG_DIGITS`]; non-finite values become JSON `null`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        let r: f64 = fmt_sig(v, SIG_DIGITS).parse().expect("round trip");
        json!(r)
    } else {
        Value::Null
    }
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// An angle given in radians (`0.7853`) or as a multiple of π (`0.25pi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleArg(pub f64);

impl FromStr for AngleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let pi_multiple = t.strip_suffix("pi").or_else(|| t.strip_suffix('π'));
        let value = match pi_multiple {
            Some(coef) => {
                let coef = coef.trim().trim_end_matches('*').trim();
                let c = match coef {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    c => c.parse::<f64>().map_err(|_| format!("invalid angle `{s}`"))?,
                };
                c * PI
            }
            None => t.parse::<f64>().map_err(|_| format!("invalid angle `{s}`"))?,
        };
        if !value.is_finite() {
            return Err(format!("invalid angle `{s}`"));
        }
        Ok(AngleArg(value))
    }
}

impl fmt::Display for AngleArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_sig(self.0, SIG_DIGITS))
    }
}

/// `start:stop:count` with both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArg {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("grid `{s}` must look like start:stop:count"));
        };
        let count: usize = count.trim().parse().map_err(|_| format!("invalid grid count in `{s}`"))?;
        if count < 2 {
            return Err(format!("grid count must be at least 2, got {count}"));
        }
        Ok(GridArg {
            start: start.parse::<AngleArg>()?.0,
            stop: stop.parse::<AngleArg>()?.0,
            count,
        })
    }
}

impl GridArg {
    pub fn points(&self) -> Vec<f64> {
        verify::grid(self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub theta_grid: GridArg,
    pub alpha_grid: GridArg,
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Parser)]
#[command(name = "ebitgate", version, about = "Controlled rotations from partially entangled pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal success probability and the measurement weights achieving it.
    Pmax {
        #[arg(long, allow_hyphen_values = true)]
        theta: AngleArg,
        #[arg(long, allow_hyphen_values = true)]
        alpha: AngleArg,
        #[arg(long)]
        json: bool,
    },
    /// Tabulate optimum and entanglement cost over a (theta, alpha) grid.
    Sweep {
        #[arg(long = "theta-grid")]
        theta_grid: GridArg,
        #[arg(long = "alpha-grid")]
        alpha_grid: GridArg,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo runs of the protocol at the optimal weights.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        theta: AngleArg,
        #[arg(long, allow_hyphen_values = true)]
        alpha: AngleArg,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Recover failures with a Bell pair.
        #[arg(long)]
        deterministic: bool,
        /// `random`, or a two-bit basis label for (A, B) such as `01`.
        #[arg(long, default_value = "random")]
        input: String,
        #[arg(long)]
        json: bool,
    },
    /// Rotation angle below which the average cost drops under one ebit.
    Threshold {
        /// Bisection width in units of pi.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in cross-checks.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(io::Error),
    Verify(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parse `args` (program name first) and run, writing to `out` / `err`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Pmax { theta, alpha, json } => cmd_pmax(theta, alpha, json, out),
        Command::Sweep {
            theta_grid,
            alpha_grid,
            out: path,
            json,
        } => {
            let spec = SweepSpec {
                theta_grid,
                alpha_grid,
                json,
            };
            match path {
                Some(p) => {
                    let rows = sweep_rows(&spec)?;
                    let mut w = BufWriter::new(File::create(&p)?);
                    write_sweep(&spec, &rows, &mut w)?;
                    w.flush()?;
                    Ok(())
                }
                None => {
                    let rows = sweep_rows(&spec)?;
                    write_sweep(&spec, &rows, out)
                }
            }
        }
        Command::Simulate {
            theta,
            alpha,
            trials,
            seed,
            deterministic,
            input,
            json,
        } => cmd_simulate(theta, alpha, trials, seed, deterministic, &input, json, out),
        Command::Threshold { tol, json } => cmd_threshold(tol, json, out),
        Command::Verify { level, json } => cmd_verify(level, json, out),
    }
}

fn print_json(v: &Value, out: &mut dyn Write) -> CliResult<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("serializable"))?;
    Ok(())
}

fn print_table(rows: &[(&str, String)], out: &mut dyn Write) -> CliResult<()> {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        writeln!(out, "{k:<width$}  {v}")?;
    }
    Ok(())
}

fn g(v: f64) -> String {
    fmt_sig(v, SIG_DIGITS)
}

fn cmd_pmax(theta: AngleArg, alpha: AngleArg, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let p = ProtocolParams::new(theta.0, alpha.0)?;
    let r = optimum(&p);
    let w = r.weights();
    let (d, tr, det) = (delta(&p), tr_e3(&p, &w), det_e3(&p, &w));
    if json {
        print_json(
            &json!({
                "theta": num(p.theta()),
                "alpha": num(p.alpha()),
                "case": r.case.as_str(),
                "x": num(r.x),
                "y": num(r.y),
                "p_max": num(r.p_max),
                "delta": num(d),
                "tr_e3": num(tr),
                "det_e3": num(det),
            }),
            out,
        )
    } else {
        print_table(
            &[
                ("theta", g(p.theta())),
                ("alpha", g(p.alpha())),
                ("case", r.case.as_str().to_string()),
                ("x", g(r.x)),
                ("y", g(r.y)),
                ("p_max", g(r.p_max)),
                ("delta", g(d)),
                ("tr_e3", g(tr)),
                ("det_e3", g(det)),
            ],
            out,
        )
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub alpha: f64,
    pub case: &'static str,
    pub x: f64,
    pub y: f64,
    pub p_max: f64,
    pub e_alpha: f64,
    pub avg_cost: f64,
}

/// Evaluate the grid, theta outer. Fails before producing anything if a
/// grid point is outside the domain.
pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>, Error> {
    let thetas = spec.theta_grid.points();
    let alphas = spec.alpha_grid.points();
    let mut rows = Vec::with_capacity(thetas.len() * alphas.len());
    for &t in &thetas {
        for &a in &alphas {
            let p = ProtocolParams::new(t, a)?;
            let r = optimum(&p);
            let cost = avg_cost(&p)?;
            rows.push(SweepRow {
                theta: t,
                alpha: a,
                case: r.case.as_str(),
                x: r.x,
                y: r.y,
                p_max: r.p_max,
                e_alpha: e_alpha(a)?,
                avg_cost: cost.avg_cost,
            });
        }
    }
    Ok(rows)
}

fn write_sweep(spec: &SweepSpec, rows: &[SweepRow], out: &mut dyn Write) -> CliResult<()> {
    if spec.json {
        let rows: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "theta_rad": num(r.theta),
                    "alpha_rad": num(r.alpha),
                    "case": r.case,
                    "x": num(r.x),
                    "y": num(r.y),
                    "p_max": num(r.p_max),
                    "e_alpha": num(r.e_alpha),
                    "avg_cost": num(r.avg_cost),
                })
            })
            .collect();
        return print_json(&json!({ "rows": rows }), out);
    }
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            g(r.theta),
            g(r.alpha),
            r.case,
            g(r.x),
            g(r.y),
            g(r.p_max),
            g(r.e_alpha),
            g(r.avg_cost)
        )?;
    }
    Ok(())
}

fn parse_input(s: &str) -> CliResult<InputSpec> {
    match s.trim() {
        "random" => Ok(InputSpec::Random),
        bits if bits.len() == 2 && bits.chars().all(|c| c == '0' || c == '1') => {
            Ok(InputSpec::Basis(u8::from_str_radix(bits, 2).expect("binary digits")))
        }
        other => Err(CliError::Usage(format!(
            "--input must be `random` or a basis label such as `01`, got `{other}`"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    theta: AngleArg,
    alpha: AngleArg,
    trials: u64,
    seed: u64,
    deterministic: bool,
    input: &str,
    json: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let p = ProtocolParams::new(theta.0, alpha.0)?;
    let input_spec = parse_input(input)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mode = if deterministic {
        RunMode::Deterministic
    } else {
        RunMode::Probabilistic
    };
    let s = monte_carlo(p, trials, seed, mode, input_spec)?;
    let expected_ebits = if deterministic {
        Some(avg_cost(&p)?.avg_cost)
    } else {
        None
    };
    if json {
        print_json(
            &json!({
                "params": { "theta": num(p.theta()), "alpha": num(p.alpha()) },
                "trials": s.trials,
                "seed": s.seed,
                "mode": if deterministic { "deterministic" } else { "probabilistic" },
                "input": input.trim(),
                "success_count": s.success_count,
                "branch_counts": s.branch_counts,
                "empirical_p": num(s.empirical_p),
                "analytic_p": num(s.analytic_p),
                "z_score": num(s.z_score),
                "mean_fidelity": opt_num(s.mean_fidelity),
                "mean_ebits": opt_num(s.mean_ebits),
                "expected_ebits": opt_num(expected_ebits),
            }),
            out,
        )?;
    } else {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), g);
        print_table(
            &[
                ("theta", g(p.theta())),
                ("alpha", g(p.alpha())),
                ("trials", s.trials.to_string()),
                ("seed", s.seed.to_string()),
                ("success_count", s.success_count.to_string()),
                (
                    "branch_counts",
                    format!("{} {} {}", s.branch_counts[0], s.branch_counts[1], s.branch_counts[2]),
                ),
                ("empirical_p", g(s.empirical_p)),
                ("analytic_p", g(s.analytic_p)),
                ("z_score", g(s.z_score)),
                ("mean_fidelity", opt(s.mean_fidelity)),
                ("mean_ebits", opt(s.mean_ebits)),
                ("expected_ebits", opt(expected_ebits)),
            ],
            out,
        )?;
    }
    if s.z_score.is_nan() || s.z_score.abs() > 5.0 {
        return Err(CliError::Verify(format!(
            "success frequency {} is {} sigma from {}",
            g(s.empirical_p),
            g(s.z_score),
            g(s.analytic_p)
        )));
    }
    Ok(())
}

fn cmd_threshold(tol: f64, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let t = threshold_theta(tol)?;
    if json {
        print_json(
            &json!({ "theta_rad": num(t), "theta_over_pi": num(t / PI), "tol": num(tol) }),
            out,
        )
    } else {
        print_table(
            &[
                ("theta_rad", g(t)),
                ("theta_over_pi", g(t / PI)),
                ("tol", g(tol)),
            ],
            out,
        )
    }
}

fn cmd_verify(level: LevelArg, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let level = match level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let report = verify::run(level, &verify::Formulas::default());
    if json {
        print_json(
            &json!({
                "level": report.level,
                "passed": report.passed(),
                "checks": report.checks,
            }),
            out,
        )?;
    } else {
        let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &report.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{verdict}  {:<width$}  {}", c.name, c.detail)?;
        }
    }
    match report.first_failure() {
        Some(c) => Err(CliError::Verify(c.name.to_string())),
        None => Ok(()),
    }
}
