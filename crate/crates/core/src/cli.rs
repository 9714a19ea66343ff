//! Command-line front end: one command per run, JSON out (CSV for `sample`).
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::classify::classify;
use crate::error::SwitchError;
use crate::model::{Problem, ProblemData};
use crate::solver::residuals;
use crate::value::{build_solution, Solution};
use crate::verify::{check_c1, check_hjb, simulate_value, GridSpec, McConfig};

/// Largest admissible `|residual| / scale`.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Classify,
    Solve,
    Sample,
    Verify,
    Simulate,
}

#[derive(Debug, Parser)]
#[command(
    name = "switchopt",
    version,
    about = "Optimal open/close switching with abandonment under GBM"
)]
struct Args {
    command: Command,
    /// Problem data JSON (or, for verify/simulate/sample, a solve output).
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// `MIN:MAX:N` or `MIN:MAX:N:log`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridSpec>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Starting mode for simulate (1 open, 0 closed).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    z: u8,
    /// Starting state for simulate.
    #[arg(long)]
    x0: Option<f64>,
}

/// Overrides applied on top of [`McConfig::for_rate`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McOverrides {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

impl McOverrides {
    pub fn apply(&self, r: f64) -> McConfig {
        let mut cfg = McConfig::for_rate(r);
        if let Some(p) = self.paths {
            cfg.paths = p;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub mc: McOverrides,
    pub z: u8,
    pub x0: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Switch(#[from] SwitchError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Switch(e) => match e {
                SwitchError::RootNotBracketed { .. } | SwitchError::PreconditionViolated(_) => 3,
                _ => 2,
            },
        }
    }
}

/// Parses `MIN:MAX:N[:log]`.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let log = match parts.as_slice() {
        [_, _, _] => false,
        [_, _, _, "log"] => true,
        _ => return Err(format!("expected MIN:MAX:N[:log], got `{s}`")),
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let x_min = num(parts[0])?;
    let x_max = num(parts[1])?;
    let points: usize = parts[2]
        .trim()
        .parse()
        .map_err(|e| format!("`{}`: {e}", parts[2]))?;
    if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
        return Err(format!("grid needs 0 < MIN < MAX < ∞, got {x_min}:{x_max}"));
    }
    if points < 2 {
        return Err("grid needs at least 2 points".into());
    }
    Ok(GridSpec {
        x_min,
        x_max,
        points,
        log,
    })
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = RunConfig {
        command: args.command,
        input: args.input,
        output: args.output,
        grid: args.grid,
        mc: McOverrides {
            paths: args.paths,
            dt: args.dt,
            seed: args.seed,
            horizon: args.horizon,
        },
        z: args.z,
        x0: args.x0,
    };
    match execute(&cfg).and_then(|out| write_output(cfg.output.as_ref(), &out)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("switchopt: {e}");
            e.exit_code()
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Input file contents: raw problem data, or a previously written solution.
enum Input {
    Data(ProblemData),
    Solved(Box<Solution>),
}

fn read_input(path: &PathBuf) -> Result<Input, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| SwitchError::InvalidProblem(format!("malformed JSON: {e}")))?;
    if value.get("case").is_some() && value.get("data").is_some() {
        Ok(Input::Solved(Box::new(Solution::from_json(&text)?)))
    } else {
        Ok(Input::Data(ProblemData::from_json(&text)?))
    }
}

fn solution_of(input: Input) -> Result<Solution, CliError> {
    match input {
        Input::Data(d) => Ok(build_solution(&d)?),
        Input::Solved(s) => Ok(*s),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("serialisable");
    s.push('\n');
    s
}

/// Runs one command and returns the text to write.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    let input = read_input(&cfg.input)?;
    match cfg.command {
        Command::Classify => {
            let data = match input {
                Input::Data(d) => d,
                Input::Solved(s) => s.data.clone(),
            };
            let c = classify(&Problem::new(data)?)?;
            let mut v = serde_json::to_value(c.thresholds).expect("serialisable");
            v.as_object_mut()
                .expect("thresholds serialise to an object")
                .insert("case".into(), json!(c.case));
            Ok(to_json(&v))
        }
        Command::Solve => {
            let mut s = solution_of(input)?.to_json();
            s.push('\n');
            Ok(s)
        }
        Command::Sample => {
            let s = solution_of(input)?;
            let grid = cfg.grid.unwrap_or_else(|| GridSpec::around(&s));
            sample_csv(&s, &grid)
        }
        Command::Verify => verify(input, cfg.grid),
        Command::Simulate => {
            let s = solution_of(input)?;
            let x0 = cfg
                .x0
                .ok_or_else(|| CliError::Usage("simulate needs --x0".into()))?;
            let mc = cfg.mc.apply(s.problem().r());
            let res = simulate_value(&s, cfg.z, x0, &mc)?;
            let value = s.eval(cfg.z, x0, 0)?;
            let allowed = 3.0 * res.stderr + res.bias_budget;
            Ok(to_json(&json!({
                "case": s.case,
                "z": cfg.z,
                "x0": x0,
                "value": value,
                "region": s.regions.label(cfg.z, x0),
                "config": mc,
                "mc": res,
                "error": res.mean - value,
                "allowed": allowed,
                "pass": (res.mean - value).abs() <= allowed,
            })))
        }
    }
}

/// Header `x,w1,w0,dw1,dw0,region1,region0`, one row per grid point.
pub fn sample_csv(s: &Solution, grid: &GridSpec) -> Result<String, CliError> {
    let mut out = String::from("x,w1,w0,dw1,dw0,region1,region0\n");
    for x in grid.sample() {
        out.push_str(&format!(
            "{x},{},{},{},{},{},{}\n",
            s.eval(1, x, 0)?,
            s.eval(0, x, 0)?,
            s.eval(1, x, 1)?,
            s.eval(0, x, 1)?,
            s.regions.label(1, x),
            s.regions.label(0, x),
        ));
    }
    Ok(out)
}

fn verify(input: Input, grid: Option<GridSpec>) -> Result<String, CliError> {
    let (s, reproduced) = match input {
        Input::Data(d) => (build_solution(&d)?, None),
        Input::Solved(s) => {
            let fresh = build_solution(&s.data)?;
            let same = fresh.case == s.case && fresh.boundaries == s.boundaries;
            (*s, Some(same))
        }
    };
    let res = residuals(s.problem(), s.case, &s.boundaries)?;
    let worst = res.iter().map(|r| r.relative()).fold(0.0, f64::max);
    let gaps = check_c1(&s);
    let c1_pass = gaps.iter().all(|g| g.passes());
    let hjb = check_hjb(&s, &grid.unwrap_or_else(|| GridSpec::around(&s)));
    let pass = worst <= RESIDUAL_TOL && c1_pass && hjb.pass && reproduced != Some(false);
    Ok(to_json(&json!({
        "case": s.case,
        "boundaries": s.boundaries,
        "boundaries_reproduced": reproduced,
        "residuals": res,
        "max_relative_residual": worst,
        "c1": { "pass": c1_pass, "gaps": gaps },
        "hjb": hjb,
        "pass": pass,
    })))
}
