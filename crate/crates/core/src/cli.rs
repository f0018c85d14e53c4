//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on input or validation errors, 3 on numerical
//! failures. Floating-point values are written with 17 significant digits.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
use crate::geometry::{reconstruct_potential, GroupElement};
use crate::hybrid::{
    check_bundle, segment_loop, validate_bundle, BaseLoop, HybridBundle, DEFAULT_EPS_C,
};
use crate::lift::{hybrid_holonomy, hybrid_lift, LiftOptions, Method};
use crate::limits::{convergence_sweep, SweepCase, SweepOptions};
use crate::models::{
    planar_walker_definition, read_definition, rolling_disk_definition, LoopFactory,
    SystemDefinition, LOAD_VALIDATION_SAMPLES,
};
use crate::output::{sig17, write_atomic};

pub const THREADS_ENV: &str = "HOLONOMY_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "holonomy-lab",
    version,
    about = "Holonomy of loops in hybrid principal bundles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Total holonomy of the system's loop.
    Holonomy {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Hybrid lift of the system's loop, sampled per piece.
    Lift {
        #[command(flatten)]
        system: SystemArgs,
        /// Samples per loop segment.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Fiber value the lift starts from, comma separated. Defaults to the identity.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Option<Vec<f64>>,
        /// Where to write the crossing log (JSON).
        #[arg(long)]
        crossings: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Convergence of the walker towards the rolling disk as steps shrink with `N δ = K` fixed.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        /// The product `N δ` held fixed across the sweep.
        #[arg(long, default_value_t = 0.5)]
        k: f64,
        /// Cycle counts `N`, comma separated and increasing.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        schedule: Vec<u64>,
        /// Parameter of a definition file that plays the role of `δ`.
        #[arg(long, default_value = "delta")]
        sweep_param: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Reset diagram, exactness and transversality checks.
    Check {
        #[command(flatten)]
        system: SystemArgs,
        /// Guard points sampled per transition.
        #[arg(long, default_value_t = LOAD_VALIDATION_SAMPLES)]
        samples: usize,
        /// Grid nodes per axis for the exactness check.
        #[arg(long, default_value_t = 33)]
        grid: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Walker,
    Disk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Quadrature,
    Potential,
    Both,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Quadrature => Method::Quadrature,
            MethodArg::Potential => Method::Potential,
            MethodArg::Both => Method::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).multiple(false).args(["model", "system"])))]
pub struct SystemArgs {
    /// Builtin model.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// System definition file.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Parameter override for a definition file, `name=value`.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Walker leg length.
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    /// Walker half step angle.
    #[arg(long, default_value_t = 0.3)]
    pub delta: f64,
    /// Walker steps; also the repeat count for a definition file's loop.
    #[arg(long, allow_hyphen_values = true)]
    pub cycles: Option<i64>,
    /// Disk radius.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Disk windings.
    #[arg(long, allow_hyphen_values = true)]
    pub windings: Option<i64>,
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = crate::geometry::quadrature::DEFAULT_TOL)]
    pub tol: f64,
    /// Transversality tolerance for guard crossings.
    #[arg(long)]
    pub eps_t: Option<f64>,
    /// Continuity tolerance between a reset and the next segment.
    #[arg(long, default_value_t = DEFAULT_EPS_C)]
    pub eps_c: f64,
    /// Seed for guard sampling during validation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output if omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("parameter `{name}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::Numerical => 3,
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Holonomy {
            system,
            method,
            out,
        } => cmd_holonomy(&system, method.into(), &out),
        Command::Lift {
            system,
            samples,
            start,
            crossings,
            out,
        } => cmd_lift(&system, samples, start, crossings.as_deref(), &out),
        Command::Sweep {
            system,
            k,
            schedule,
            sweep_param,
            method,
            out,
        } => cmd_sweep(&system, k, &schedule, &sweep_param, method.into(), &out),
        Command::Check {
            system,
            samples,
            grid,
            out,
        } => cmd_check(&system, samples, grid, &out),
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Resolved {
    bundle: HybridBundle,
    base_loop: BaseLoop,
    factory: Option<LoopFactory>,
}

fn definition(sys: &SystemArgs) -> Result<(SystemDefinition, i64)> {
    if !(sys.tol > 0.0) || !(sys.eps_c > 0.0) || sys.eps_t.is_some_and(|e| !(e > 0.0)) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let (mut def, count) = match (sys.model, &sys.system) {
        (Some(ModelArg::Walker), None) => {
            if !(sys.l > 0.0) || !(sys.delta > 0.0 && sys.delta < std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidInput(
                    "walker needs l > 0 and 0 < delta < pi/2".into(),
                ));
            }
            (
                planar_walker_definition(sys.l, sys.delta),
                sys.cycles.unwrap_or(1),
            )
        }
        (Some(ModelArg::Disk), None) => {
            if !(sys.r > 0.0) {
                return Err(Error::InvalidInput("disk radius must be positive".into()));
            }
            (rolling_disk_definition(sys.r), sys.windings.unwrap_or(1))
        }
        (None, Some(path)) => {
            let def = read_definition(path)?;
            let repeat = def.base_loop.as_ref().map_or(1, |l| l.repeat as i64);
            let count = sys.cycles.or(sys.windings).unwrap_or(repeat);
            (def, count)
        }
        _ => {
            return Err(Error::InvalidInput(
                "give exactly one of --model and --system".into(),
            ))
        }
    };
    for (name, value) in &sys.params {
        def.parameters.insert(name.clone(), *value);
    }
    if let Some(eps) = sys.eps_t {
        for t in &mut def.transitions {
            t.eps_t = Some(eps);
        }
    }
    if let Some(l) = &mut def.base_loop {
        l.repeat = 1;
    }
    Ok((def, count))
}

fn resolve(sys: &SystemArgs) -> Result<Resolved> {
    let (def, count) = definition(sys)?;
    build_resolved(&def, count, sys.eps_c)
}

fn build_resolved(def: &SystemDefinition, count: i64, eps_c: f64) -> Result<Resolved> {
    let built = def.build()?;
    let (base_loop, factory) = match built.base_loop {
        Some(cycle) => {
            let f = LoopFactory::new(cycle);
            (f.build(count)?, Some(f))
        }
        None => (BaseLoop::empty(), None),
    };
    Ok(Resolved {
        bundle: built.bundle,
        base_loop: base_loop.with_eps_c(eps_c),
        factory,
    })
}

fn lift_options(sys: &SystemArgs, samples: usize) -> LiftOptions {
    LiftOptions {
        tol: sys.tol,
        samples,
    }
}

fn components_csv(prefix: &str, g: Option<&GroupElement>, n: usize) -> (Vec<String>, Vec<String>) {
    let header = (1..=n).map(|i| format!("{prefix}{i}")).collect();
    let values = match g {
        Some(g) => g.components().iter().map(|&x| sig17(x)).collect(),
        None => vec![String::new(); n],
    };
    (header, values)
}

pub fn cmd_holonomy(sys: &SystemArgs, method: Method, out: &OutputArgs) -> Result<i32> {
    let r = resolve(sys)?;
    validate_bundle(&r.bundle, LOAD_VALIDATION_SAMPLES, sys.seed)?;
    let h = hybrid_holonomy(&r.bundle, &r.base_loop, method, &lift_options(sys, 2))?;
    let text = match out.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&h)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let n = r.bundle.fiber_dim();
            let mut header = vec!["method".to_string()];
            let mut row = vec![method.to_string()];
            for (prefix, g) in [
                ("dg_", Some(&h.total)),
                ("quadrature_dg_", h.quadrature.as_ref()),
                ("potential_dg_", h.potential.as_ref()),
            ] {
                let (hd, vals) = components_csv(prefix, g, n);
                header.extend(hd);
                row.extend(vals);
            }
            header.push("residual".into());
            row.push(h.residual.map(sig17).unwrap_or_default());
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
    };
    emit(out, &text)?;
    Ok(0)
}

pub fn cmd_lift(
    sys: &SystemArgs,
    samples: usize,
    start: Option<Vec<f64>>,
    crossings: Option<&Path>,
    out: &OutputArgs,
) -> Result<i32> {
    let r = resolve(sys)?;
    validate_bundle(&r.bundle, LOAD_VALIDATION_SAMPLES, sys.seed)?;
    let e0 = match start {
        Some(v) => GroupElement::from_vec(v),
        None => GroupElement::identity(r.bundle.fiber_dim()),
    };
    let lift = hybrid_lift(&r.bundle, &r.base_loop, &e0, &lift_options(sys, samples))?;
    let text = match out.format {
        Format::Csv => lift.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&lift)?;
            s.push('\n');
            s
        }
    };
    if let Some(p) = crossings {
        let mut log = lift.crossing_log_json()?;
        log.push('\n');
        write_atomic(p, log.as_bytes())?;
    }
    emit(out, &text)?;
    Ok(0)
}

pub fn cmd_sweep(
    sys: &SystemArgs,
    k: f64,
    schedule: &[u64],
    sweep_param: &str,
    method: Method,
    out: &OutputArgs,
) -> Result<i32> {
    let (def, _) = definition(sys)?;
    if matches!(sys.model, Some(ModelArg::Disk)) {
        return Err(Error::InvalidInput(
            "the rolling disk has no step size to sweep".into(),
        ));
    }
    let param = if sys.model.is_some() {
        "delta"
    } else {
        sweep_param
    };
    if !def.parameters.contains_key(param) {
        return Err(Error::InvalidInput(format!(
            "system has no parameter `{param}` to sweep"
        )));
    }
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("{THREADS_ENV}: {e}")))?,
        ),
        Err(_) => None,
    };
    let opts = SweepOptions {
        method,
        lift: lift_options(sys, 2),
        threads,
    };
    let factory = |n: u64, delta: f64| -> Result<SweepCase> {
        let def = def.clone().with_parameter(param, delta);
        let r = build_resolved(&def, n as i64, sys.eps_c)?;
        if r.factory.is_none() {
            return Err(Error::InvalidInput(
                "system defines no loop to sweep".into(),
            ));
        }
        Ok(SweepCase {
            bundle: r.bundle,
            base_loop: r.base_loop,
            guard_separation: 2.0 * delta.abs(),
        })
    };
    let report = convergence_sweep(factory, k, schedule, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut summary = report.summary_json()?;
    summary.push('\n');
    match out.format {
        Format::Csv => {
            match &out.output {
                Some(p) => write_atomic(&summary_path(p), summary.as_bytes())?,
                None => eprint!("{summary}"),
            }
            emit(out, &report.to_csv())?;
        }
        Format::Json => emit(out, &summary)?,
    }
    Ok(0)
}

/// `sweep.csv` -> `sweep.summary.json`.
fn summary_path(p: &Path) -> PathBuf {
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    p.with_file_name(format!("{stem}.summary.json"))
}

#[derive(Debug, Serialize)]
struct CheckRow {
    check: &'static str,
    subject: String,
    passed: bool,
    value: f64,
    detail: String,
}

pub fn cmd_check(sys: &SystemArgs, samples: usize, grid: usize, out: &OutputArgs) -> Result<i32> {
    let r = resolve(sys)?;
    let mut rows = Vec::new();

    if !r.bundle.transitions().is_empty() {
        let report = check_bundle(&r.bundle, samples, sys.seed)?;
        for t in &report.transitions {
            rows.push(CheckRow {
                check: "diagram",
                subject: format!("{} -> {} ({})", t.source, t.target, t.guard),
                passed: t.max_violation <= report.tolerance && t.points_checked > 0,
                value: t.max_violation,
                detail: format!("{} guard points", t.points_checked),
            });
        }
    }

    for mode in r.bundle.modes() {
        let region = mode.chart.sampling_box();
        let anchor: Vec<f64> = region.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let nodes = vec![grid.max(2); region.len()];
        let (passed, value, detail) =
            match reconstruct_potential(mode, &anchor, &region, &nodes, 1e-6) {
                Ok(rec) => (
                    true,
                    rec.max_closedness,
                    format!("exact; potential residual {}", sig17(rec.max_residual)),
                ),
                Err(Error::NotExact(v)) => (
                    false,
                    v.violation.abs(),
                    format!("not exact at {:?}, pair {:?}", v.point, v.pair),
                ),
                Err(e) => return Err(e),
            };
        rows.push(CheckRow {
            check: "exactness",
            subject: mode.id.clone(),
            passed,
            value,
            detail,
        });
    }

    if !r.base_loop.is_empty() {
        let row = match segment_loop(&r.bundle, &r.base_loop) {
            Ok(part) => {
                let weakest = part
                    .crossings
                    .iter()
                    .map(|c| c.transversality.abs())
                    .fold(f64::INFINITY, f64::min);
                CheckRow {
                    check: "transversality",
                    subject: "loop".into(),
                    passed: true,
                    value: if weakest.is_finite() { weakest } else { 0.0 },
                    detail: format!(
                        "{} crossings, {} tangential contacts skipped",
                        part.crossings.len(),
                        part.skipped.len()
                    ),
                }
            }
            Err(e @ (Error::ContinuityViolation { .. } | Error::AmbiguousCrossing { .. })) => {
                CheckRow {
                    check: "transversality",
                    subject: "loop".into(),
                    passed: false,
                    value: 0.0,
                    detail: e.to_string(),
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }

    let ok = rows.iter().all(|r| r.passed);
    let text = match out.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                passed: bool,
                checks: &'a [CheckRow],
            }
            let mut s = serde_json::to_string_pretty(&Report {
                passed: ok,
                checks: &rows,
            })?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("check,subject,passed,value,detail\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.check,
                    csv_field(&r.subject),
                    r.passed,
                    sig17(r.value),
                    csv_field(&r.detail)
                ));
            }
            s
        }
    };
    emit(out, &text)?;
    for r in rows.iter().filter(|r| !r.passed) {
        eprintln!("check failed: {} {}: {}", r.check, r.subject, r.detail);
    }
    Ok(if ok { 0 } else { 2 })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
