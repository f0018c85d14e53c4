//! System definition files and the builtin reference systems.
//!
//! A definition is JSON with a `schema_version`, named `parameters`, the
//! `fiber` variable names, the `modes`, the `transitions` and an optional
//! canonical `loop`. Every expression is a string in the [`crate::expr`]
//! grammar; parameters are substituted before anything is compiled.

mod builtin;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use builtin::{
    build_planar_walker, build_rolling_disk, planar_walker_definition, rolling_disk_definition,
};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::geometry::{Chart, ChartVar, Curve, Mode};
use crate::hybrid::{
    validate_bundle, BaseLoop, HybridBundle, LoopSegment, TransitionSpec, DEFAULT_EPS_T,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Guard samples per transition used when a definition is loaded.
pub const LOAD_VALIDATION_SAMPLES: usize = 64;
pub const LOAD_VALIDATION_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDefinition {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub fiber: Vec<String>,
    pub modes: Vec<ModeDefinition>,
    #[serde(default)]
    pub transitions: Vec<TransitionDefinition>,
    #[serde(default, rename = "loop", skip_serializing_if = "Option::is_none")]
    pub base_loop: Option<LoopDefinition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDefinition {
    pub id: String,
    pub chart: Vec<ChartVar>,
    /// One row per fiber variable, one column per chart variable.
    pub connection: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDefinition {
    pub source: String,
    pub target: String,
    pub guard: String,
    /// Base reset in the source chart variables.
    pub reset: Vec<String>,
    /// Fiber reset in the source chart and fiber variables. Identity if omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_reset: Option<Vec<String>>,
    /// Base part of the total-space reset, checked against `reset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifted_reset: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopDefinition {
    #[serde(default = "one")]
    pub repeat: u64,
    pub segments: Vec<SegmentDefinition>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDefinition {
    pub mode: String,
    pub interval: (f64, f64),
    /// Coordinates as expressions in `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyline: Option<PolylineDefinition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolylineDefinition {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

/// A compiled definition.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub bundle: HybridBundle,
    pub base_loop: Option<BaseLoop>,
}

/// Builds loops made of `n` traversals of one canonical cycle.
#[derive(Debug, Clone)]
pub struct LoopFactory {
    cycle: BaseLoop,
}

impl LoopFactory {
    pub fn new(cycle: BaseLoop) -> Self {
        LoopFactory { cycle }
    }

    pub fn cycle(&self) -> &BaseLoop {
        &self.cycle
    }

    /// `n` traversals; negative `n` runs the cycle backwards, zero is the empty loop.
    pub fn build(&self, n: i64) -> Result<BaseLoop> {
        match n {
            0 => Ok(BaseLoop::empty()),
            n if n > 0 => self.cycle.repeated(n as usize),
            n => self.cycle.reversed()?.repeated(n.unsigned_abs() as usize),
        }
    }
}

impl SystemDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        let def: SystemDefinition = serde_json::from_str(text)?;
        if def.schema_version != SCHEMA_VERSION {
            return Err(Error::definition(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    def.schema_version
                ),
            ));
        }
        Ok(def)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Sets or overrides a named parameter.
    pub fn with_parameter(mut self, name: impl Into<String>, value: f64) -> Self {
        self.parameters.insert(name.into(), value);
        self
    }

    /// Parses, substitutes parameters and compiles. Does not validate resets.
    pub fn build(&self) -> Result<System> {
        let ctx = Context {
            params: self
                .parameters
                .iter()
                .map(|(k, &v)| (k.clone(), Expr::num(v)))
                .collect(),
        };
        let mut modes = Vec::with_capacity(self.modes.len());
        let mut charts: HashMap<&str, Vec<String>> = HashMap::new();
        for (i, m) in self.modes.iter().enumerate() {
            let at = format!("modes[{i}]");
            let chart = Chart::new(m.chart.clone())
                .map_err(|e| Error::definition(format!("{at}.chart"), e))?;
            let names: Vec<String> = chart.names().iter().map(|s| s.to_string()).collect();
            let connection = m
                .connection
                .iter()
                .enumerate()
                .map(|(a, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, s)| ctx.expr(s, &format!("{at}.connection[{a}][{j}]"), &names))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let potential = m
                .potential
                .as_ref()
                .map(|p| ctx.exprs(p, &format!("{at}.potential"), &names))
                .transpose()?;
            modes.push(
                Mode::new(
                    m.id.clone(),
                    chart,
                    self.fiber.clone(),
                    connection,
                    potential,
                )
                .map_err(|e| Error::definition(&at, e))?,
            );
            charts.insert(&m.id, names);
        }

        let mut transitions = Vec::with_capacity(self.transitions.len());
        for (i, t) in self.transitions.iter().enumerate() {
            let at = format!("transitions[{i}]");
            let base = charts.get(t.source.as_str()).ok_or_else(|| {
                Error::definition(&at, format!("unknown source mode `{}`", t.source))
            })?;
            let mut total = base.clone();
            total.extend(self.fiber.iter().cloned());
            let fiber_reset = match &t.fiber_reset {
                Some(f) => ctx.exprs(f, &format!("{at}.fiber_reset"), &total)?,
                None => self.fiber.iter().map(|g| Expr::var(g.clone())).collect(),
            };
            transitions.push(TransitionSpec {
                source: t.source.clone(),
                target: t.target.clone(),
                guard: ctx.expr(&t.guard, &format!("{at}.guard"), base)?,
                reset: ctx.exprs(&t.reset, &format!("{at}.reset"), base)?,
                fiber_reset,
                lifted_reset: t
                    .lifted_reset
                    .as_ref()
                    .map(|l| ctx.exprs(l, &format!("{at}.lifted_reset"), &total))
                    .transpose()?,
                eps_t: t.eps_t.unwrap_or(DEFAULT_EPS_T),
            });
        }
        let bundle =
            HybridBundle::new(modes, transitions).map_err(|e| Error::definition("system", e))?;

        let base_loop = self
            .base_loop
            .as_ref()
            .map(|l| {
                let time = vec!["t".to_string()];
                let segments = l
                    .segments
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let at = format!("loop.segments[{k}]");
                        let curve = match (&s.curve, &s.polyline) {
                            (Some(c), None) => {
                                Curve::expr(ctx.exprs(c, &format!("{at}.curve"), &time)?)
                            }
                            (None, Some(p)) => Curve::polyline(p.times.clone(), p.points.clone()),
                            _ => Err(Error::definition(
                                &at,
                                "give exactly one of `curve` and `polyline`",
                            )),
                        }
                        .map_err(|e| match e {
                            e @ Error::Definition { .. } => e,
                            e => Error::definition(&at, e),
                        })?;
                        Ok(LoopSegment {
                            mode: s.mode.clone(),
                            t0: s.interval.0,
                            t1: s.interval.1,
                            curve,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let cycle = BaseLoop::new(segments).map_err(|e| Error::definition("loop", e))?;
                cycle.repeated(l.repeat as usize)
            })
            .transpose()?;

        Ok(System {
            name: self.name.clone(),
            bundle,
            base_loop,
        })
    }
}

struct Context {
    params: HashMap<String, Expr>,
}

impl Context {
    fn expr(&self, src: &str, at: &str, allowed: &[String]) -> Result<Expr> {
        let e = parse(src).map_err(|e| Error::definition(at, e))?;
        let e = e.substitute(&self.params);
        let allowed: BTreeSet<&str> = allowed.iter().map(String::as_str).collect();
        if let Some(v) = e
            .variables()
            .into_iter()
            .find(|v| !allowed.contains(v.as_str()))
        {
            return Err(Error::definition(at, format!("unbound parameter `{v}`")));
        }
        Ok(e)
    }

    fn exprs(&self, srcs: &[String], at: &str, allowed: &[String]) -> Result<Vec<Expr>> {
        srcs.iter()
            .enumerate()
            .map(|(i, s)| self.expr(s, &format!("{at}[{i}]"), allowed))
            .collect()
    }
}

/// Reads and compiles a definition without checking its resets.
pub fn load_system_unchecked(path: &Path) -> Result<System> {
    read_definition(path)?.build()
}

pub fn read_definition(path: &Path) -> Result<SystemDefinition> {
    let text = std::fs::read_to_string(path)?;
    SystemDefinition::from_json(&text)
}

/// Reads, compiles and validates a definition file.
pub fn load_system(path: &Path) -> Result<HybridBundle> {
    let sys = load_system_unchecked(path)?;
    validate_bundle(&sys.bundle, LOAD_VALIDATION_SAMPLES, LOAD_VALIDATION_SEED)?;
    Ok(sys.bundle)
}
