//! Hybrid bundles: modes glued by guards `{η = 0}` and reset pairs `(Δ, Δ̃)`.

mod crossing;
mod validate;

pub use crossing::{
    detect_crossings, segment_loop, CrossingEvent, CrossingScan, PartitionedLoop, Piece,
    TangentialContact, MIN_SEGMENT_SCAN, SCAN_RESOLUTION,
};
pub use validate::{
    check_bundle, validate_bundle, TransitionReport, ValidationReport, DIAGRAM_TOL,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr};
use crate::geometry::{Curve, Mode};

pub const DEFAULT_EPS_T: f64 = 1e-8;
pub const DEFAULT_EPS_C: f64 = 1e-9;

/// The switching surface `{η = 0}` on the source chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub source: String,
    pub target: String,
    level: Expr,
    compiled: CompiledExpr,
    gradient: Vec<CompiledExpr>,
    /// Crossings with `|dη(γ')| <= eps_t` are tangential and do not switch.
    pub eps_t: f64,
}

impl Guard {
    pub fn level(&self) -> &Expr {
        &self.level
    }

    pub fn eval(&self, m: &[f64]) -> Result<f64> {
        self.compiled.eval(m)
    }

    /// `dη(v)` at `m`, from the symbolic gradient where it evaluates and central
    /// differences otherwise.
    pub fn derivative_along(&self, m: &[f64], v: &[f64]) -> Result<f64> {
        (0..m.len()).try_fold(0.0, |acc, j| {
            let dj = match self.gradient[j].eval(m) {
                Ok(g) if g.is_finite() => g,
                _ => self.compiled.partial(m, j, None)?,
            };
            Ok(acc + dj * v[j])
        })
    }
}

/// A compiled vector of expressions with its source.
#[derive(Debug, Clone, PartialEq)]
struct ExprVec {
    exprs: Vec<Expr>,
    compiled: Vec<CompiledExpr>,
}

impl ExprVec {
    fn new(exprs: Vec<Expr>, slots: &[&str]) -> Result<Self> {
        let compiled = exprs
            .iter()
            .map(|e| e.compile(slots))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExprVec { exprs, compiled })
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.compiled.iter().map(|e| e.eval(x)).collect()
    }
}

/// Reset pair: base map `Δ` and the total-space map `Δ̃ = (base part, fiber part)`.
///
/// The base part of `Δ̃` may depend on the fiber; when it is not given it is `Δ`
/// itself and the commuting diagram holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reset {
    base: ExprVec,
    fiber: ExprVec,
    lifted_base: Option<ExprVec>,
}

impl Reset {
    pub fn base_exprs(&self) -> &[Expr] {
        &self.base.exprs
    }

    pub fn fiber_exprs(&self) -> &[Expr] {
        &self.fiber.exprs
    }

    pub fn lifted_base_exprs(&self) -> Option<&[Expr]> {
        self.lifted_base.as_ref().map(|v| v.exprs.as_slice())
    }

    /// `Δ(m)` in target chart coordinates.
    pub fn apply_base(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.base.eval(m)
    }

    /// Fiber part of `Δ̃(m, g)`.
    pub fn apply_fiber(&self, m: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.fiber.eval(&concat(m, g))
    }

    /// Base part of `Δ̃(m, g)`.
    pub fn apply_lifted_base(&self, m: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        match &self.lifted_base {
            Some(v) => v.eval(&concat(m, g)),
            None => self.base.eval(m),
        }
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub guard: Guard,
    pub reset: Reset,
}

/// Uncompiled description of a transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    pub source: String,
    pub target: String,
    pub guard: Expr,
    pub reset: Vec<Expr>,
    pub fiber_reset: Vec<Expr>,
    pub lifted_reset: Option<Vec<Expr>>,
    pub eps_t: f64,
}

impl TransitionSpec {
    /// A transition whose fiber reset is the identity.
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        guard: Expr,
        reset: Vec<Expr>,
        fiber: &[String],
    ) -> Self {
        TransitionSpec {
            source: source.into(),
            target: target.into(),
            guard,
            reset,
            fiber_reset: fiber.iter().map(|g| Expr::Var(g.clone())).collect(),
            lifted_reset: None,
            eps_t: DEFAULT_EPS_T,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridBundle {
    modes: Vec<Mode>,
    transitions: Vec<Transition>,
    index: HashMap<String, usize>,
}

impl HybridBundle {
    pub fn new(modes: Vec<Mode>, transitions: Vec<TransitionSpec>) -> Result<Self> {
        let Some(first) = modes.first() else {
            return Err(Error::InvalidInput(
                "a hybrid bundle needs at least one mode".into(),
            ));
        };
        let fiber = first.fiber.clone();
        let mut index = HashMap::new();
        for (i, m) in modes.iter().enumerate() {
            if m.fiber != fiber {
                return Err(Error::InvalidInput(format!(
                    "mode `{}` has fiber {:?}, expected {:?} (all modes share the structure group)",
                    m.id, m.fiber, fiber
                )));
            }
            if index.insert(m.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate mode id `{}`", m.id)));
            }
        }
        let fiber_slots: Vec<&str> = fiber.iter().map(String::as_str).collect();
        let mut compiled = Vec::with_capacity(transitions.len());
        for t in transitions {
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("transition references unknown mode `{id}`"))
                })
            };
            let src = &modes[lookup(&t.source)?];
            let dst = &modes[lookup(&t.target)?];
            let names = src.chart.names();
            let mut total: Vec<&str> = names.clone();
            total.extend(&fiber_slots);
            if t.reset.len() != dst.base_dim() {
                return Err(Error::InvalidInput(format!(
                    "reset {} -> {} has {} components, target chart has {}",
                    t.source,
                    t.target,
                    t.reset.len(),
                    dst.base_dim()
                )));
            }
            if t.fiber_reset.len() != fiber.len() {
                return Err(Error::InvalidInput(format!(
                    "fiber reset {} -> {} has {} components, fiber has {}",
                    t.source,
                    t.target,
                    t.fiber_reset.len(),
                    fiber.len()
                )));
            }
            if let Some(l) = &t.lifted_reset {
                if l.len() != dst.base_dim() {
                    return Err(Error::InvalidInput(format!(
                        "lifted reset {} -> {} has {} base components, target chart has {}",
                        t.source,
                        t.target,
                        l.len(),
                        dst.base_dim()
                    )));
                }
            }
            if !(t.eps_t > 0.0) {
                return Err(Error::InvalidInput(
                    "transversality tolerance must be positive".into(),
                ));
            }
            let guard = Guard {
                compiled: t.guard.compile(&names)?,
                gradient: names
                    .iter()
                    .map(|n| t.guard.derivative(n).compile(&names))
                    .collect::<Result<Vec<_>>>()?,
                level: t.guard,
                source: t.source,
                target: t.target,
                eps_t: t.eps_t,
            };
            let reset = Reset {
                base: ExprVec::new(t.reset, &names)?,
                fiber: ExprVec::new(t.fiber_reset, &total)?,
                lifted_base: t
                    .lifted_reset
                    .map(|l| ExprVec::new(l, &total))
                    .transpose()?,
            };
            compiled.push(Transition { guard, reset });
        }
        Ok(HybridBundle {
            modes,
            transitions: compiled,
            index,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Overrides the transversality tolerance of every guard.
    pub fn set_eps_t(&mut self, eps_t: f64) -> Result<()> {
        if !(eps_t > 0.0) {
            return Err(Error::InvalidInput(
                "transversality tolerance must be positive".into(),
            ));
        }
        for t in &mut self.transitions {
            t.guard.eps_t = eps_t;
        }
        Ok(())
    }

    pub fn mode(&self, id: &str) -> Result<&Mode> {
        self.index
            .get(id)
            .map(|&i| &self.modes[i])
            .ok_or_else(|| Error::InvalidInput(format!("unknown mode `{id}`")))
    }

    pub fn fiber(&self) -> &[String] {
        &self.modes[0].fiber
    }

    pub fn fiber_dim(&self) -> usize {
        self.modes[0].fiber.len()
    }

    /// Transitions leaving `source`, with their indices.
    pub fn transitions_from<'a>(
        &'a self,
        source: &'a str,
    ) -> impl Iterator<Item = (usize, &'a Transition)> + 'a {
        self.transitions
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.guard.source == source)
    }
}

/// One declared piece of a base loop: a curve on `[t0, t1]` in a given mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSegment {
    pub mode: String,
    pub t0: f64,
    pub t1: f64,
    pub curve: Curve,
}

/// A piecewise curve on `[0, 1]` whose pieces tile the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLoop {
    segments: Vec<LoopSegment>,
    /// Continuity and closure tolerance.
    pub eps_c: f64,
}

impl BaseLoop {
    pub fn new(segments: Vec<LoopSegment>) -> Result<Self> {
        if let (Some(first), Some(last)) = (segments.first(), segments.last()) {
            if first.t0 != 0.0 || last.t1 != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "loop segments must cover [0, 1], got [{}, {}]",
                    first.t0, last.t1
                )));
            }
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.t1 > s.t0) {
                return Err(Error::InvalidInput(format!(
                    "segment {k} has an empty parameter interval [{}, {}]",
                    s.t0, s.t1
                )));
            }
            if k > 0 && segments[k - 1].t1 != s.t0 {
                return Err(Error::InvalidInput(format!(
                    "segment {k} starts at {} but the previous one ends at {}",
                    s.t0,
                    segments[k - 1].t1
                )));
            }
        }
        Ok(BaseLoop {
            segments,
            eps_c: DEFAULT_EPS_C,
        })
    }

    pub fn with_eps_c(mut self, eps_c: f64) -> Self {
        self.eps_c = eps_c;
        self
    }

    /// A single-mode loop over one curve on `[0, 1]`.
    pub fn single(mode: impl Into<String>, curve: Curve) -> Self {
        BaseLoop {
            segments: vec![LoopSegment {
                mode: mode.into(),
                t0: 0.0,
                t1: 1.0,
                curve,
            }],
            eps_c: DEFAULT_EPS_C,
        }
    }

    pub fn empty() -> Self {
        BaseLoop {
            segments: Vec::new(),
            eps_c: DEFAULT_EPS_C,
        }
    }

    pub fn segments(&self) -> &[LoopSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// The loop traversed `times` times in succession, reparametrized onto `[0, 1]`.
    pub fn repeated(&self, times: usize) -> Result<BaseLoop> {
        let mut segments = Vec::with_capacity(self.segments.len() * times);
        let n = times as f64;
        for r in 0..times {
            for s in &self.segments {
                // Template time u = n t - r.
                let u = Expr::binary(
                    crate::expr::BinOp::Sub,
                    Expr::binary(crate::expr::BinOp::Mul, Expr::Num(n), Expr::var("t")),
                    Expr::Num(r as f64),
                );
                let curve = reparametrize(&s.curve, &u, |t| (t + r as f64) / n)?;
                segments.push(LoopSegment {
                    mode: s.mode.clone(),
                    t0: (s.t0 + r as f64) / n,
                    t1: (s.t1 + r as f64) / n,
                    curve,
                });
            }
        }
        if let Some(last) = segments.last_mut() {
            last.t1 = 1.0;
        }
        Ok(BaseLoop {
            segments,
            eps_c: self.eps_c,
        })
    }

    /// The same loop traversed backwards, `t -> 1 - t`.
    pub fn reversed(&self) -> Result<BaseLoop> {
        let flip = Expr::binary(crate::expr::BinOp::Sub, Expr::Num(1.0), Expr::var("t"));
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| {
                Ok(LoopSegment {
                    mode: s.mode.clone(),
                    t0: 1.0 - s.t1,
                    t1: 1.0 - s.t0,
                    curve: reparametrize(&s.curve, &flip, |t| 1.0 - t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseLoop {
            segments,
            eps_c: self.eps_c,
        })
    }
}

/// Rewrites a curve in terms of a new parameter: closed-form curves substitute
/// `t -> old_of_new`, polylines map their vertex times with `new_of_old`.
pub(crate) fn reparametrize(
    curve: &Curve,
    old_of_new: &Expr,
    new_of_old: impl Fn(f64) -> f64,
) -> Result<Curve> {
    match curve.exprs() {
        Some(exprs) => {
            let map = HashMap::from([("t".to_string(), old_of_new.clone())]);
            Curve::expr(exprs.iter().map(|e| e.substitute(&map)).collect())
        }
        None => {
            let (times, points) = curve.polyline_data().expect("polyline");
            let mut pairs: Vec<(f64, Vec<f64>)> = times
                .iter()
                .map(|&t| new_of_old(t))
                .zip(points.iter().cloned())
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (t, p) = pairs.into_iter().unzip();
            Curve::polyline(t, p)
        }
    }
}
