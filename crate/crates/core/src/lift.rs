//! Hybrid lifts and hybrid holonomy.
//!
//! Within each piece the fiber follows `ġ = -A(m) ṁ`; at each crossing the
//! fiber is reset by `Δ̃` and the next piece starts from there. The holonomy of
//! a loop is the total fiber displacement, reset jumps included.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{segment_holonomy_potential, segment_holonomy_quadrature, GroupElement};
use crate::hybrid::{segment_loop, BaseLoop, HybridBundle, PartitionedLoop};
use crate::output::sig17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Potential,
    Both,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Method::Quadrature),
            "potential" => Ok(Method::Potential),
            "both" => Ok(Method::Both),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quadrature",
            Method::Potential => "potential",
            Method::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    /// Absolute quadrature tolerance per segment.
    pub tol: f64,
    /// Samples per declared loop segment, endpoints included. Inspection only.
    pub samples: usize,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            tol: crate::geometry::quadrature::DEFAULT_TOL,
            samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub m: Vec<f64>,
    pub g: Vec<f64>,
}

/// The lift over one constant-mode piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieceLift {
    pub mode: String,
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<Sample>,
    pub contribution: GroupElement,
}

/// Fiber reset applied at a crossing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetJump {
    pub t: f64,
    pub source: String,
    pub target: String,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub transversality: f64,
    pub fiber_before: Vec<f64>,
    pub fiber_after: Vec<f64>,
    pub jump: GroupElement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftResult {
    pub method: Method,
    pub initial: GroupElement,
    pub pieces: Vec<PieceLift>,
    pub crossings: Vec<ResetJump>,
    /// Fiber value after the loop, including a closing reset at `t = 1`.
    pub final_fiber: GroupElement,
    pub total: GroupElement,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "quadrature tolerance must be positive, got {tol}"
        )))
    }
}

/// Hybrid lift of `lp` through fiber value `e0`, by quadrature.
pub fn hybrid_lift(
    b: &HybridBundle,
    lp: &BaseLoop,
    e0: &GroupElement,
    opts: &LiftOptions,
) -> Result<LiftResult> {
    check_tol(opts.tol)?;
    if e0.dim() != b.fiber_dim() {
        return Err(Error::InvalidInput(format!(
            "initial fiber value has dimension {}, bundle fiber has {}",
            e0.dim(),
            b.fiber_dim()
        )));
    }
    let samples = opts.samples.max(2);
    let part = segment_loop(b, lp)?;
    let segs = lp.segments();
    let mut g = e0.clone();
    let mut pieces = Vec::with_capacity(part.pieces.len());
    let mut crossings = Vec::with_capacity(part.crossings.len());

    for (k, piece) in part.pieces.iter().enumerate() {
        let mode = b.mode(&piece.mode)?;
        let start = g.clone();
        let mut contribution = GroupElement::identity(b.fiber_dim());
        let mut trace = Vec::with_capacity(samples * piece.segments.len());
        for &si in &piece.segments {
            let seg = &segs[si];
            let seg_start = &start + &contribution;
            let whole = segment_holonomy_quadrature(mode, &seg.curve, seg.t0, seg.t1, opts.tol)?;

            let times: Vec<f64> = (0..samples)
                .map(|i| {
                    if i + 1 == samples {
                        seg.t1
                    } else {
                        seg.t0 + (seg.t1 - seg.t0) * i as f64 / (samples - 1) as f64
                    }
                })
                .collect();
            let mut running = seg_start.clone();
            let skip_first = !trace.is_empty();
            for (i, &t) in times.iter().enumerate() {
                if i > 0 {
                    if i + 1 == samples {
                        running = &seg_start + &whole;
                    } else {
                        let step = segment_holonomy_quadrature(
                            mode,
                            &seg.curve,
                            times[i - 1],
                            t,
                            opts.tol / samples as f64,
                        )?;
                        running += &step;
                    }
                }
                if i == 0 && skip_first {
                    continue;
                }
                trace.push(Sample {
                    t,
                    m: seg.curve.point(t)?,
                    g: running.components().to_vec(),
                });
            }
            contribution += &whole;
        }
        g = &start + &contribution;
        pieces.push(PieceLift {
            mode: piece.mode.clone(),
            t0: piece.t0,
            t1: piece.t1,
            samples: trace,
            contribution,
        });
        if let Some(c) = part.crossings.get(k) {
            crossings.push(apply_reset(b, c, &mut g)?);
        }
    }

    let total = &g - e0;
    Ok(LiftResult {
        method: Method::Quadrature,
        initial: e0.clone(),
        pieces,
        crossings,
        final_fiber: g,
        total,
    })
}

fn apply_reset(
    b: &HybridBundle,
    c: &crate::hybrid::CrossingEvent,
    g: &mut GroupElement,
) -> Result<ResetJump> {
    let tr = &b.transitions()[c.transition];
    let before = g.clone();
    let after = GroupElement::from_vec(tr.reset.apply_fiber(&c.pre, before.components())?);
    let jump = &after - &before;
    *g = after.clone();
    Ok(ResetJump {
        t: c.t,
        source: c.source.clone(),
        target: c.target.clone(),
        pre: c.pre.clone(),
        post: c.post.clone(),
        transversality: c.transversality,
        fiber_before: before.into_vec(),
        fiber_after: after.into_vec(),
        jump,
    })
}

/// Holonomy of a loop together with the per-method values that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Holonomy {
    pub method: Method,
    pub total: GroupElement,
    pub quadrature: Option<GroupElement>,
    pub potential: Option<GroupElement>,
    /// Max-norm difference between the two methods when both ran.
    pub residual: Option<f64>,
}

/// Total hybrid holonomy `Δg` of `lp`.
///
/// `Potential` telescopes `F(start) - F(end)` over every segment; `Quadrature`
/// integrates `-A dm`; `Both` returns the quadrature value after checking the
/// two agree within `10 * tol`.
pub fn hybrid_holonomy(
    b: &HybridBundle,
    lp: &BaseLoop,
    method: Method,
    opts: &LiftOptions,
) -> Result<Holonomy> {
    check_tol(opts.tol)?;
    let part = segment_loop(b, lp)?;
    let quadrature = match method {
        Method::Quadrature | Method::Both => Some(accumulate(b, lp, &part, |mode, seg| {
            segment_holonomy_quadrature(mode, &seg.curve, seg.t0, seg.t1, opts.tol)
        })?),
        Method::Potential => None,
    };
    let potential = match method {
        Method::Potential | Method::Both => Some(accumulate(b, lp, &part, |mode, seg| {
            segment_holonomy_potential(mode, &seg.curve.point(seg.t0)?, &seg.curve.point(seg.t1)?)
        })?),
        Method::Quadrature => None,
    };
    let residual = match (&quadrature, &potential) {
        (Some(q), Some(p)) => Some(q.max_diff(p)),
        _ => None,
    };
    if let Some(r) = residual {
        let allowed = 10.0 * opts.tol;
        if !(r <= allowed) {
            return Err(Error::CrossCheckFailed {
                difference: r,
                allowed,
            });
        }
    }
    let total = quadrature
        .clone()
        .or_else(|| potential.clone())
        .expect("a method ran");
    Ok(Holonomy {
        method,
        total,
        quadrature,
        potential,
        residual,
    })
}

fn accumulate(
    b: &HybridBundle,
    lp: &BaseLoop,
    part: &PartitionedLoop,
    segment: impl Fn(&crate::geometry::Mode, &crate::hybrid::LoopSegment) -> Result<GroupElement>,
) -> Result<GroupElement> {
    let n = b.fiber_dim();
    let mut g = GroupElement::identity(n);
    for (k, piece) in part.pieces.iter().enumerate() {
        let mode = b.mode(&piece.mode)?;
        for &si in &piece.segments {
            g += &segment(mode, &lp.segments()[si])?;
        }
        if let Some(c) = part.crossings.get(k) {
            apply_reset(b, c, &mut g)?;
        }
    }
    Ok(g)
}

impl LiftResult {
    /// CSV with columns `t, m_1..m_d, g_1..g_n, mode_id`, one block per piece,
    /// blocks separated by a blank line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, p) in self.pieces.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let d = p.samples.first().map_or(0, |s| s.m.len());
            let n = self.initial.dim();
            let mut header = vec!["t".to_string()];
            header.extend((1..=d).map(|i| format!("m_{i}")));
            header.extend((1..=n).map(|i| format!("g_{i}")));
            header.push("mode_id".into());
            out.push_str(&header.join(","));
            out.push('\n');
            for s in &p.samples {
                let mut row = vec![sig17(s.t)];
                row.extend(s.m.iter().map(|&x| sig17(x)));
                row.extend(s.g.iter().map(|&x| sig17(x)));
                row.push(p.mode.clone());
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        out
    }

    pub fn crossing_log_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.crossings)?)
    }
}
