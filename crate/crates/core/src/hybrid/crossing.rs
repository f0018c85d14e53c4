//! Guard-crossing detection and partition of a loop into constant-mode pieces.

use rayon::prelude::*;
use serde::Serialize;

use super::{BaseLoop, HybridBundle, LoopSegment, Transition};
use crate::error::{Error, Result};

/// Scan intervals per unit of loop time when looking for sign changes of `η∘γ`.
pub const SCAN_RESOLUTION: usize = 1024;

/// Fewest scan intervals on any segment, however short.
pub const MIN_SEGMENT_SCAN: usize = 16;

/// Bisection stops once the bracket is narrower than this.
const ROOT_TOL: f64 = 1e-12;

/// Roots this close to a segment's end are treated as crossings at the end.
const END_SNAP: f64 = 1e-9;

/// A transversal guard crossing: the active mode switches here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub t: f64,
    /// Index of the loop segment on which the crossing was found.
    pub segment: usize,
    /// Index into [`HybridBundle::transitions`].
    pub transition: usize,
    pub source: String,
    pub target: String,
    /// `γ(t)⁻` in source chart coordinates.
    pub pre: Vec<f64>,
    /// `γ(t)⁺ = Δ(γ(t)⁻)` in target chart coordinates.
    pub post: Vec<f64>,
    /// `dη(γ'(t))`.
    pub transversality: f64,
}

/// A root of `η∘γ` where the curve is tangent to the guard; no transition happens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentialContact {
    pub t: f64,
    pub segment: usize,
    pub transition: usize,
    pub point: Vec<f64>,
    pub transversality: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingScan {
    pub events: Vec<CrossingEvent>,
    pub skipped: Vec<TangentialContact>,
}

/// Finds every root of `η∘γ` for each segment and each guard leaving the
/// segment's mode, classified by transversality. Output is ordered by segment,
/// then time.
///
/// A root at a segment's start is not reported: the start of a segment is
/// treated as post-impact.
pub fn detect_crossings(b: &HybridBundle, lp: &BaseLoop) -> Result<CrossingScan> {
    let per_segment: Vec<CrossingScan> = lp
        .segments()
        .par_iter()
        .enumerate()
        .map(|(k, seg)| scan_segment(b, k, seg, lp.eps_c))
        .collect::<Result<_>>()?;
    let mut out = CrossingScan::default();
    for s in per_segment {
        out.events.extend(s.events);
        out.skipped.extend(s.skipped);
    }
    Ok(out)
}

fn scan_segment(b: &HybridBundle, k: usize, seg: &LoopSegment, eps_c: f64) -> Result<CrossingScan> {
    let mode = b.mode(&seg.mode)?;
    if seg.curve.dim() != mode.base_dim() {
        return Err(Error::InvalidInput(format!(
            "segment {k}: curve dimension {} does not match chart of mode `{}`",
            seg.curve.dim(),
            mode.id
        )));
    }
    let mut out = CrossingScan::default();
    let mut leaving = b.transitions_from(&seg.mode).peekable();
    if leaving.peek().is_none() {
        return Ok(out);
    }
    let intervals = scan_intervals(seg.t0, seg.t1);
    let ts: Vec<f64> = (0..=intervals)
        .map(|j| {
            if j == intervals {
                seg.t1
            } else {
                seg.t0 + (seg.t1 - seg.t0) * j as f64 / intervals as f64
            }
        })
        .collect();
    let points = ts
        .iter()
        .map(|&t| seg.curve.point(t))
        .collect::<Result<Vec<_>>>()?;
    for (ti, tr) in leaving {
        for t in guard_roots(k, seg, tr, eps_c, &ts, &points)? {
            let pre = seg.curve.point(t)?;
            let v = seg
                .curve
                .velocity_within(t, seg.t1 - seg.t0, seg.t0, seg.t1)?;
            let transversality = tr.guard.derivative_along(&pre, &v)?;
            if transversality.abs() > tr.guard.eps_t {
                let post = tr.reset.apply_base(&pre)?;
                out.events.push(CrossingEvent {
                    t,
                    segment: k,
                    transition: ti,
                    source: tr.guard.source.clone(),
                    target: tr.guard.target.clone(),
                    pre,
                    post,
                    transversality,
                });
            } else {
                out.skipped.push(TangentialContact {
                    t,
                    segment: k,
                    transition: ti,
                    point: pre,
                    transversality,
                });
            }
        }
    }
    out.events
        .sort_by(|a, b| a.t.total_cmp(&b.t).then(a.transition.cmp(&b.transition)));
    out.skipped
        .sort_by(|a, b| a.t.total_cmp(&b.t).then(a.transition.cmp(&b.transition)));
    Ok(out)
}

fn scan_intervals(t0: f64, t1: f64) -> usize {
    let n = ((t1 - t0).abs() * SCAN_RESOLUTION as f64).ceil();
    if n.is_finite() {
        (n as usize).max(MIN_SEGMENT_SCAN)
    } else {
        MIN_SEGMENT_SCAN
    }
}

fn guard_roots(
    k: usize,
    seg: &LoopSegment,
    tr: &Transition,
    eps_c: f64,
    ts: &[f64],
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let t1 = seg.t1;
    let eta = |t: f64| -> Result<f64> { tr.guard.eval(&seg.curve.point(t)?) };
    let vals = points
        .iter()
        .map(|p| tr.guard.eval(p))
        .collect::<Result<Vec<_>>>()?;
    let last = ts.len() - 1;
    let on_guard = |v: f64| v.abs() <= eps_c;

    // A guard that holds on a whole stretch of the segment has no isolated crossing.
    let mut run = 0;
    for j in 1..last {
        run = if on_guard(vals[j]) { run + 1 } else { 0 };
        if run >= 3 {
            return Err(Error::AmbiguousCrossing {
                segment: k,
                guard: tr.guard.level().to_string(),
                t: ts[j],
            });
        }
    }

    let start_on_guard = on_guard(vals[0]);
    let end_on_guard = on_guard(vals[last]);
    let mut roots = Vec::new();
    for j in 0..last {
        if (j == 0 && start_on_guard) || (j + 1 == last && end_on_guard) {
            continue;
        }
        let (a, c) = (vals[j], vals[j + 1]);
        if a * c < 0.0 {
            roots.push(bisect(&eta, ts[j], ts[j + 1], a)?);
        } else if j > 0 && a == 0.0 {
            roots.push(ts[j]);
        } else if j > 0 && a != 0.0 {
            let (p, n) = (vals[j - 1], c);
            let touches = a.abs() <= p.abs()
                && a.abs() <= n.abs()
                && p.signum() == a.signum()
                && n.signum() == a.signum();
            if touches {
                let (t, v) = minimize_abs(&eta, ts[j - 1], ts[j + 1])?;
                if on_guard(v) {
                    roots.push(t);
                }
            }
        }
    }
    if end_on_guard {
        roots.push(t1);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_TOL);
    Ok(roots)
}

fn bisect(f: &impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, flo: f64) -> Result<f64> {
    let lo_sign = flo.signum();
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the minimum of `|f|` on `[a, b]`.
fn minimize_abs(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?.abs();
    let mut fd = f(d)?.abs();
    while b - a > ROOT_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?.abs();
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)?.abs()))
}

/// A maximal stretch of the loop in one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub mode: String,
    pub t0: f64,
    pub t1: f64,
    /// Indices of the declared loop segments making up this piece.
    pub segments: Vec<usize>,
}

/// The mode sequence of a loop: `crossings[k]` ends `pieces[k]`. When the loop
/// closes through a guard, the last crossing sits at `t = 1` and returns to the
/// first piece's mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartitionedLoop {
    pub pieces: Vec<Piece>,
    pub crossings: Vec<CrossingEvent>,
    pub skipped: Vec<TangentialContact>,
}

impl PartitionedLoop {
    /// Mode ids visited, starting and ending at the initial mode for a closed loop.
    pub fn mode_sequence(&self) -> Vec<&str> {
        let mut seq: Vec<&str> = self.pieces.iter().map(|p| p.mode.as_str()).collect();
        if let Some(c) = self.crossings.last() {
            if self.crossings.len() == self.pieces.len() {
                seq.push(c.target.as_str());
            }
        }
        if self.crossings.len() < self.pieces.len() {
            if let Some(p) = self.pieces.last() {
                seq.push(p.mode.as_str());
            }
        }
        seq
    }
}

/// Splits a loop at its transversal crossings and checks that each declared
/// segment starts where the reset of the previous one lands.
pub fn segment_loop(b: &HybridBundle, lp: &BaseLoop) -> Result<PartitionedLoop> {
    let scan = detect_crossings(b, lp)?;
    let segs = lp.segments();
    let mut out = PartitionedLoop {
        skipped: scan.skipped,
        ..Default::default()
    };
    if segs.is_empty() {
        return Ok(out);
    }

    let mut current = Piece {
        mode: segs[0].mode.clone(),
        t0: segs[0].t0,
        t1: segs[0].t1,
        segments: vec![0],
    };
    for (k, seg) in segs.iter().enumerate() {
        let is_last = k + 1 == segs.len();
        let next = if is_last { &segs[0] } else { &segs[k + 1] };
        let next_start = next.curve.point(next.t0)?;
        let events: Vec<&CrossingEvent> = scan.events.iter().filter(|e| e.segment == k).collect();

        if let Some(e) = events.iter().find(|e| e.t < seg.t1 - END_SNAP) {
            return Err(Error::ContinuityViolation {
                t: e.t,
                message: format!(
                    "transversal crossing into `{}` inside segment {k}; declare a new segment there",
                    e.target
                ),
            });
        }

        let target_chart = &b.mode(&next.mode)?.chart;
        let into_next: Vec<&&CrossingEvent> =
            events.iter().filter(|e| e.target == next.mode).collect();
        if let Some(e) = into_next
            .iter()
            .find(|e| target_chart.distance(&e.post, &next_start) <= lp.eps_c)
        {
            out.crossings.push((**e).clone());
            out.pieces.push(current.clone());
            if !is_last {
                current = Piece {
                    mode: next.mode.clone(),
                    t0: next.t0,
                    t1: next.t1,
                    segments: vec![k + 1],
                };
            }
            continue;
        }
        if let Some(e) = into_next.first() {
            return Err(Error::ContinuityViolation {
                t: e.t,
                message: format!(
                    "reset lands at {:?} but {} starts at {:?}",
                    e.post,
                    if is_last {
                        "the loop".to_string()
                    } else {
                        format!("segment {}", k + 1)
                    },
                    next_start
                ),
            });
        }
        if let Some(e) = events.first() {
            return Err(Error::ContinuityViolation {
                t: e.t,
                message: format!(
                    "guard into `{}` reached but the loop continues in `{}`",
                    e.target, next.mode
                ),
            });
        }
        if next.mode != seg.mode {
            return Err(Error::ContinuityViolation {
                t: seg.t1,
                message: format!(
                    "mode changes from `{}` to `{}` without reaching a guard",
                    seg.mode, next.mode
                ),
            });
        }
        let end = seg.curve.point(seg.t1)?;
        if target_chart.distance(&end, &next_start) > lp.eps_c {
            return Err(Error::ContinuityViolation {
                t: seg.t1,
                message: if is_last {
                    format!("loop does not close: ends at {end:?}, starts at {next_start:?}")
                } else {
                    format!("curve jumps from {end:?} to {next_start:?}")
                },
            });
        }
        if is_last {
            out.pieces.push(current.clone());
        } else {
            current.t1 = next.t1;
            current.segments.push(k + 1);
        }
    }
    Ok(out)
}
