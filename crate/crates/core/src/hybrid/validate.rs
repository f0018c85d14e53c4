use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HybridBundle;
use crate::error::{Error, Result};

/// Allowed mismatch between `π_j ∘ Δ̃` and `Δ ∘ π_i`.
pub const DIAGRAM_TOL: f64 = 1e-9;

const LINE_SCAN: usize = 64;
const ATTEMPTS_PER_SAMPLE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionReport {
    pub transition: usize,
    pub source: String,
    pub target: String,
    pub guard: String,
    pub points_checked: usize,
    pub max_violation: f64,
    /// Source point of the worst violation.
    pub worst_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub transitions: Vec<TransitionReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.transitions
            .iter()
            .all(|t| t.max_violation <= self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TransitionReport> {
        self.transitions
            .iter()
            .filter(move |t| t.max_violation > self.tolerance)
    }
}

/// Samples points of each guard and measures how far the commuting diagram
/// `π_j ∘ Δ̃ = Δ ∘ π_i` is from holding. Never fails on a violation; see
/// [`validate_bundle`].
pub fn check_bundle(b: &HybridBundle, samples: usize, seed: u64) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::InvalidInput(
            "validation needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.fiber_dim();
    let mut reports = Vec::with_capacity(b.transitions().len());
    for (ti, tr) in b.transitions().iter().enumerate() {
        let src = b.mode(&tr.guard.source)?;
        let dst = b.mode(&tr.guard.target)?;
        let bx = src.chart.sampling_box();
        let mut report = TransitionReport {
            transition: ti,
            source: tr.guard.source.clone(),
            target: tr.guard.target.clone(),
            guard: tr.guard.level().to_string(),
            points_checked: 0,
            max_violation: 0.0,
            worst_point: None,
        };
        for _ in 0..samples * ATTEMPTS_PER_SAMPLE {
            if report.points_checked >= samples {
                break;
            }
            let Some(m) = guard_point(&mut rng, &bx, |p| tr.guard.eval(p).ok()) else {
                continue;
            };
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let (Ok(direct), Ok(lifted)) =
                (tr.reset.apply_base(&m), tr.reset.apply_lifted_base(&m, &g))
            else {
                continue;
            };
            let v = dst.chart.distance(&direct, &lifted);
            if v > report.max_violation || report.worst_point.is_none() {
                report.max_violation = report.max_violation.max(v);
                report.worst_point = Some(m);
            }
            report.points_checked += 1;
        }
        reports.push(report);
    }
    Ok(ValidationReport {
        tolerance: DIAGRAM_TOL,
        transitions: reports,
    })
}

/// [`check_bundle`], failing with `ValidationFailed` on the first violating transition.
pub fn validate_bundle(b: &HybridBundle, samples: usize, seed: u64) -> Result<ValidationReport> {
    let report = check_bundle(b, samples, seed)?;
    if let Some(f) = report.failures().next() {
        return Err(Error::ValidationFailed(format!(
            "reset {} -> {} does not commute with projection: violation {:.3e} at {:?}",
            f.source,
            f.target,
            f.max_violation,
            f.worst_point.as_deref().unwrap_or(&[])
        )));
    }
    Ok(report)
}

/// A root of `eta` on a random chord of the box, or `None` if the chord misses the guard.
fn guard_point(
    rng: &mut ChaCha8Rng,
    bx: &[(f64, f64)],
    eta: impl Fn(&[f64]) -> Option<f64>,
) -> Option<Vec<f64>> {
    let d = bx.len();
    let p: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let u: Vec<f64> = loop {
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            break u.into_iter().map(|x| x / norm).collect();
        }
    };
    // Parameter range keeping p + s u inside the box.
    let (mut smin, mut smax) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&(lo, hi), &pi), &ui) in bx.iter().zip(&p).zip(&u) {
        if ui.abs() < 1e-12 {
            continue;
        }
        let (a, b) = ((lo - pi) / ui, (hi - pi) / ui);
        smin = smin.max(a.min(b));
        smax = smax.min(a.max(b));
    }
    if !(smin < smax) {
        return None;
    }
    let at = |s: f64| -> Vec<f64> { p.iter().zip(&u).map(|(x, v)| x + s * v).collect() };
    let f = |s: f64| eta(&at(s));
    let mut prev = (smin, f(smin)?);
    for i in 1..=LINE_SCAN {
        let s = smin + (smax - smin) * i as f64 / LINE_SCAN as f64;
        let v = f(s)?;
        if v == 0.0 {
            return Some(at(s));
        }
        if prev.1 * v < 0.0 {
            let (mut lo, mut hi, flo) = (prev.0, s, prev.1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid)?;
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(at(0.5 * (lo + hi)));
        }
        prev = (s, v);
    }
    None
}
